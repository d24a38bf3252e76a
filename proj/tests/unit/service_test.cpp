#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "ragonite/llm/mock.hpp"
#include "ragonite/service/http.hpp"
#include "support/fixtures.hpp"

namespace service = ragonite::service;
namespace conversation = ragonite::conversation;
namespace attribution = ragonite::attribution;
namespace llm = ragonite::llm;
namespace mock = ragonite::llm::mock;
using json = nlohmann::json;
using ragonite::Conflict;
using ragonite::CorruptStore;
using ragonite::InvalidConfig;
using ragonite::NotFound;

namespace {

service::Domain sample_domain(const fixtures::TempDir& dir) {
    return {"sample", fixtures::sample_dir() / "corpus", dir / "indexes"};
}

/// Answer calls block until released, so a turn can be held open.
struct GateChat : llm::ChatProvider {
    std::promise<void> entered;
    std::shared_future<void> release;
    explicit GateChat(std::shared_future<void> r) : release(std::move(r)) {}
    std::string complete(const llm::ChatRequest& r) override {
        if (r.template_id == "answer") {
            entered.set_value();
            release.wait();
        }
        return inner.complete(r);
    }
    std::string name() const override { return "gate"; }
    mock::MockChat inner;
};

class Api {
public:
    explicit Api(service::Engine& engine) {
        service::register_routes(server_, engine, [this](const std::string& l) {
            std::lock_guard lock(mu_);
            log_.push_back(l);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Api() {
        server_.stop();
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60, 0);
        return c;
    }
    std::vector<std::string> log() {
        std::lock_guard lock(mu_);
        return log_;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::mutex mu_;
    std::vector<std::string> log_;
};

}  // namespace

TEST(Store, PersistsAcrossReopen) {
    fixtures::TempDir dir("store");
    std::string conv_id;
    conversation::ConversationTurn turn;
    {
        service::Store store(dir / "s.db");
        EXPECT_EQ(store.schema_version(), service::kSchemaVersion);
        auto conv = store.create_conversation("sample");
        conv_id = conv.id;
        EXPECT_EQ(conv_id, "conv-000001");
        turn.id = conv.id + "-t1";
        turn.question = "q";
        turn.answer = "a";
        conversation::TraceRecord trace;
        trace.turn_id = turn.id;
        store.append_turn(conv.id, turn, trace);
        attribution::AttributionReport r;
        r.method = attribution::Method::naive;
        r.distribution = {{"x", 1.0}};
        EXPECT_EQ(store.put_attribution(turn.id, r), turn.id + "-naive");
        store.add_config({});
    }
    service::Store store(dir / "s.db");
    const auto conv = store.conversation(conv_id);
    ASSERT_EQ(conv.turns.size(), 1u);
    EXPECT_EQ(conv.turns[0].answer, "a");
    EXPECT_EQ(conv.turns[0].attribution_refs.at("naive"), turn.id + "-naive");
    EXPECT_TRUE(store.trace(turn.id).attribution.contains("naive"));
    EXPECT_TRUE(store.attribution(turn.id, attribution::Method::naive).has_value());
    EXPECT_FALSE(store.attribution(turn.id, attribution::Method::cfa).has_value());
    ASSERT_TRUE(store.latest_config().has_value());
    EXPECT_EQ(store.latest_config()->version, 1);
    EXPECT_EQ(store.create_conversation("sample").id, "conv-000002");
}

TEST(Store, SoftDelete) {
    fixtures::TempDir dir("delete");
    service::Store store(dir / "s.db");
    const auto a = store.create_conversation("sample");
    store.create_conversation("sample");
    store.soft_delete(a.id);
    EXPECT_EQ(store.list_conversations(false).size(), 1u);
    EXPECT_EQ(store.list_conversations(true).size(), 2u);
    EXPECT_TRUE(store.conversation(a.id).deleted);
    EXPECT_THROW(store.soft_delete("conv-999999"), NotFound);
    EXPECT_THROW(store.conversation("conv-999999"), NotFound);
}

TEST(Store, RejectsForeignFiles) {
    fixtures::TempDir dir("corrupt");
    fixtures::write_file(dir / "junk.db", std::string(4096, 'x'));
    EXPECT_THROW(service::Store(dir / "junk.db"), CorruptStore);
    {
        service::Store store(dir / "old.db");
    }
    {
        // Simulate a store written by another schema version.
        sqlite3* db = nullptr;
        ASSERT_EQ(sqlite3_open((dir / "old.db").string().c_str(), &db), SQLITE_OK);
        sqlite3_exec(db, "PRAGMA user_version = 99", nullptr, nullptr, nullptr);
        sqlite3_close(db);
    }
    try {
        service::Store store(dir / "old.db");
        FAIL() << "expected CorruptStore";
    } catch (const CorruptStore& e) {
        EXPECT_NE(std::string(e.what()).find("99"), std::string::npos) << e.what();
    }
}

TEST(Config, MergeAndValidate) {
    service::RuntimeConfig base;
    const auto c = service::merge_config(base, {{"retrieval", {{"k", 5}}}, {"context", "TTL+HDR"}});
    EXPECT_EQ(c.retrieval.k, 5);
    EXPECT_EQ(c.retrieval.mode, base.retrieval.mode);
    EXPECT_TRUE(c.context.title && c.context.heading && !c.context.before);
    EXPECT_THROW(service::merge_config(base, {{"retrieval", {{"k", 0}}}}), InvalidConfig);
    EXPECT_THROW(service::merge_config(base, {{"provider", {{"kind", "openai"}}}}), InvalidConfig);
    EXPECT_THROW(service::merge_config(base, {{"indexing", "rows"}}), InvalidConfig);
    EXPECT_THROW(service::merge_config(base, json::array()), InvalidConfig);
    EXPECT_EQ(json(c).get<service::RuntimeConfig>(), c);
}

TEST(Engine, ConfigVersions) {
    fixtures::TempDir dir("versions");
    service::Store store(dir / "s.db");
    service::Engine engine(store, {sample_domain(dir)}, {});
    EXPECT_EQ(engine.config().version, 1);
    EXPECT_EQ(engine.config().domain, "sample");
    EXPECT_EQ(engine.update_config({{"retrieval", {{"k", 10}}}}).version, 1);  // unchanged
    EXPECT_EQ(engine.update_config({{"retrieval", {{"k", 5}}}}).version, 2);
    EXPECT_EQ(engine.update_config({{"retrieval", {{"k", 5}}}}).version, 2);
    EXPECT_THROW(engine.update_config({{"domain", "nope"}}), InvalidConfig);
    EXPECT_EQ(store.config(1)->retrieval.k, 10);
    // A restarted engine resumes from the latest stored version.
    service::Engine again(store, {sample_domain(dir)}, {});
    EXPECT_EQ(again.config().version, 2);
    EXPECT_EQ(again.config().retrieval.k, 5);
}

TEST(Engine, TurnsRecordConfigVersionAndFeedback) {
    fixtures::TempDir dir("engine");
    service::Store store(dir / "s.db");
    service::Engine engine(store, {sample_domain(dir)}, {});
    const auto conv = engine.create_conversation("");
    const auto t1 = engine.ask(conv.id, "Who approved the Harbor 4.0 release?");
    EXPECT_EQ(t1.config_version, 1);
    engine.update_config({{"answer_temperature", 0.0}});
    const auto t2 = engine.ask(conv.id, "When was it approved?");
    EXPECT_EQ(t2.config_version, 2);
    EXPECT_EQ(engine.feedback(t2.id, conversation::Feedback::down).feedback, conversation::Feedback::down);
    EXPECT_EQ(engine.conversation(conv.id).turns[1].feedback, conversation::Feedback::down);
    EXPECT_THROW(engine.feedback("conv-000001-t9", conversation::Feedback::up), NotFound);
    EXPECT_EQ(engine.suggestions(t1.id, 2).size(), 2u);
    // Explanations are cached.
    const auto a = engine.explain(t1.id, attribution::Method::naive);
    const auto b = engine.explain(t1.id, attribution::Method::naive);
    EXPECT_EQ(json(a), json(b));
    EXPECT_EQ(engine.conversation(conv.id).turns[0].attribution_refs.at("naive"), t1.id + "-naive");
}

TEST(Engine, SecondConcurrentAskConflicts) {
    fixtures::TempDir dir("conflict");
    service::Store store(dir / "s.db");
    std::promise<void> release;
    std::shared_future<void> released = release.get_future().share();
    std::shared_ptr<GateChat> gate;
    service::Engine engine(store, {sample_domain(dir)}, {}, [&](const service::ProviderConfig& c) {
        auto p = service::make_providers(c);
        gate = std::make_shared<GateChat>(released);
        p.chat = gate;
        return p;
    });
    const auto conv = engine.create_conversation("sample");
    auto first = std::async(std::launch::async, [&] { return engine.ask(conv.id, "Who approved the Harbor 4.0 release?"); });
    gate->entered.get_future().wait();
    EXPECT_THROW(engine.ask(conv.id, "When was it approved?"), Conflict);
    release.set_value();
    EXPECT_EQ(first.get().answer, "Priya Raman");
    EXPECT_EQ(engine.conversation(conv.id).turns.size(), 1u);
}

TEST(Http, StatusCodes) {
    fixtures::TempDir dir("http");
    service::Store store(dir / "s.db");
    service::Engine engine(store, {sample_domain(dir)}, {});
    Api api(engine);
    auto c = api.client();

    auto created = c.Post("/api/conversations", "{}", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const auto id = json::parse(created->body).at("id").get<std::string>();

    EXPECT_EQ(c.Get("/api/conversations/conv-424242")->status, 404);
    EXPECT_EQ(c.Get("/api/turns/nope/trace")->status, 404);
    EXPECT_EQ(c.Post("/api/conversations", R"({"domain": "other"})", "application/json")->status, 404);

    auto bad = c.Post("/api/conversations/" + id + "/messages", "{}", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(json::parse(bad->body).at("error"), "PreconditionViolation");
    EXPECT_EQ(c.Post("/api/conversations/" + id + "/messages", "{not json", "application/json")->status, 400);
    EXPECT_EQ(c.Put("/api/config", R"({"retrieval": {"k": 0}})", "application/json")->status, 400);

    auto asked = c.Post("/api/conversations/" + id + "/messages", R"({"question": "Who approved the Harbor 4.0 release?"})",
                        "application/json");
    ASSERT_EQ(asked->status, 200);
    const auto turn = json::parse(asked->body);
    EXPECT_EQ(turn.at("answer"), "Priya Raman");
    const auto turn_id = turn.at("id").get<std::string>();

    EXPECT_EQ(c.Post("/api/turns/" + turn_id + "/explain", R"({"method": "shap"})", "application/json")->status, 400);
    EXPECT_EQ(c.Post("/api/turns/" + turn_id + "/feedback", R"({"value": "meh"})", "application/json")->status, 400);
    EXPECT_EQ(c.Get("/api/turns/" + turn_id + "/suggestions?n=0")->status, 400);
    auto sugg = c.Get("/api/turns/" + turn_id + "/suggestions?n=2");
    ASSERT_EQ(sugg->status, 200);
    EXPECT_EQ(json::parse(sugg->body).at("suggestions").size(), 2u);

    EXPECT_EQ(c.Delete("/api/conversations/" + id)->status, 200);
    EXPECT_EQ(c.Post("/api/conversations/" + id + "/messages", R"({"question": "again?"})", "application/json")->status,
              404);
    EXPECT_EQ(json::parse(c.Get("/api/conversations")->body).size(), 0u);
    EXPECT_EQ(json::parse(c.Get("/api/conversations?include_deleted=true")->body).size(), 1u);
    EXPECT_EQ(json::parse(c.Get("/api/domains")->body).at(0).at("name"), "sample");
}

TEST(Http, ConfigPutIsIdempotent) {
    fixtures::TempDir dir("httpcfg");
    service::Store store(dir / "s.db");
    service::Engine engine(store, {sample_domain(dir)}, {});
    Api api(engine);
    auto c = api.client();
    const auto v1 = json::parse(c.Get("/api/config")->body);
    EXPECT_EQ(v1.at("version"), 1);
    EXPECT_EQ(json::parse(c.Put("/api/config", v1.dump(), "application/json")->body).at("version"), 1);
    const auto v2 = json::parse(c.Put("/api/config", R"({"cfa": {"m": 3}})", "application/json")->body);
    EXPECT_EQ(v2.at("version"), 2);
    EXPECT_EQ(v2.at("cfa").at("m"), 3);
    EXPECT_EQ(json::parse(c.Put("/api/config", R"({"cfa": {"m": 3}})", "application/json")->body).at("version"), 2);
}

TEST(Http, RequestLogHasNoBodies) {
    fixtures::TempDir dir("httplog");
    service::Store store(dir / "s.db");
    service::Engine engine(store, {sample_domain(dir)}, {});
    Api api(engine);
    auto c = api.client();
    const auto conv = json::parse(c.Post("/api/conversations", "{}", "application/json")->body);
    c.Post("/api/conversations/" + conv.at("id").get<std::string>() + "/messages",
           R"({"question": "secret-question-text"})", "application/json");
    const auto log = api.log();
    ASSERT_EQ(log.size(), 2u);
    for (const auto& l : log) {
        const auto j = json::parse(l);
        EXPECT_TRUE(j.contains("method") && j.contains("path") && j.contains("status"));
        EXPECT_EQ(l.find("secret-question-text"), std::string::npos);
    }
}
