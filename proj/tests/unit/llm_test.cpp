#include <gtest/gtest.h>

#include <stdlib.h>

#include <atomic>
#include <thread>

#include "ragonite/llm/gateway.hpp"
#include "ragonite/llm/mock.hpp"
#include "ragonite/llm/openai.hpp"
#include "support/fixtures.hpp"

namespace llm = ragonite::llm;
namespace mock = ragonite::llm::mock;
using ragonite::ContextOverflow;
using ragonite::PreconditionViolation;
using ragonite::ProviderFailure;
using ragonite::TemplateError;
using ragonite::UnparseableVerdict;

namespace {

std::string oos() { return std::string(llm::kOutOfScopeAnswer); }

llm::Generation ask(mock::MockChat& chat, const std::string& question,
                    const std::vector<ragonite::corpus::ContextualizedEvidence>& evs, double temperature = 0.0,
                    std::optional<std::uint64_t> seed = {}) {
    llm::AnswerOptions opt;
    opt.temperature = temperature;
    opt.seed = seed;
    return llm::generate_answer(question, evs, chat, opt);
}

}  // namespace

TEST(Render, SubstitutesAndEscapes) {
    EXPECT_EQ(llm::render("a {x} {{y}} {x}", {{"x", "1"}}), "a 1 {y} 1");
    EXPECT_THROW(llm::render("{missing}", {}), TemplateError);
    EXPECT_THROW(llm::render("{open", {{"open", ""}}), TemplateError);
}

TEST(Render, TemplateChecksDeclaredPlaceholders) {
    const auto p = llm::default_prompts();
    EXPECT_THROW(llm::render(p.answer, {{"question", "q"}}), TemplateError);
    const auto r = llm::render(p.answer, {{"question", "q"}, {"evidences", "e"}});
    EXPECT_NE(r.user.find("### Evidences\ne\n### Question\nq"), std::string::npos);
}

TEST(Prompts, ShippedFilesMatchBuiltins) {
    const auto dir = fixtures::source_dir() / "prompts" / "v1";
    const auto loaded = llm::load_prompt_set(dir);
    const auto builtin = llm::default_prompts();
    EXPECT_EQ(loaded.version, "v1");
    for (auto [a, b] : {std::pair{&loaded.rephrase, &builtin.rephrase}, std::pair{&loaded.answer, &builtin.answer},
                        std::pair{&loaded.judge, &builtin.judge}, std::pair{&loaded.followup, &builtin.followup}}) {
        EXPECT_EQ(a->system, b->system) << a->id;
        EXPECT_EQ(a->user, b->user) << a->id;
        EXPECT_EQ(fixtures::read_file(dir / (a->id + ".txt")), llm::format_template_file(*b));
    }
    EXPECT_NO_THROW(llm::validate(loaded));
}

TEST(Prompts, AnswerTemplateMustCarryOosSentence) {
    auto p = llm::default_prompts();
    p.answer.system = "Answer.";
    EXPECT_THROW(llm::validate(p), TemplateError);
    fixtures::TempDir dir("prompts");
    fixtures::write_file(dir / "judge.txt", "no sections here");
    EXPECT_THROW(llm::load_prompt_set(dir.path()), TemplateError);
}

TEST(Verdict, Parses) {
    EXPECT_EQ(llm::parse_verdict("Score: 1"), 1.0);
    EXPECT_EQ(llm::parse_verdict("score = 0.5"), 0.5);
    EXPECT_EQ(llm::parse_verdict("Score: .5 because partial"), 0.5);
    EXPECT_EQ(llm::parse_verdict("Score: 0"), 0.0);
    EXPECT_EQ(llm::parse_verdict(" 1.0 "), 1.0);
    EXPECT_THROW(llm::parse_verdict("Score: 0.7"), UnparseableVerdict);
    EXPECT_THROW(llm::parse_verdict("Score: 10"), UnparseableVerdict);
    EXPECT_THROW(llm::parse_verdict("great answer"), UnparseableVerdict);
}

TEST(History, RendersNumberedTurns) {
    const std::vector<llm::HistoryTurn> h{{"q1", "a1"}, {"q2", "a2"}};
    EXPECT_EQ(llm::render_history(h), "Q1: q1\nA1: a1\nQ2: q2\nA2: a2");
    EXPECT_EQ(llm::render_history({}), "(no previous turns)");
}

TEST(MockChat, AnswersFromMarker) {
    mock::MockChat chat;
    const std::vector evs{fixtures::evidence("a#1", "Unrelated budget note."),
                          fixtures::evidence("a#2", "The release was approved. ANSWER:=Priya_Raman")};
    EXPECT_EQ(ask(chat, "Who approved the release?", evs).output, "Priya Raman");
    EXPECT_EQ(ask(chat, "Who approved the release?", {evs[0]}).output, oos());
}

TEST(MockChat, PrefersBestOverlappingBlock) {
    mock::MockChat chat;
    const std::vector evs{fixtures::evidence("a#1", "Parking rules. ANSWER:=level_2"),
                          fixtures::evidence("a#2", "Release approval. ANSWER:=Priya")};
    EXPECT_EQ(ask(chat, "Who gave release approval?", evs).output, "Priya");
    EXPECT_EQ(ask(chat, "Where are the parking rules?", evs).output, "level 2");
}

TEST(MockChat, VariantsOnlyAtPositiveTemperature) {
    mock::MockChat chat;
    const std::vector evs{fixtures::evidence("a#1", "Code word. ANSWER:=alpha||beta")};
    EXPECT_EQ(ask(chat, "code word?", evs, 0.0).output, "alpha");
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 40; ++s) seen.insert(ask(chat, "code word?", evs, 0.7, s).output);
    EXPECT_EQ(seen, (std::set<std::string>{"alpha", "beta"}));
    EXPECT_EQ(ask(chat, "code word?", evs, 0.7, 3).output, ask(chat, "code word?", evs, 0.7, 3).output);
}

TEST(MockChat, EmptyEvidenceSkipsProvider) {
    mock::MockChat chat;
    const auto g = ask(chat, "anything?", {});
    EXPECT_EQ(g.output, oos());
    EXPECT_FALSE(g.called_provider);
    EXPECT_EQ(chat.calls(), 0u);
    EXPECT_TRUE(llm::is_out_of_scope(g.output));
}

TEST(MockChat, RephraseCarriesEntity) {
    mock::MockChat chat;
    const std::vector<llm::HistoryTurn> h{{"Who approved the Harbor 4.0 release?", "Priya Raman"}};
    EXPECT_EQ(llm::complete_question(h, "When was it approved?", chat).output, "When was Harbor 4.0 approved?");
    EXPECT_EQ(llm::complete_question(h, "Who signed off?", chat).output, "Who signed off for Harbor 4.0?");
    EXPECT_EQ(llm::complete_question({}, "When was it approved?", chat).output, "When was it approved?");
    EXPECT_EQ(llm::complete_question(h, "Is Harbor 4.0 out?", chat).output, "Is Harbor 4.0 out?");
    EXPECT_THROW(llm::complete_question(h, "  ", chat), PreconditionViolation);
}

TEST(MockChat, JudgeScale) {
    mock::MockChat chat;
    EXPECT_EQ(llm::judge_answer("q", "Priya Raman", "Priya Raman", chat).score, 1.0);
    EXPECT_EQ(llm::judge_answer("q", "Priya Raman", "It was Priya Raman.", chat).score, 1.0);
    EXPECT_EQ(llm::judge_answer("q", "Priya Raman", "Priya", chat).score, 0.5);
    EXPECT_EQ(llm::judge_answer("q", "Priya Raman", "Ravi", chat).score, 0.0);
    EXPECT_EQ(llm::judge_answer("q", "Priya Raman", oos(), chat).score, 0.0);
    EXPECT_THROW(llm::judge_answer("q", "", "x", chat), PreconditionViolation);
}

TEST(MockChat, UnknownTemplateFails) {
    mock::MockChat chat;
    llm::ChatRequest r;
    r.template_id = "poem";
    EXPECT_THROW(chat.complete(r), ProviderFailure);
}

TEST(Answer, ContextOverflowReportsFit) {
    mock::MockChat chat;
    std::vector<ragonite::corpus::ContextualizedEvidence> evs;
    for (int i = 0; i < 5; ++i) evs.push_back(fixtures::evidence("a#" + std::to_string(i), std::string(400, 'x')));
    llm::AnswerOptions opt;
    const auto base = llm::estimate_tokens(llm::render(llm::default_prompts().answer, {{"evidences", ""}, {"question", "q"}}));
    opt.max_prompt_tokens = base + 250;
    try {
        llm::generate_answer("q", evs, chat, opt);
        FAIL() << "expected ContextOverflow";
    } catch (const ContextOverflow& e) {
        EXPECT_EQ(e.evidences_that_fit(), 2u);
    }
    EXPECT_EQ(chat.calls(), 0u);
}

TEST(MockEmbedder, UnitVectorsAndSimilarity) {
    mock::MockEmbedder e;
    const std::vector<std::string> texts{"release approval", "release approval", "parking garage levels"};
    const auto v = llm::embed_texts(texts, e);
    ASSERT_EQ(v.size(), 3u);
    for (const auto& x : v) EXPECT_NEAR(llm::l2_norm(x), 1.0, 1e-12);
    EXPECT_NEAR(llm::dot(v[0], v[1]), 1.0, 1e-12);
    EXPECT_LT(llm::dot(v[0], v[2]), 0.5);
    EXPECT_EQ(e.calls(), 1u);
    EXPECT_THROW(llm::embed_text("", e), PreconditionViolation);
}

TEST(MockScorer, FractionOfQueryTerms) {
    mock::MockScorer s;
    const std::vector<std::string> docs{"release approved by Priya", "parking"};
    EXPECT_EQ(s.score("release approved", docs), (std::vector<double>{1.0, 0.0}));
}

TEST(Retry, RetryableFailuresAreRetried) {
    llm::RetryPolicy p{3, std::chrono::milliseconds(1), 2.0};
    int calls = 0;
    EXPECT_EQ(llm::with_retries(p, [&] {
                  if (++calls < 3) throw ProviderFailure("x", "busy", true);
                  return 7;
              }),
              7);
    EXPECT_EQ(calls, 3);
    calls = 0;
    EXPECT_THROW(llm::with_retries(p, [&]() -> int {
                     ++calls;
                     throw ProviderFailure("x", "bad request");
                 }),
                 ProviderFailure);
    EXPECT_EQ(calls, 1);
    calls = 0;
    EXPECT_THROW(llm::with_retries(p, [&]() -> int {
                     ++calls;
                     throw ProviderFailure("x", "busy", true);
                 }),
                 ProviderFailure);
    EXPECT_EQ(calls, 4);
}

namespace {

struct SlowChat : llm::ChatProvider {
    std::atomic<int> in_flight{0}, peak{0};
    std::string complete(const llm::ChatRequest&) override {
        const int now = ++in_flight;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        --in_flight;
        return "ok";
    }
    std::string name() const override { return "slow"; }
};

}  // namespace

TEST(Concurrency, LimitCapsInFlightCalls) {
    auto slow = std::make_shared<SlowChat>();
    llm::Providers p;
    p.chat = slow;
    p.judge = slow;
    const auto limited = llm::limit_concurrency(p, 2);
    EXPECT_EQ(limited.counterfactual_chat, nullptr);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&, i] { (i % 2 ? limited.chat : limited.judge)->complete({}); });
    for (auto& t : threads) t.join();
    EXPECT_LE(slow->peak.load(), 2);
    EXPECT_GE(slow->peak.load(), 1);
}

// OpenAI-compatible client against a loopback server.

namespace {

class FakeApi {
public:
    FakeApi() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++chat_calls;
            last_auth = req.get_header_value("Authorization");
            if (n <= fail_first) {
                res.status = 503;
                res.set_content("overloaded", "text/plain");
                return;
            }
            if (reject) {
                res.status = 401;
                res.set_content("bad key " + last_auth, "text/plain");
                return;
            }
            const auto body = nlohmann::json::parse(req.body);
            last_body = body;
            res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", " echo "}}}}}}}.dump(),
                            "application/json");
        });
        server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            nlohmann::json data = nlohmann::json::array();
            const auto n = body.at("input").size();
            for (std::size_t i = n; i-- > 0;)  // reversed: the client must honour "index"
                data.push_back({{"index", i}, {"embedding", {static_cast<double>(i + 1), 1.0, 0.0}}});
            res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
        });
        server_.Post("/v1/rerank", [](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            nlohmann::json results = nlohmann::json::array();
            for (std::size_t i = 0; i < body.at("documents").size(); ++i)
                results.push_back({{"index", i}, {"relevance_score", 1.0 / static_cast<double>(i + 1)}});
            res.set_content(nlohmann::json{{"results", results}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeApi() {
        server_.stop();
        thread_.join();
    }

    llm::openai::ClientOptions options() const {
        llm::openai::ClientOptions o;
        o.endpoint_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
        o.api_key_env_var = "RAGONITE_TEST_SECRET";
        o.timeout_seconds = 5;
        o.retry = {3, std::chrono::milliseconds(1), 1.0};
        return o;
    }

    std::atomic<int> chat_calls{0};
    int fail_first = 0;
    bool reject = false;
    std::string last_auth;
    nlohmann::json last_body;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

const char* kSecret = "sk-test-0123456789";

}  // namespace

TEST(OpenAi, ParseEndpoint) {
    const auto e = llm::openai::parse_endpoint("http://localhost:8000/v1/");
    EXPECT_EQ(e.origin, "http://localhost:8000");
    EXPECT_EQ(e.base_path, "/v1");
    EXPECT_THROW(llm::openai::parse_endpoint("localhost:8000"), ragonite::InvalidConfig);
}

TEST(OpenAi, ChatSendsRequestAndKey) {
    ::setenv("RAGONITE_TEST_SECRET", kSecret, 1);
    FakeApi api;
    llm::openai::ChatClient chat(api.options(), "gpt-test");
    llm::ChatRequest r;
    r.system_prompt = "sys";
    r.user_prompt = "usr";
    r.temperature = 0.3;
    r.seed = 9;
    EXPECT_EQ(chat.complete(r), " echo ");
    EXPECT_EQ(api.last_auth, std::string("Bearer ") + kSecret);
    EXPECT_EQ(api.last_body.at("model"), "gpt-test");
    EXPECT_EQ(api.last_body.at("messages").at(1).at("content"), "usr");
    EXPECT_EQ(api.last_body.at("seed"), 9);
}

TEST(OpenAi, RetriesServerErrors) {
    ::setenv("RAGONITE_TEST_SECRET", kSecret, 1);
    FakeApi api;
    api.fail_first = 2;
    llm::openai::ChatClient chat(api.options(), "gpt-test");
    EXPECT_EQ(chat.complete({}), " echo ");
    EXPECT_EQ(api.chat_calls.load(), 3);
}

TEST(OpenAi, ErrorsNeverContainTheKey) {
    ::setenv("RAGONITE_TEST_SECRET", kSecret, 1);
    FakeApi api;
    api.reject = true;
    llm::openai::ChatClient chat(api.options(), "gpt-test");
    try {
        chat.complete({});
        FAIL() << "expected ProviderFailure";
    } catch (const ProviderFailure& e) {
        EXPECT_FALSE(e.retryable());
        EXPECT_EQ(std::string(e.what()).find(kSecret), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("[REDACTED]"), std::string::npos) << e.what();
    }
    EXPECT_EQ(api.chat_calls.load(), 1);
    EXPECT_EQ(llm::openai::redact("a KEY b KEY", "KEY"), "a [REDACTED] b [REDACTED]");
}

TEST(OpenAi, EmbeddingsFollowIndexField) {
    FakeApi api;
    llm::openai::EmbeddingClient emb(api.options(), "embed-test");
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto v = emb.embed(texts);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0][0], 1.0);
    EXPECT_EQ(v[2][0], 3.0);
    EXPECT_EQ(emb.dimension(), 3u);
}

TEST(OpenAi, RerankScores) {
    FakeApi api;
    llm::openai::RerankClient rr(api.options(), "rerank-test");
    const std::vector<std::string> docs{"x", "y"};
    EXPECT_EQ(rr.score("q", docs), (std::vector<double>{1.0, 0.5}));
}

TEST(OpenAi, UnreachableEndpointIsRetryableFailure) {
    llm::openai::ClientOptions o;
    o.endpoint_url = "http://127.0.0.1:1";
    o.timeout_seconds = 1;
    o.retry = {0, std::chrono::milliseconds(1), 1.0};
    llm::openai::ChatClient chat(o, "m");
    try {
        chat.complete({});
        FAIL();
    } catch (const ProviderFailure& e) {
        EXPECT_TRUE(e.retryable());
    }
}
