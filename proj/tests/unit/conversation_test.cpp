#include <gtest/gtest.h>

#include "ragonite/conversation/conversation.hpp"
#include "ragonite/corpus/pool.hpp"
#include "ragonite/llm/mock.hpp"
#include "support/fixtures.hpp"

namespace conversation = ragonite::conversation;
namespace llm = ragonite::llm;
namespace mock = ragonite::llm::mock;
namespace retrieval = ragonite::retrieval;
using ragonite::PreconditionViolation;
using ragonite::ProviderFailure;
using ragonite::UnknownTurn;

namespace {

llm::Providers providers() {
    llm::Providers p;
    p.chat = std::make_shared<mock::MockChat>();
    p.embedder = std::make_shared<mock::MockEmbedder>();
    p.scorer = std::make_shared<mock::MockScorer>();
    return p;
}

const retrieval::EvidenceIndex& sample_index() {
    static mock::MockEmbedder embedder;
    static const auto index = retrieval::index_pool(
        ragonite::corpus::build_evidence_pool(fixtures::sample_dir() / "corpus").evidences, embedder);
    return index;
}

struct BrokenChat : llm::ChatProvider {
    std::string template_to_fail;
    explicit BrokenChat(std::string t) : template_to_fail(std::move(t)) {}
    std::string complete(const llm::ChatRequest& r) override {
        if (r.template_id == template_to_fail) throw ProviderFailure("broken", "down");
        return inner.complete(r);
    }
    std::string name() const override { return "broken"; }
    mock::MockChat inner;
};

}  // namespace

TEST(AskTurn, AppendsCompletedTurn) {
    const auto p = providers();
    conversation::TurnContext ctx{sample_index(), p};
    ctx.answer.temperature = 0.0;
    conversation::Conversation conv{"conv-000001", "sample", {}, false, ""};

    const auto first = conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx);
    ASSERT_EQ(conv.turns.size(), 1u);
    EXPECT_EQ(first.turn.id, "conv-000001-t1");
    EXPECT_EQ(first.turn.index, 0);
    EXPECT_EQ(first.turn.answer, "Priya Raman");
    EXPECT_FALSE(first.turn.is_oos);
    EXPECT_EQ(first.turn.evidences.size(), first.turn.retrieved.size());

    const auto second = conversation::ask_turn(conv, "When was it approved?", ctx);
    ASSERT_EQ(conv.turns.size(), 2u);
    EXPECT_EQ(second.turn.id, "conv-000001-t2");
    EXPECT_EQ(second.turn.completed_question, "When was Harbor 4.0 approved?");
    // Retrieval runs on the completed question, not the raw one.
    ASSERT_TRUE(second.trace.retrieval.has_value());
    EXPECT_EQ(second.trace.retrieval->query, second.turn.completed_question);
    ASSERT_TRUE(second.trace.completion.has_value());
    EXPECT_NE(second.trace.completion->user_prompt.find("Q1: Who approved the Harbor 4.0 release?\nA1: Priya Raman"),
              std::string::npos);
    EXPECT_EQ(second.trace.turn_id, second.turn.id);
}

TEST(AskTurn, FailureLeavesConversationUnchanged) {
    for (const char* stage : {"rephrase", "answer"}) {
        auto p = providers();
        p.chat = std::make_shared<BrokenChat>(stage);
        conversation::TurnContext ctx{sample_index(), p};
        ctx.retry = {0, std::chrono::milliseconds(1), 1.0};
        conversation::Conversation conv{"conv-000002", "sample", {}, false, ""};
        EXPECT_THROW(conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx), ProviderFailure);
        EXPECT_TRUE(conv.turns.empty()) << stage;
    }
}

TEST(AskTurn, BlankQuestionRejected) {
    const auto p = providers();
    conversation::TurnContext ctx{sample_index(), p};
    conversation::Conversation conv{"conv-000003", "sample", {}, false, ""};
    EXPECT_THROW(conversation::ask_turn(conv, "   ", ctx), PreconditionViolation);
    EXPECT_TRUE(conv.turns.empty());
}

TEST(AskTurn, EmptyIndexAnswersOutOfScope) {
    const auto p = providers();
    const retrieval::EvidenceIndex empty;
    conversation::TurnContext ctx{empty, p};
    conversation::Conversation conv{"conv-000004", "sample", {}, false, ""};
    const auto r = conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx);
    EXPECT_TRUE(r.turn.is_oos);
    EXPECT_TRUE(r.turn.retrieved.empty());
    ASSERT_TRUE(r.trace.answering.has_value());
    EXPECT_FALSE(r.trace.answering->called_provider);
}

TEST(Feedback, RecordsAndOverwrites) {
    const auto p = providers();
    conversation::TurnContext ctx{sample_index(), p};
    conversation::Conversation conv{"conv-000005", "sample", {}, false, ""};
    conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx);
    conversation::record_feedback(conv, 0, conversation::Feedback::up);
    EXPECT_EQ(conv.turns[0].feedback, conversation::Feedback::up);
    conversation::record_feedback(conv, 0, conversation::Feedback::down);
    EXPECT_EQ(conv.turns[0].feedback, conversation::Feedback::down);
    EXPECT_THROW(conversation::record_feedback(conv, 1, conversation::Feedback::up), UnknownTurn);
    EXPECT_THROW(conversation::record_feedback(conv, -1, conversation::Feedback::up), UnknownTurn);
    EXPECT_EQ(conversation::feedback_from("down"), conversation::Feedback::down);
}

TEST(Followups, ExactlyNLines) {
    const auto p = providers();
    conversation::TurnContext ctx{sample_index(), p};
    conversation::Conversation conv{"conv-000006", "sample", {}, false, ""};
    EXPECT_THROW(conversation::suggest_followups(conv, 3, *p.chat), PreconditionViolation);
    conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx);
    const auto s = conversation::suggest_followups(conv, 3, *p.chat);
    ASSERT_EQ(s.size(), 3u);
    for (const auto& q : s) EXPECT_FALSE(q.empty());
    EXPECT_EQ(conversation::suggest_followups(conv, 5, *p.chat).size(), 5u);
    EXPECT_TRUE(conversation::suggest_followups(conv, 0, *p.chat).empty());
}

TEST(Followups, ProviderFailureGivesEmptyList) {
    const auto p = providers();
    conversation::TurnContext ctx{sample_index(), p};
    conversation::Conversation conv{"conv-000007", "sample", {}, false, ""};
    conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx);
    BrokenChat broken("followup");
    EXPECT_TRUE(conversation::suggest_followups(conv, 3, broken).empty());
}

TEST(Json, ConversationAndTraceRoundTrip) {
    const auto p = providers();
    conversation::TurnContext ctx{sample_index(), p};
    conversation::Conversation conv{"conv-000008", "sample", {}, false, conversation::now_iso8601()};
    conversation::ask_turn(conv, "Who approved the Harbor 4.0 release?", ctx);
    const auto r = conversation::ask_turn(conv, "When was it approved?", ctx);
    conversation::record_feedback(conv, 1, conversation::Feedback::up);

    const nlohmann::json j = conv;
    EXPECT_EQ(nlohmann::json(j.get<conversation::Conversation>()), j);
    const nlohmann::json t = r.trace;
    EXPECT_EQ(nlohmann::json(t.get<conversation::TraceRecord>()), t);
}
