#pragma once

#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/attribution/cfa.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/llm/gateway.hpp"
#include "ragonite/retrieval/retrieve.hpp"

namespace ragonite::conversation {

enum class Feedback { up, down };

inline std::string_view to_string(Feedback f) { return f == Feedback::up ? "up" : "down"; }

inline Feedback feedback_from(std::string_view s) {
    if (s == "up") return Feedback::up;
    if (s == "down") return Feedback::down;
    throw PreconditionViolation("feedback must be 'up' or 'down', got '" + std::string(s) + "'");
}

/// UTC timestamp, ISO 8601 with millisecond precision.
inline std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

struct ConversationTurn {
    std::string id;
    int index = 0;  // 0-based position in the conversation
    std::string question;
    std::string completed_question;
    retrieval::RankedList retrieved;
    std::vector<corpus::ContextualizedEvidence> evidences;  // resolved, rank order
    std::string answer;
    bool is_oos = false;
    std::optional<Feedback> feedback;
    std::string trace_ref;
    std::map<std::string, std::string> attribution_refs;  // method -> report id
    int config_version = 0;
    std::string created_at;

    bool operator==(const ConversationTurn&) const = default;
};

struct Conversation {
    std::string id;
    std::string domain;
    std::vector<ConversationTurn> turns;
    bool deleted = false;
    std::string created_at;

    std::vector<llm::HistoryTurn> history() const {
        std::vector<llm::HistoryTurn> h;
        for (const auto& t : turns) h.push_back({t.question, t.answer});
        return h;
    }
};

struct StageRecord {
    std::string system_prompt;
    std::string user_prompt;
    std::string output;
    double elapsed_ms = 0.0;
    bool called_provider = true;
};

/// Everything a turn did, stage by stage.
struct TraceRecord {
    std::string turn_id;
    int config_version = 0;
    std::optional<StageRecord> completion;
    std::optional<retrieval::RetrievalTrace> retrieval;
    double retrieval_ms = 0.0;
    std::optional<StageRecord> answering;
    std::map<std::string, attribution::AttributionReport> attribution;  // by method
    double total_ms = 0.0;
};

// JSON

inline void to_json(nlohmann::json& j, const ConversationTurn& t) {
    j = nlohmann::json{{"id", t.id},
                       {"index", t.index},
                       {"question", t.question},
                       {"completed_question", t.completed_question},
                       {"retrieved", t.retrieved},
                       {"evidences", t.evidences},
                       {"answer", t.answer},
                       {"is_oos", t.is_oos},
                       {"feedback", t.feedback ? nlohmann::json(to_string(*t.feedback)) : nlohmann::json(nullptr)},
                       {"trace_ref", t.trace_ref},
                       {"attribution_refs", t.attribution_refs},
                       {"config_version", t.config_version},
                       {"created_at", t.created_at}};
}

inline void from_json(const nlohmann::json& j, ConversationTurn& t) {
    t.id = j.at("id").get<std::string>();
    t.index = j.at("index").get<int>();
    t.question = j.at("question").get<std::string>();
    t.completed_question = j.at("completed_question").get<std::string>();
    t.retrieved = j.at("retrieved").get<retrieval::RankedList>();
    t.evidences = j.at("evidences").get<std::vector<corpus::ContextualizedEvidence>>();
    t.answer = j.at("answer").get<std::string>();
    t.is_oos = j.at("is_oos").get<bool>();
    t.feedback.reset();
    if (j.contains("feedback") && !j.at("feedback").is_null())
        t.feedback = feedback_from(j.at("feedback").get<std::string>());
    t.trace_ref = j.value("trace_ref", std::string{});
    t.attribution_refs = j.value("attribution_refs", std::map<std::string, std::string>{});
    t.config_version = j.value("config_version", 0);
    t.created_at = j.value("created_at", std::string{});
}

inline void to_json(nlohmann::json& j, const Conversation& c) {
    j = nlohmann::json{{"id", c.id},
                       {"domain", c.domain},
                       {"turns", c.turns},
                       {"deleted", c.deleted},
                       {"created_at", c.created_at}};
}

inline void from_json(const nlohmann::json& j, Conversation& c) {
    c.id = j.at("id").get<std::string>();
    c.domain = j.at("domain").get<std::string>();
    c.turns = j.value("turns", std::vector<ConversationTurn>{});
    c.deleted = j.value("deleted", false);
    c.created_at = j.value("created_at", std::string{});
}

inline void to_json(nlohmann::json& j, const StageRecord& s) {
    j = nlohmann::json{{"system_prompt", s.system_prompt},
                       {"user_prompt", s.user_prompt},
                       {"output", s.output},
                       {"elapsed_ms", s.elapsed_ms},
                       {"called_provider", s.called_provider}};
}

inline void from_json(const nlohmann::json& j, StageRecord& s) {
    s.system_prompt = j.at("system_prompt").get<std::string>();
    s.user_prompt = j.at("user_prompt").get<std::string>();
    s.output = j.at("output").get<std::string>();
    s.elapsed_ms = j.value("elapsed_ms", 0.0);
    s.called_provider = j.value("called_provider", true);
}

inline void to_json(nlohmann::json& j, const TraceRecord& t) {
    j = nlohmann::json{{"turn_id", t.turn_id},
                       {"config_version", t.config_version},
                       {"completion", t.completion ? nlohmann::json(*t.completion) : nlohmann::json(nullptr)},
                       {"retrieval", t.retrieval ? nlohmann::json(*t.retrieval) : nlohmann::json(nullptr)},
                       {"retrieval_ms", t.retrieval_ms},
                       {"answering", t.answering ? nlohmann::json(*t.answering) : nlohmann::json(nullptr)},
                       {"attribution", t.attribution},
                       {"total_ms", t.total_ms}};
}

inline void from_json(const nlohmann::json& j, TraceRecord& t) {
    t.turn_id = j.at("turn_id").get<std::string>();
    t.config_version = j.value("config_version", 0);
    auto opt = [&](const char* key) { return j.contains(key) && !j.at(key).is_null(); };
    if (opt("completion")) t.completion = j.at("completion").get<StageRecord>();
    if (opt("retrieval")) t.retrieval = j.at("retrieval").get<retrieval::RetrievalTrace>();
    t.retrieval_ms = j.value("retrieval_ms", 0.0);
    if (opt("answering")) t.answering = j.at("answering").get<StageRecord>();
    t.attribution = j.value("attribution", std::map<std::string, attribution::AttributionReport>{});
    t.total_ms = j.value("total_ms", 0.0);
}

// Turn orchestration

/// What one turn runs with.
struct TurnContext {
    const retrieval::EvidenceIndex& index;
    const llm::Providers& providers;
    retrieval::RetrievalConfig retrieval{};
    llm::AnswerOptions answer{};
    llm::PromptSet prompts = llm::default_prompts();
    llm::RetryPolicy retry{};
    std::string completion_model;
    int config_version = 0;
};

struct AskResult {
    ConversationTurn turn;
    TraceRecord trace;
};

inline StageRecord stage(const llm::Generation& g) {
    return {g.prompt.system, g.prompt.user, g.output, g.elapsed_ms, g.called_provider};
}

/// Runs completion, retrieval and answering for one question. Retrieval always
/// uses the completed question. The turn is appended to `conv` only when every
/// stage succeeded; any failure propagates and leaves `conv` unchanged.
inline AskResult ask_turn(Conversation& conv, const std::string& question, const TurnContext& ctx) {
    if (text::is_blank(question)) throw PreconditionViolation("question must be nonempty");
    const auto start = std::chrono::steady_clock::now();
    AskResult r;
    auto& turn = r.turn;
    turn.index = static_cast<int>(conv.turns.size());
    turn.id = conv.id + "-t" + std::to_string(turn.index + 1);
    turn.trace_ref = turn.id;
    turn.question = question;
    turn.config_version = ctx.config_version;
    turn.created_at = now_iso8601();
    r.trace.turn_id = turn.id;
    r.trace.config_version = ctx.config_version;

    const auto history = conv.history();
    auto completion = llm::with_retries(ctx.retry, [&] {
        return llm::complete_question(history, question, *ctx.providers.chat, ctx.prompts, ctx.completion_model);
    });
    turn.completed_question = completion.output;
    r.trace.completion = stage(completion);

    const auto t0 = std::chrono::steady_clock::now();
    auto rt = retrieval::retrieve_with_trace(ctx.index, turn.completed_question, ctx.retrieval,
                                             ctx.providers.embedder.get(), ctx.providers.scorer.get(), ctx.retry);
    r.trace.retrieval_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    turn.retrieved = rt.result;
    turn.evidences = ctx.index.resolve(rt.result);
    r.trace.retrieval = std::move(rt);

    auto answer = llm::with_retries(ctx.retry, [&] {
        return llm::generate_answer(turn.completed_question, turn.evidences, *ctx.providers.chat, ctx.answer,
                                    ctx.prompts);
    });
    turn.answer = answer.output;
    turn.is_oos = llm::is_out_of_scope(turn.answer);
    r.trace.answering = stage(answer);
    r.trace.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    conv.turns.push_back(turn);
    return r;
}

/// Best-effort follow-up questions from the last answer and its top evidence
/// pages. Provider failures yield an empty list.
inline std::vector<std::string> suggest_followups(const Conversation& conv, int n, llm::ChatProvider& chat,
                                                  const llm::PromptSet& prompts = llm::default_prompts()) {
    if (conv.turns.empty()) throw PreconditionViolation("no turn to suggest follow-ups for");
    if (n < 1) return {};
    const auto& last = conv.turns.back();
    std::vector<std::string> titles;
    for (const auto& ev : last.evidences) {
        if (titles.size() == 3) break;
        if (!ev.page_title.empty() && std::find(titles.begin(), titles.end(), ev.page_title) == titles.end())
            titles.push_back(ev.page_title);
    }
    try {
        auto prompt = llm::render(prompts.followup, {{"n", std::to_string(n)},
                                                    {"answer", last.answer},
                                                    {"titles", titles.empty() ? "(none)" : text::join(titles, "\n")}});
        llm::ChatRequest req;
        req.template_id = prompts.followup.id;
        req.temperature = 0.0;
        req.system_prompt = prompt.system;
        req.user_prompt = prompt.user;
        std::vector<std::string> out;
        for (const auto& line : text::split_lines(chat.complete(req))) {
            std::string_view s = text::trim(line);
            while (!s.empty() && (std::isdigit(static_cast<unsigned char>(s.front())) || s.front() == '.' ||
                                  s.front() == ')' || s.front() == '-' || s.front() == '*'))
                s.remove_prefix(1);
            s = text::trim(s);
            if (!s.empty()) out.emplace_back(s);
            if (out.size() == static_cast<std::size_t>(n)) break;
        }
        return out;
    } catch (const Error&) {
        return {};
    }
}

/// Sets (or overwrites) the feedback of turn `turn_index`. Deleted conversations accept feedback.
inline ConversationTurn& record_feedback(Conversation& conv, int turn_index, Feedback value) {
    if (turn_index < 0 || static_cast<std::size_t>(turn_index) >= conv.turns.size())
        throw UnknownTurn("conversation " + conv.id + " has no turn " + std::to_string(turn_index));
    auto& t = conv.turns[static_cast<std::size_t>(turn_index)];
    t.feedback = value;
    return t;
}

}  // namespace ragonite::conversation
