#pragma once

#include <chrono>
#include <regex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ragonite/corpus/types.hpp"
#include "ragonite/llm/prompts.hpp"
#include "ragonite/llm/provider.hpp"
#include "ragonite/text.hpp"

namespace ragonite::llm {

struct HistoryTurn {
    std::string question;
    std::string answer;
};

/// One chat call with the prompt that produced it, for traces.
struct Generation {
    std::string output;
    RenderedPrompt prompt;
    double elapsed_ms = 0.0;
    bool called_provider = true;
};

struct AnswerOptions {
    double temperature = 0.7;
    std::string model_id;
    std::optional<std::uint64_t> seed;
    std::size_t max_prompt_tokens = 0;  // 0 = unlimited
};

inline bool is_out_of_scope(std::string_view answer) { return text::trim(answer) == kOutOfScopeAnswer; }

inline std::string render_history(std::span<const HistoryTurn> history) {
    if (history.empty()) return "(no previous turns)";
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto n = std::to_string(i + 1);
        out += "Q" + n + ": " + history[i].question + "\n";
        out += "A" + n + ": " + history[i].answer + "\n";
    }
    out.pop_back();
    return out;
}

inline std::string evidence_header(std::size_t rank) { return "[Evidence " + std::to_string(rank) + "]"; }

/// Evidences in rank order, each as its composed (contextualized) text.
inline std::string render_evidences(std::span<const corpus::ContextualizedEvidence> evidences) {
    std::string out;
    for (std::size_t i = 0; i < evidences.size(); ++i) {
        if (i) out += "\n\n";
        out += evidence_header(i + 1) + "\n" + evidences[i].composed_text;
    }
    return out;
}

/// Rough token estimate used for context-window checks (4 bytes per token).
inline std::size_t estimate_tokens(const RenderedPrompt& p) { return (p.system.size() + p.user.size() + 3) / 4; }

namespace detail {

inline Generation call_chat(ChatProvider& chat, ChatRequest req, RenderedPrompt prompt) {
    req.system_prompt = prompt.system;
    req.user_prompt = prompt.user;
    const auto start = std::chrono::steady_clock::now();
    std::string out = std::string(text::trim(chat.complete(req)));
    const auto end = std::chrono::steady_clock::now();
    if (out.empty()) throw ProviderFailure(chat.name(), req.template_id + ": empty completion");
    return {std::move(out), std::move(prompt),
            std::chrono::duration<double, std::milli>(end - start).count()};
}

}  // namespace detail

/// Rewrites `question` into a standalone question using all prior turns.
inline Generation complete_question(std::span<const HistoryTurn> history, const std::string& question,
                                    ChatProvider& chat, const PromptSet& prompts = default_prompts(),
                                    const std::string& model_id = {}) {
    if (text::is_blank(question)) throw PreconditionViolation("question must be nonempty");
    auto prompt = render(prompts.rephrase, {{"history", render_history(history)}, {"question", question}});
    ChatRequest req;
    req.template_id = prompts.rephrase.id;
    req.temperature = 0.0;
    req.model_id = model_id;
    return detail::call_chat(chat, std::move(req), std::move(prompt));
}

/// Answers from the given evidences. An empty evidence list short-circuits to the
/// out-of-scope sentence without a provider call.
inline Generation generate_answer(const std::string& completed_question,
                                  std::span<const corpus::ContextualizedEvidence> evidences,
                                  ChatProvider& chat, const AnswerOptions& opt = {},
                                  const PromptSet& prompts = default_prompts()) {
    auto prompt = render(prompts.answer, {{"evidences", render_evidences(evidences)},
                                          {"question", completed_question}});
    if (evidences.empty()) return {std::string(kOutOfScopeAnswer), std::move(prompt), 0.0, false};
    if (opt.max_prompt_tokens && estimate_tokens(prompt) > opt.max_prompt_tokens) {
        std::size_t fit = 0;
        while (fit < evidences.size()) {
            auto partial = render(prompts.answer, {{"evidences", render_evidences(evidences.first(fit + 1))},
                                                   {"question", completed_question}});
            if (estimate_tokens(partial) > opt.max_prompt_tokens) break;
            ++fit;
        }
        throw ContextOverflow(fit);
    }
    ChatRequest req;
    req.template_id = prompts.answer.id;
    req.temperature = opt.temperature;
    req.model_id = opt.model_id;
    req.seed = opt.seed;
    return detail::call_chat(chat, std::move(req), std::move(prompt));
}

/// Maps a judge reply to 0, 0.5 or 1.
inline double parse_verdict(std::string_view reply) {
    static const std::regex scored(R"(score\s*[:=]\s*(1(?:\.0+)?|0?\.5|0(?:\.0+)?)(?![\d.]))", std::regex::icase);
    static const std::regex bare(R"(^\s*(1(?:\.0+)?|0?\.5|0(?:\.0+)?)\s*$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(reply.begin(), reply.end(), m, scored) &&
        !std::regex_match(reply.begin(), reply.end(), m, bare))
        throw UnparseableVerdict(std::string(reply));
    const double v = std::stod(m[1].str());
    if (v == 1.0) return 1.0;
    if (v == 0.5) return 0.5;
    return 0.0;
}

struct Verdict {
    double score = 0.0;
    Generation generation;
};

inline Verdict judge_answer(const std::string& completed_question, const std::string& gold_answer,
                            const std::string& generated_answer, ChatProvider& chat,
                            const PromptSet& prompts = default_prompts(), const std::string& model_id = {}) {
    if (text::is_blank(completed_question) || text::is_blank(gold_answer) || text::is_blank(generated_answer))
        throw PreconditionViolation("judge inputs must be nonempty");
    auto prompt = render(prompts.judge, {{"question", completed_question},
                                         {"gold_answer", gold_answer},
                                         {"generated_answer", generated_answer}});
    ChatRequest req;
    req.template_id = prompts.judge.id;
    req.temperature = 0.0;
    req.model_id = model_id;
    auto gen = detail::call_chat(chat, std::move(req), std::move(prompt));
    return {parse_verdict(gen.output), std::move(gen)};
}

/// Embeds `texts` in one provider call and L2-normalizes the result.
inline std::vector<Vector> embed_texts(std::span<const std::string> texts, EmbeddingProvider& embedder) {
    for (const auto& t : texts)
        if (t.empty()) throw PreconditionViolation("cannot embed an empty text");
    if (texts.empty()) return {};
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size())
        throw ProviderFailure(embedder.model_id(), "returned " + std::to_string(vectors.size()) +
                                                       " vectors for " + std::to_string(texts.size()) + " texts");
    for (auto& v : vectors) {
        if (v.size() != embedder.dimension()) throw DimensionMismatch(embedder.dimension(), v.size());
        normalize(v);
    }
    return vectors;
}

inline Vector embed_text(const std::string& t, EmbeddingProvider& embedder) {
    return embed_texts(std::span<const std::string>(&t, 1), embedder).front();
}

}  // namespace ragonite::llm
