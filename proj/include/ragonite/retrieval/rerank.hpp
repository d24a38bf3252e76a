#pragma once

#include <string>
#include <vector>

#include "ragonite/llm/provider.hpp"
#include "ragonite/retrieval/index.hpp"
#include "ragonite/retrieval/ranked_list.hpp"
#include "ragonite/retrieval/rrf.hpp"

namespace ragonite::retrieval {

enum class RerankMode { none, model_rrf };

inline std::string_view to_string(RerankMode m) { return m == RerankMode::none ? "none" : "model_rrf"; }

inline RerankMode rerank_mode_from(std::string_view s) {
    if (s == "none") return RerankMode::none;
    if (s == "model_rrf") return RerankMode::model_rrf;
    throw InvalidConfig("unknown rerank mode: " + std::string(s));
}

/// Ranks (id, score) pairs by score with competition ranks: equal scores share
/// the best rank, so a constant scorer gives every candidate rank 1.
inline RankedList competition_ranking(std::vector<std::pair<std::string, double>> scored, Source source) {
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    RankedList out;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        int rank = static_cast<int>(i + 1);
        if (i && scored[i].second == scored[i - 1].second) rank = out.entries.back().rank;
        out.entries.push_back({scored[i].first, rank, scored[i].second, source});
    }
    return out;
}

/// Scores each candidate's composed text with the relevance model and fuses that
/// ranking with the incoming one by a second RRF pass. A scorer failure returns
/// the candidates unchanged with a warning.
inline RankedList rerank_candidates(const std::string& query, const RankedList& candidates, const EvidenceIndex& index,
                                    llm::RelevanceScorer& scorer, int rrf_k = kDefaultRrfK,
                                    RerankMode mode = RerankMode::model_rrf) {
    if (mode == RerankMode::none || candidates.empty()) return candidates;
    std::vector<std::string> docs;
    docs.reserve(candidates.size());
    for (const auto& e : candidates.entries) docs.push_back(index.evidence(e.evidence_id).composed_text);
    std::vector<double> scores;
    try {
        scores = scorer.score(query, docs);
        if (scores.size() != docs.size())
            throw ProviderFailure(scorer.model_id(), "returned " + std::to_string(scores.size()) + " scores for " +
                                                         std::to_string(docs.size()) + " candidates");
    } catch (const ProviderFailure& e) {
        RankedList out = candidates;
        out.warnings.push_back(std::string("rerank skipped: ") + e.what());
        return out;
    }
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) scored.emplace_back(candidates.entries[i].evidence_id, scores[i]);
    const RankedList model = competition_ranking(std::move(scored), Source::reranked);
    return rrf_fuse({model, candidates}, rrf_k, Source::reranked);
}

}  // namespace ragonite::retrieval
