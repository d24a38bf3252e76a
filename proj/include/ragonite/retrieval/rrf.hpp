#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ragonite/retrieval/ranked_list.hpp"

namespace ragonite::retrieval {

inline constexpr int kDefaultRrfK = 60;

/// Reciprocal rank fusion: score(e) = sum over lists containing e of 1 / (rrf_k + rank).
/// Ranks are taken from the entries as given, so tied ranks fuse as ties.
inline RankedList rrf_fuse(std::span<const RankedList> lists, int rrf_k = kDefaultRrfK,
                           Source source = Source::fused) {
    std::map<std::string, double> scores;
    for (const auto& list : lists)
        for (const auto& e : list.entries) scores[e.evidence_id] += 1.0 / (rrf_k + e.rank);
    std::vector<std::pair<std::string, double>> scored(scores.begin(), scores.end());
    RankedList out = make_ranked(std::move(scored), scores.size(), source);
    for (const auto& list : lists)
        for (const auto& w : list.warnings) out.warnings.push_back(w);
    return out;
}

inline RankedList rrf_fuse(std::initializer_list<RankedList> lists, int rrf_k = kDefaultRrfK,
                           Source source = Source::fused) {
    return rrf_fuse(std::span<const RankedList>(lists.begin(), lists.size()), rrf_k, source);
}

}  // namespace ragonite::retrieval
