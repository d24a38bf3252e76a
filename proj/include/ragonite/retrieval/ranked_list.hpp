#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/error.hpp"

namespace ragonite::retrieval {

enum class Source { lexical, dense, fused, reranked };

inline std::string_view to_string(Source s) {
    switch (s) {
        case Source::lexical: return "lexical";
        case Source::dense: return "dense";
        case Source::fused: return "fused";
        case Source::reranked: return "reranked";
    }
    return "fused";
}

inline Source source_from(std::string_view s) {
    if (s == "lexical") return Source::lexical;
    if (s == "dense") return Source::dense;
    if (s == "fused") return Source::fused;
    if (s == "reranked") return Source::reranked;
    throw Error("unknown ranking source: " + std::string(s));
}

struct RankedEntry {
    std::string evidence_id;
    int rank = 0;  // 1-based
    double score = 0.0;
    Source source = Source::fused;

    bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
    std::vector<RankedEntry> entries;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(e.evidence_id);
        return out;
    }

    bool operator==(const RankedList&) const = default;
};

/// Orders (id, score) pairs by score descending, ties by id ascending, and
/// keeps the first `k`. Ranks are assigned 1..n.
inline RankedList make_ranked(std::vector<std::pair<std::string, double>> scored, std::size_t k,
                              Source source) {
    auto better = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    RankedList out;
    out.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.entries.push_back({std::move(scored[i].first), static_cast<int>(i + 1), scored[i].second, source});
    return out;
}

/// Checks the list invariants: ranks 1..n without gaps and non-increasing scores.
inline bool is_valid(const RankedList& list) {
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
        if (list.entries[i].rank != static_cast<int>(i + 1)) return false;
        if (i && list.entries[i].score > list.entries[i - 1].score) return false;
    }
    return true;
}

inline void to_json(nlohmann::json& j, const RankedEntry& e) {
    j = nlohmann::json{{"evidence_id", e.evidence_id},
                       {"rank", e.rank},
                       {"score", e.score},
                       {"source", to_string(e.source)}};
}

inline void from_json(const nlohmann::json& j, RankedEntry& e) {
    e.evidence_id = j.at("evidence_id").get<std::string>();
    e.rank = j.at("rank").get<int>();
    e.score = j.at("score").get<double>();
    e.source = source_from(j.at("source").get<std::string>());
}

inline void to_json(nlohmann::json& j, const RankedList& l) {
    j = nlohmann::json{{"entries", l.entries}, {"warnings", l.warnings}};
}

inline void from_json(const nlohmann::json& j, RankedList& l) {
    l.entries = j.at("entries").get<std::vector<RankedEntry>>();
    l.warnings = j.value("warnings", std::vector<std::string>{});
}

}  // namespace ragonite::retrieval
