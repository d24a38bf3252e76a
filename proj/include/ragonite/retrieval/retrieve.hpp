#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "ragonite/llm/provider.hpp"
#include "ragonite/retrieval/index.hpp"
#include "ragonite/retrieval/rerank.hpp"
#include "ragonite/retrieval/rrf.hpp"

namespace ragonite::retrieval {

enum class RankingMode { lexical, dense, hybrid };

inline std::string_view to_string(RankingMode m) {
    switch (m) {
        case RankingMode::lexical: return "lexical";
        case RankingMode::dense: return "dense";
        case RankingMode::hybrid: return "hybrid";
    }
    return "hybrid";
}

inline RankingMode ranking_mode_from(std::string_view s) {
    if (s == "lexical") return RankingMode::lexical;
    if (s == "dense") return RankingMode::dense;
    if (s == "hybrid") return RankingMode::hybrid;
    throw InvalidConfig("unknown ranking mode: " + std::string(s));
}

struct RetrievalConfig {
    int k = 10;
    RankingMode mode = RankingMode::hybrid;
    RerankMode rerank = RerankMode::none;
    int rrf_k = kDefaultRrfK;
    int candidates_per_source = 10;  // depth taken from each source before fusion

    void validate() const {
        if (k < 1) throw InvalidConfig("k must be at least 1");
        if (rrf_k < 0) throw InvalidConfig("rrf_k must be non-negative");
        if (candidates_per_source < 1) throw InvalidConfig("candidates_per_source must be at least 1");
    }
    bool operator==(const RetrievalConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const RetrievalConfig& c) {
    j = nlohmann::json{{"k", c.k},
                       {"mode", to_string(c.mode)},
                       {"rerank", to_string(c.rerank)},
                       {"rrf_k", c.rrf_k},
                       {"candidates_per_source", c.candidates_per_source}};
}

inline void from_json(const nlohmann::json& j, RetrievalConfig& c) {
    RetrievalConfig d;
    c.k = j.value("k", d.k);
    c.mode = ranking_mode_from(j.value("mode", std::string(to_string(d.mode))));
    c.rerank = rerank_mode_from(j.value("rerank", std::string(to_string(d.rerank))));
    c.rrf_k = j.value("rrf_k", d.rrf_k);
    c.candidates_per_source = j.value("candidates_per_source", d.candidates_per_source);
}

/// Every intermediate list of one retrieval, for turn traces.
struct RetrievalTrace {
    std::string query;
    RankedList lexical;
    RankedList dense;
    RankedList fused;
    RankedList reranked;
    RankedList result;
};

inline void to_json(nlohmann::json& j, const RetrievalTrace& t) {
    j = nlohmann::json{{"query", t.query},     {"lexical", t.lexical},   {"dense", t.dense},
                       {"fused", t.fused},     {"reranked", t.reranked}, {"result", t.result}};
}

inline void from_json(const nlohmann::json& j, RetrievalTrace& t) {
    t.query = j.at("query").get<std::string>();
    t.lexical = j.at("lexical").get<RankedList>();
    t.dense = j.at("dense").get<RankedList>();
    t.fused = j.at("fused").get<RankedList>();
    t.reranked = j.at("reranked").get<RankedList>();
    t.result = j.at("result").get<RankedList>();
}

namespace detail {

inline RankedList truncate(RankedList list, std::size_t k) {
    if (list.entries.size() > k) list.entries.resize(k);
    return list;
}

}  // namespace detail

/// Lexical and dense modes return that source's top k. Hybrid fuses the top
/// `candidates_per_source` of each source by RRF, optionally reranks, and keeps k.
/// Reranking applies to hybrid retrieval only.
inline RetrievalTrace retrieve_with_trace(const EvidenceIndex& index, const std::string& query,
                                          const RetrievalConfig& cfg, llm::EmbeddingProvider* embedder,
                                          llm::RelevanceScorer* scorer = nullptr, const llm::RetryPolicy& retry = {}) {
    cfg.validate();
    RetrievalTrace t;
    t.query = query;
    const auto k = static_cast<std::size_t>(cfg.k);
    if (index.size() == 0) return t;  // nothing indexed: every list stays empty
    auto dense = [&](std::size_t depth) {
        if (!embedder) throw InvalidConfig("dense retrieval needs an embedding provider");
        if (embedder->dimension() != index.dimension()) throw DimensionMismatch(index.dimension(), embedder->dimension());
        const auto qv = llm::with_retries(retry, [&] { return llm::embed_text(query, *embedder); });
        return dense_search(index, qv, depth);
    };
    switch (cfg.mode) {
        case RankingMode::lexical:
            t.lexical = lexical_search(index, query, k);
            t.result = t.lexical;
            break;
        case RankingMode::dense:
            t.dense = dense(k);
            t.result = t.dense;
            break;
        case RankingMode::hybrid: {
            const auto depth = static_cast<std::size_t>(cfg.candidates_per_source);
            t.lexical = lexical_search(index, query, depth);
            t.dense = dense(depth);
            t.fused = rrf_fuse({t.lexical, t.dense}, cfg.rrf_k);
            if (cfg.rerank == RerankMode::model_rrf && !t.fused.empty()) {
                if (!scorer) throw InvalidConfig("model_rrf reranking needs a relevance scorer");
                t.reranked = rerank_candidates(query, t.fused, index, *scorer, cfg.rrf_k, cfg.rerank);
                t.result = detail::truncate(t.reranked, k);
            } else {
                t.result = detail::truncate(t.fused, k);
            }
            break;
        }
    }
    return t;
}

inline RankedList retrieve(const EvidenceIndex& index, const std::string& query, const RetrievalConfig& cfg,
                           llm::EmbeddingProvider* embedder, llm::RelevanceScorer* scorer = nullptr) {
    return retrieve_with_trace(index, query, cfg, embedder, scorer).result;
}

}  // namespace ragonite::retrieval
