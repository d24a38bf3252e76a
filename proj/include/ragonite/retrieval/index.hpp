#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/corpus/pool.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/llm/gateway.hpp"
#include "ragonite/llm/provider.hpp"
#include "ragonite/retrieval/bm25.hpp"
#include "ragonite/retrieval/ranked_list.hpp"

namespace ragonite::retrieval {

/// Lexical and dense views over one evidence pool. Immutable once built;
/// concurrent searches are safe.
class EvidenceIndex {
public:
    EvidenceIndex() = default;

    /// Takes ownership of the pool and its precomputed vectors (one per evidence, same order).
    EvidenceIndex(std::vector<corpus::ContextualizedEvidence> pool, std::vector<llm::Vector> vectors,
                  std::string embedding_model = {}, Bm25Params bm25 = {})
        : lexical_(bm25), embedding_model_(std::move(embedding_model)) {
        if (pool.size() != vectors.size())
            throw PreconditionViolation("index needs one vector per evidence (" + std::to_string(pool.size()) +
                                        " evidences, " + std::to_string(vectors.size()) + " vectors)");
        dim_ = vectors.empty() ? 0 : vectors.front().size();
        for (std::size_t i = 0; i < pool.size(); ++i) {
            auto& v = vectors[i];
            if (v.size() != dim_) throw DimensionMismatch(dim_, v.size());
            llm::normalize(v);
            const auto& id = pool[i].evidence.id;
            if (!position_.emplace(id, i).second) throw PreconditionViolation("duplicate evidence id " + id);
            lexical_.add(id, text::tokenize(pool[i].composed_text));
        }
        pool_ = std::move(pool);
        vectors_ = std::move(vectors);
    }

    std::size_t size() const noexcept { return pool_.size(); }
    std::size_t dimension() const noexcept { return dim_; }
    const std::string& embedding_model() const noexcept { return embedding_model_; }
    const Bm25Index& lexical() const noexcept { return lexical_; }
    const std::vector<corpus::ContextualizedEvidence>& pool() const noexcept { return pool_; }
    const std::vector<llm::Vector>& vectors() const noexcept { return vectors_; }

    bool contains(const std::string& id) const { return position_.contains(id); }

    const corpus::ContextualizedEvidence& evidence(const std::string& id) const {
        auto it = position_.find(id);
        if (it == position_.end()) throw NotFound("evidence " + id);
        return pool_[it->second];
    }

    const llm::Vector& vector(const std::string& id) const {
        auto it = position_.find(id);
        if (it == position_.end()) throw NotFound("evidence " + id);
        return vectors_[it->second];
    }

    /// Resolves a ranked list into its evidences, in rank order.
    std::vector<corpus::ContextualizedEvidence> resolve(const RankedList& list) const {
        std::vector<corpus::ContextualizedEvidence> out;
        out.reserve(list.size());
        for (const auto& e : list.entries) out.push_back(evidence(e.evidence_id));
        return out;
    }

private:
    std::vector<corpus::ContextualizedEvidence> pool_;
    std::vector<llm::Vector> vectors_;
    std::unordered_map<std::string, std::size_t> position_;
    Bm25Index lexical_;
    std::size_t dim_ = 0;
    std::string embedding_model_;
};

struct IndexBuildOptions {
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 8;
    llm::RetryPolicy retry{};
};

/// Embeds every composed_text (in batches, a bounded number in flight) and builds the index.
inline EvidenceIndex index_pool(std::vector<corpus::ContextualizedEvidence> pool, llm::EmbeddingProvider& embedder,
                                const IndexBuildOptions& opt = {}) {
    if (pool.empty()) throw PreconditionViolation("cannot index an empty evidence pool");
    const std::size_t batch = std::max<std::size_t>(1, opt.batch_size);
    std::vector<std::string> texts;
    texts.reserve(pool.size());
    for (const auto& ev : pool) {
        if (ev.composed_text.empty()) throw PreconditionViolation("evidence " + ev.evidence.id + " has no text");
        texts.push_back(ev.composed_text);
    }

    llm::ConcurrencyLimit limit(opt.max_in_flight);
    std::vector<std::future<std::vector<llm::Vector>>> jobs;
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        const std::span<const std::string> chunk(texts.data() + start, std::min(batch, texts.size() - start));
        jobs.push_back(std::async(std::launch::async, [&, chunk] {
            auto slot = limit.acquire_slot();
            return llm::with_retries(opt.retry, [&] { return llm::embed_texts(chunk, embedder); });
        }));
    }
    std::vector<llm::Vector> vectors;
    vectors.reserve(texts.size());
    std::exception_ptr first_error;
    for (auto& job : jobs) {
        try {
            for (auto& v : job.get()) vectors.push_back(std::move(v));
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    for (const auto& v : vectors)
        if (v.size() != embedder.dimension()) throw DimensionMismatch(embedder.dimension(), v.size());
    return EvidenceIndex(std::move(pool), std::move(vectors), embedder.model_id());
}

inline RankedList lexical_search(const EvidenceIndex& index, std::string_view query, std::size_t k) {
    if (k == 0) throw PreconditionViolation("k must be at least 1");
    return index.lexical().search(query, k);
}

/// Exact cosine search against a precomputed unit query vector.
inline RankedList dense_search(const EvidenceIndex& index, const llm::Vector& query_vector, std::size_t k) {
    if (k == 0) throw PreconditionViolation("k must be at least 1");
    if (index.size() && query_vector.size() != index.dimension())
        throw DimensionMismatch(index.dimension(), query_vector.size());
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(index.size());
    const auto& pool = index.pool();
    const auto& vectors = index.vectors();
    for (std::size_t i = 0; i < pool.size(); ++i) scored.emplace_back(pool[i].evidence.id, llm::dot(query_vector, vectors[i]));
    return make_ranked(std::move(scored), k, Source::dense);
}

inline RankedList dense_search(const EvidenceIndex& index, const std::string& query, std::size_t k,
                               llm::EmbeddingProvider& embedder) {
    if (embedder.dimension() != index.dimension()) throw DimensionMismatch(index.dimension(), embedder.dimension());
    return dense_search(index, llm::embed_text(query, embedder), k);
}

// Persistence: <dir>/pool.jsonl and <dir>/vectors.jsonl ({"id", "vector"} per line),
// plus <dir>/index.json with the embedding model and dimension.

inline void save_index(const EvidenceIndex& index, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "pool.jsonl", std::ios::binary);
        corpus::write_pool_jsonl(out, index.pool());
    }
    {
        std::ofstream out(dir / "vectors.jsonl", std::ios::binary);
        const auto& pool = index.pool();
        for (std::size_t i = 0; i < pool.size(); ++i)
            out << nlohmann::json{{"id", pool[i].evidence.id}, {"vector", index.vectors()[i]}}.dump() << '\n';
    }
    std::ofstream meta(dir / "index.json", std::ios::binary);
    meta << nlohmann::json{{"embedding_model", index.embedding_model()},
                           {"dimension", index.dimension()},
                           {"size", index.size()}}
                .dump(2)
         << '\n';
}

inline EvidenceIndex load_index(const std::filesystem::path& dir) {
    std::ifstream pool_in(dir / "pool.jsonl", std::ios::binary);
    std::ifstream vec_in(dir / "vectors.jsonl", std::ios::binary);
    std::ifstream meta_in(dir / "index.json", std::ios::binary);
    if (!pool_in || !vec_in || !meta_in) throw NotFound("no saved index in " + dir.string());
    auto pool = corpus::read_pool_jsonl(pool_in);
    const auto meta = nlohmann::json::parse(meta_in);

    std::map<std::string, llm::Vector> by_id;
    std::string line;
    while (std::getline(vec_in, line)) {
        if (text::is_blank(line)) continue;
        const auto j = nlohmann::json::parse(line);
        by_id[j.at("id").get<std::string>()] = j.at("vector").get<llm::Vector>();
    }
    std::vector<llm::Vector> vectors;
    vectors.reserve(pool.size());
    for (const auto& ev : pool) {
        auto it = by_id.find(ev.evidence.id);
        if (it == by_id.end()) throw Error("vectors.jsonl lacks a vector for " + ev.evidence.id);
        vectors.push_back(std::move(it->second));
    }
    EvidenceIndex index(std::move(pool), std::move(vectors), meta.value("embedding_model", std::string{}));
    if (index.size() && index.dimension() != meta.value("dimension", index.dimension()))
        throw DimensionMismatch(meta.at("dimension").get<std::size_t>(), index.dimension());
    return index;
}

}  // namespace ragonite::retrieval
