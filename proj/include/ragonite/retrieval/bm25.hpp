#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragonite/retrieval/ranked_list.hpp"
#include "ragonite/text.hpp"

namespace ragonite::retrieval {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Inverted index with Okapi BM25 scoring.
///
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays positive for
/// terms present in more than half of the documents. Every query token
/// occurrence contributes, so repeated query terms weigh more.
class Bm25Index {
public:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    explicit Bm25Index(Bm25Params params = {}) : params_(params) {}

    /// Adds a document; returns its dense doc number.
    std::uint32_t add(std::string id, const std::vector<std::string>& tokens) {
        const auto doc = static_cast<std::uint32_t>(ids_.size());
        ids_.push_back(std::move(id));
        lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_length_ += tokens.size();
        std::unordered_map<std::string, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) postings_[term].push_back({doc, count});
        return doc;
    }

    std::size_t size() const noexcept { return ids_.size(); }
    const std::string& id(std::uint32_t doc) const { return ids_.at(doc); }
    std::uint32_t length(std::uint32_t doc) const { return lengths_.at(doc); }
    const Bm25Params& params() const noexcept { return params_; }

    double average_length() const noexcept {
        return ids_.empty() ? 0.0 : static_cast<double>(total_length_) / static_cast<double>(ids_.size());
    }

    std::size_t document_frequency(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? 0 : it->second.size();
    }

    double idf(const std::string& term) const {
        const double n = static_cast<double>(ids_.size());
        const double df = static_cast<double>(document_frequency(term));
        return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    const std::vector<Posting>* postings(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    /// Scores every document matching at least one query token.
    std::vector<std::pair<std::string, double>> score_all(const std::vector<std::string>& query) const {
        std::unordered_map<std::uint32_t, double> acc;
        const double avgdl = average_length();
        for (const auto& term : query) {
            const auto* plist = postings(term);
            if (!plist) continue;
            const double w = idf(term);
            for (const auto& p : *plist) {
                const double tf = p.tf;
                const double norm = params_.k1 * (1.0 - params_.b + params_.b * lengths_[p.doc] / avgdl);
                acc[p.doc] += w * tf * (params_.k1 + 1.0) / (tf + norm);
            }
        }
        std::vector<std::pair<std::string, double>> out;
        out.reserve(acc.size());
        for (const auto& [doc, s] : acc) out.emplace_back(ids_[doc], s);
        return out;
    }

    RankedList search(std::string_view query, std::size_t k) const {
        return make_ranked(score_all(text::tokenize(query)), k, Source::lexical);
    }

private:
    Bm25Params params_;
    std::vector<std::string> ids_;
    std::vector<std::uint32_t> lengths_;
    std::size_t total_length_ = 0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

}  // namespace ragonite::retrieval
