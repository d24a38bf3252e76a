#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/attribution/cfa.hpp"
#include "ragonite/error.hpp"
#include "ragonite/retrieval/index.hpp"
#include "ragonite/retrieval/ranked_list.hpp"
#include "ragonite/text.hpp"

namespace ragonite::evaluation {

struct BenchmarkItem {
    std::string conversation_id;
    int turn = 1;
    std::string language;  // en | de
    std::string question;
    std::string completed_question;
    std::string gold_answer;
    std::vector<std::string> gold_urls;
    std::string complexity;     // simple | complex
    std::string answer_source;  // passage | list | table

    bool operator==(const BenchmarkItem&) const = default;
};

inline void to_json(nlohmann::json& j, const BenchmarkItem& b) {
    j = nlohmann::json{{"conversation_id", b.conversation_id},
                       {"turn", b.turn},
                       {"language", b.language},
                       {"question", b.question},
                       {"completed_question", b.completed_question},
                       {"gold_answer", b.gold_answer},
                       {"gold_urls", b.gold_urls},
                       {"complexity", b.complexity},
                       {"answer_source", b.answer_source}};
}

namespace detail {

inline std::string required_string(const nlohmann::json& j, const char* field, std::vector<std::string>& problems) {
    if (!j.contains(field)) {
        problems.push_back(std::string("missing field '") + field + "'");
        return {};
    }
    if (!j.at(field).is_string() || text::is_blank(j.at(field).get<std::string>())) {
        problems.push_back(std::string("field '") + field + "' must be a nonempty string");
        return {};
    }
    return j.at(field).get<std::string>();
}

inline void check_enum(const std::string& value, const char* field, std::initializer_list<const char*> allowed,
                       std::vector<std::string>& problems) {
    if (value.empty()) return;
    for (const char* a : allowed)
        if (value == a) return;
    problems.push_back(std::string("field '") + field + "' has invalid value '" + value + "'");
}

}  // namespace detail

/// Parses one JSONL benchmark. Every problem is reported with its line number
/// in a single SchemaViolation. Items come back ordered by (conversation_id, turn).
inline std::vector<BenchmarkItem> parse_benchmark(std::istream& in, const std::string& name = "benchmark") {
    std::vector<BenchmarkItem> items;
    std::vector<std::string> errors;
    std::map<std::pair<std::string, int>, std::size_t> seen;  // -> line
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        const auto where = name + ":" + std::to_string(lineno) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            errors.push_back(where + "invalid JSON: " + e.what());
            continue;
        }
        if (!j.is_object()) {
            errors.push_back(where + "expected a JSON object");
            continue;
        }
        std::vector<std::string> problems;
        BenchmarkItem b;
        b.conversation_id = detail::required_string(j, "conversation_id", problems);
        if (!j.contains("turn")) {
            problems.push_back("missing field 'turn'");
        } else if (!j.at("turn").is_number_integer() || j.at("turn").get<int>() < 1) {
            problems.push_back("field 'turn' must be an integer >= 1");
        } else {
            b.turn = j.at("turn").get<int>();
        }
        b.language = detail::required_string(j, "language", problems);
        b.question = detail::required_string(j, "question", problems);
        b.completed_question = detail::required_string(j, "completed_question", problems);
        b.gold_answer = detail::required_string(j, "gold_answer", problems);
        if (!j.contains("gold_urls")) {
            problems.push_back("missing field 'gold_urls'");
        } else if (!j.at("gold_urls").is_array() || j.at("gold_urls").empty()) {
            problems.push_back("field 'gold_urls' must be a nonempty list of URLs");
        } else {
            for (const auto& u : j.at("gold_urls")) {
                if (!u.is_string() || text::is_blank(u.get<std::string>())) {
                    problems.push_back("field 'gold_urls' must contain nonempty strings");
                    break;
                }
                b.gold_urls.push_back(u.get<std::string>());
            }
        }
        b.complexity = detail::required_string(j, "complexity", problems);
        b.answer_source = detail::required_string(j, "answer_source", problems);
        detail::check_enum(b.language, "language", {"en", "de"}, problems);
        detail::check_enum(b.complexity, "complexity", {"simple", "complex"}, problems);
        detail::check_enum(b.answer_source, "answer_source", {"passage", "list", "table"}, problems);
        if (problems.empty()) {
            const auto key = std::make_pair(b.conversation_id, b.turn);
            if (auto it = seen.find(key); it != seen.end()) {
                problems.push_back("duplicate (conversation_id, turn) = (" + b.conversation_id + ", " +
                                   std::to_string(b.turn) + "), first seen on line " + std::to_string(it->second));
            } else {
                seen.emplace(key, lineno);
            }
        }
        for (const auto& p : problems) errors.push_back(where + p);
        if (problems.empty()) items.push_back(std::move(b));
    }

    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return std::tie(a.conversation_id, a.turn) < std::tie(b.conversation_id, b.turn);
    });
    // Turns must run 1..n within each conversation.
    for (std::size_t i = 0; i < items.size(); ++i) {
        const bool first = i == 0 || items[i - 1].conversation_id != items[i].conversation_id;
        const int expected = first ? 1 : items[i - 1].turn + 1;
        if (items[i].turn != expected)
            errors.push_back(name + ": conversation " + items[i].conversation_id + " skips from turn " +
                             std::to_string(expected - 1) + " to turn " + std::to_string(items[i].turn));
    }
    if (!errors.empty()) throw SchemaViolation(text::join(errors, "\n"));
    return items;
}

inline std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw NotFound("benchmark file " + file.string());
    return parse_benchmark(in, file.filename().string());
}

/// 1 if any of the top-k retrieved evidences comes from a gold URL.
inline int precision_at_k(const retrieval::RankedList& retrieved, const retrieval::EvidenceIndex& index,
                          const std::vector<std::string>& gold_urls, std::size_t k) {
    if (k == 0) throw PreconditionViolation("k must be at least 1");
    for (std::size_t i = 0; i < std::min(k, retrieved.size()); ++i) {
        const auto& url = index.evidence(retrieved.entries[i].evidence_id).evidence.doc_url;
        if (std::find(gold_urls.begin(), gold_urls.end(), url) != gold_urls.end()) return 1;
    }
    return 0;
}

/// Evidence with the highest attributed probability; ties (members of one
/// cluster, or equally likely clusters) go to the best retrieval rank.
inline std::string top_attributed_evidence(const attribution::AttributionReport& report,
                                           const retrieval::RankedList& retrieved) {
    if (report.distribution.empty()) throw PreconditionViolation("empty attribution report");
    double best = -1.0;
    for (const auto& [id, p] : report.distribution) best = std::max(best, p);
    std::set<std::string> top;
    for (const auto& [id, p] : report.distribution)
        if (p >= best - 1e-12) top.insert(id);
    for (const auto& e : retrieved.entries)
        if (top.contains(e.evidence_id)) return e.evidence_id;
    return *top.begin();
}

/// 1 if the top attributed evidence comes from a gold URL.
inline int attribution_accuracy(const attribution::AttributionReport& report, const retrieval::RankedList& retrieved,
                                const retrieval::EvidenceIndex& index, const std::vector<std::string>& gold_urls) {
    const auto& url = index.evidence(top_attributed_evidence(report, retrieved)).evidence.doc_url;
    return std::find(gold_urls.begin(), gold_urls.end(), url) != gold_urls.end() ? 1 : 0;
}

inline std::string turn_bucket(int turn) { return turn <= 5 ? std::to_string(turn) : "6-10"; }

}  // namespace ragonite::evaluation
