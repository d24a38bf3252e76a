#pragma once

// Deterministic offline providers. Each output is a pure function of the
// template id, the rendered prompt and the seed, so end-to-end runs are
// reproducible without a network.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <regex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragonite/llm/prompts.hpp"
#include "ragonite/llm/provider.hpp"
#include "ragonite/text.hpp"

namespace ragonite::llm::mock {

inline const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a", "an", "the", "and", "or", "of", "in", "on", "at", "to", "for", "by", "with", "from",
        "is", "are", "was", "were", "be", "been", "it", "its", "this", "that", "these", "those",
        "what", "which", "who", "whom", "whose", "when", "where", "why", "how", "do", "does", "did",
        "i", "we", "you", "he", "she", "they", "them", "his", "her", "their", "our", "my", "me",
        "there", "here", "as", "about", "into", "than", "then", "so", "if", "not", "no", "can",
        "could", "should", "would", "will", "shall", "may", "might", "has", "have", "had", "also",
        "any", "all", "some", "more", "most", "other", "such", "only", "own", "same", "too", "very",
        "tell", "please", "give", "list", "show", "s",
        "der", "die", "das", "und", "oder", "ist", "sind", "war", "ein", "eine", "einen", "im", "in",
        "mit", "von", "zu", "für", "auf", "wer", "was", "wie", "wann", "wo", "welche", "welcher",
        "es", "sie", "er", "den", "dem", "des"};
    return words;
}

inline std::vector<std::string> content_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : text::tokenize(s))
        if (!stopwords().contains(t)) out.push_back(std::move(t));
    return out;
}

/// Text following `heading` up to the next known section heading.
inline std::string section_text(const std::string& prompt, std::string_view heading) {
    static const std::vector<std::string_view> all = {
        section::history,  section::current_question, section::rewritten,       section::evidences,
        section::question, section::answer,           section::gold_answer,     section::generated_answer,
        section::verdict,  section::last_answer,      section::pages,           section::suggestions};
    const std::string needle = std::string(heading) + "\n";
    auto start = prompt.find(needle);
    if (start == std::string::npos) return {};
    start += needle.size();
    std::size_t end = prompt.size();
    for (auto h : all) {
        const std::string marker = "\n" + std::string(h) + "\n";
        const auto pos = prompt.find(marker, start - 1);
        if (pos != std::string::npos && pos + 1 >= start && pos < end) end = pos;
    }
    return std::string(text::trim(std::string_view(prompt).substr(start, end - start)));
}

/// Marker syntax understood by the mock answerer: `ANSWER:=value`, where `_`
/// stands for a space and `a||b` lists alternatives sampled when temperature > 0.
inline std::vector<std::string> find_markers(const std::string& block) {
    static const std::regex marker(R"(ANSWER:=(\S+))");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(block.begin(), block.end(), marker); it != std::sregex_iterator(); ++it) {
        std::string v = (*it)[1].str();
        while (!v.empty() && std::string_view(".,;:!?)").find(v.back()) != std::string_view::npos) v.pop_back();
        if (!v.empty()) out.push_back(std::move(v));
    }
    return out;
}

inline std::vector<std::string> split_evidence_blocks(const std::string& evidences) {
    static const std::regex header(R"(^\[Evidence \d+\]$)");
    std::vector<std::string> blocks;
    for (const auto& line : text::split_lines(evidences)) {
        if (std::regex_match(line, header)) {
            blocks.emplace_back();
            continue;
        }
        if (!blocks.empty()) blocks.back() += line + "\n";
    }
    return blocks;
}

class MockChat : public ChatProvider {
public:
    explicit MockChat(std::uint64_t seed = 0, std::string name = "mock-chat")
        : seed_(seed), name_(std::move(name)) {}

    std::string complete(const ChatRequest& req) override {
        ++calls_;
        {
            std::lock_guard lock(mu_);
            ++calls_by_template_[req.template_id];
        }
        if (req.template_id == "rephrase") return rephrase(req.user_prompt);
        if (req.template_id == "answer") return answer(req);
        if (req.template_id == "judge") return judge(req.user_prompt);
        if (req.template_id == "followup") return followup(req);
        throw ProviderFailure(name_, "mock has no rule for template '" + req.template_id + "'");
    }

    std::string name() const override { return name_; }

    std::size_t calls() const noexcept { return calls_; }
    std::size_t calls(const std::string& template_id) const {
        std::lock_guard lock(mu_);
        auto it = calls_by_template_.find(template_id);
        return it == calls_by_template_.end() ? 0 : it->second;
    }

    // Rules, public so tests can state expectations in the mock's own terms.

    /// Capitalised or numeric token runs, e.g. "OpenXT 9" from "what changed in OpenXT 9?".
    static std::vector<std::string> entities(const std::string& s) {
        static const std::regex word(R"re([^\s?!,;:()"]+)re");
        std::vector<std::string> runs;
        std::string run;
        bool first = true;
        for (auto it = std::sregex_iterator(s.begin(), s.end(), word); it != std::sregex_iterator(); ++it) {
            std::string w = it->str();
            while (!w.empty() && (w.back() == '.' || w.back() == '\'')) w.pop_back();
            const unsigned char c = w.empty() ? 0 : static_cast<unsigned char>(w[0]);
            const bool lead = std::isupper(c) || std::isdigit(c) || c >= 0x80;
            const bool stop = stopwords().contains(text::ascii_lower(w));
            if (!w.empty() && lead && !(first && stop)) {
                if (!run.empty()) run += ' ';
                run += w;
            } else if (!run.empty()) {
                runs.push_back(run);
                run.clear();
            }
            first = false;
        }
        if (!run.empty()) runs.push_back(run);
        return runs;
    }

    static bool is_anaphor(const std::string& lower) {
        static const std::set<std::string> words = {"it", "its", "this", "that", "they", "them", "their",
                                                    "these", "those", "he", "she", "him", "her", "there",
                                                    "es", "sie", "er", "ihn", "dort"};
        return words.contains(lower);
    }

private:
    std::uint64_t seed_;
    std::string name_;
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mu_;
    std::map<std::string, std::size_t> calls_by_template_;

    std::string rephrase(const std::string& prompt) const {
        const auto history = section_text(prompt, section::history);
        const auto question = section_text(prompt, section::current_question);
        std::vector<std::string> questions;
        for (const auto& line : text::split_lines(history))
            if (line.size() > 1 && line[0] == 'Q') {
                const auto colon = line.find(": ");
                if (colon != std::string::npos) questions.push_back(line.substr(colon + 2));
            }
        std::string entity;
        for (auto it = questions.rbegin(); it != questions.rend() && entity.empty(); ++it) {
            auto ents = entities(*it);
            if (!ents.empty()) entity = ents.back();
        }
        if (entity.empty() || question.find(entity) != std::string::npos) return question;

        // Replace the first anaphoric word, else append the entity.
        static const std::regex word(R"([A-Za-z]+)");
        for (auto it = std::sregex_iterator(question.begin(), question.end(), word); it != std::sregex_iterator(); ++it) {
            if (is_anaphor(text::ascii_lower(it->str()))) {
                return question.substr(0, static_cast<std::size_t>(it->position())) + entity +
                       question.substr(static_cast<std::size_t>(it->position() + it->length()));
            }
        }
        std::string q = question;
        std::string tail;
        while (!q.empty() && (q.back() == '?' || q.back() == '.')) {
            tail.insert(tail.begin(), q.back());
            q.pop_back();
        }
        return q + " for " + entity + tail;
    }

    std::string answer(const ChatRequest& req) const {
        const auto& prompt = req.user_prompt;
        const auto question = content_tokens(section_text(prompt, section::question));
        const std::set<std::string> qset(question.begin(), question.end());
        std::string best;
        long best_overlap = -1;
        for (const auto& block : split_evidence_blocks(section_text(prompt, section::evidences))) {
            const auto markers = find_markers(block);
            if (markers.empty()) continue;
            std::set<std::string> tokens;
            for (auto& t : content_tokens(block)) tokens.insert(std::move(t));
            long overlap = 0;
            for (const auto& q : qset) overlap += tokens.contains(q) ? 1 : 0;
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = markers.front();
            }
        }
        if (best_overlap < 0) return std::string(kOutOfScopeAnswer);

        std::vector<std::string> variants;
        for (std::size_t start = 0;;) {
            const auto bar = best.find("||", start);
            variants.push_back(best.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
            if (bar == std::string::npos) break;
            start = bar + 2;
        }
        std::size_t pick = 0;
        if (req.temperature > 0.0 && variants.size() > 1) {
            std::uint64_t state = text::fnv1a(prompt, text::fnv1a(req.template_id)) ^ seed_ ^
                                  (req.seed ? *req.seed * 0x9e3779b97f4a7c15ull : 0);
            pick = text::splitmix64(state) % variants.size();
        }
        std::string out = variants[pick];
        std::replace(out.begin(), out.end(), '_', ' ');
        return out;
    }

    static std::string normalized(std::string_view s) { return text::join(text::tokenize(s), " "); }

    std::string judge(const std::string& prompt) const {
        const auto gold = section_text(prompt, section::gold_answer);
        const auto generated = section_text(prompt, section::generated_answer);
        if (generated.find(kOutOfScopeAnswer) != std::string::npos) return "Score: 0";
        if (normalized(gold) == normalized(generated)) return "Score: 1";
        const auto keys = content_tokens(gold);
        const auto got = content_tokens(generated);
        const std::set<std::string> have(got.begin(), got.end());
        std::size_t hit = 0;
        for (const auto& k : keys) hit += have.contains(k) ? 1 : 0;
        if (!keys.empty() && hit == keys.size()) return "Score: 1";
        if (hit > 0) return "Score: 0.5";
        return "Score: 0";
    }

    std::string followup(const ChatRequest& req) const {
        static const std::regex count(R"(exactly (\d+) questions)");
        std::smatch m;
        std::size_t n = 3;
        if (std::regex_search(req.system_prompt, m, count)) n = std::stoul(m[1].str());
        const auto last = section_text(req.user_prompt, section::last_answer);
        std::vector<std::string> tokens;
        if (last.find(kOutOfScopeAnswer) == std::string::npos) tokens = content_tokens(last);
        if (tokens.empty()) tokens = content_tokens(section_text(req.user_prompt, section::pages));
        if (tokens.empty()) tokens = {"this topic"};
        std::string out;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& t = tokens[i % tokens.size()];
            static const char* forms[] = {"What else is documented about {}?", "Who is responsible for {}?",
                                          "When was {} last updated?"};
            std::string line = forms[i % 3];
            line.replace(line.find("{}"), 2, t);
            out += line + "\n";
        }
        return out;
    }
};

/// Bag-of-features embedding: every word token and (at half weight) every
/// character trigram of a token maps to a seeded pseudo-random unit vector;
/// the text vector is their normalized sum. Shared words give positive cosine,
/// disjoint texts are near-orthogonal.
class MockEmbedder : public EmbeddingProvider {
public:
    explicit MockEmbedder(std::size_t dim = 128, std::uint64_t seed = 0, std::string model = "mock-embed")
        : dim_(dim), seed_(seed), model_(std::move(model)) {}

    /// Deterministic unit vector for one feature string.
    static Vector hash_to_sphere(std::string_view feature, std::size_t dim, std::uint64_t seed) {
        std::uint64_t state = text::fnv1a(feature) ^ (seed * 0xda942042e4dd58b5ull);
        Vector v(dim);
        for (std::size_t i = 0; i < dim; i += 2) {
            // Box-Muller on two uniforms in (0, 1].
            const double u1 = (static_cast<double>(text::splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
            const double u2 = static_cast<double>(text::splitmix64(state) >> 11) * 0x1.0p-53;
            const double r = std::sqrt(-2.0 * std::log(u1));
            v[i] = r * std::cos(2.0 * std::numbers::pi * u2);
            if (i + 1 < dim) v[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
        }
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        for (auto& x : v) x /= n;
        return v;
    }

    /// (feature, weight) pairs of a text.
    static std::vector<std::pair<std::string, double>> features(std::string_view s) {
        std::vector<std::pair<std::string, double>> out;
        const auto tokens = text::tokenize(s);
        for (const auto& t : tokens) {
            out.emplace_back("w:" + t, 1.0);
            const std::string padded = "^" + t + "$";
            if (padded.size() > 4)
                for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.emplace_back("g:" + padded.substr(i, 3), 0.5);
        }
        if (out.empty()) out.emplace_back("s:" + std::string(s), 1.0);
        return out;
    }

    std::vector<Vector> embed(std::span<const std::string> texts) override {
        ++calls_;
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            Vector v(dim_, 0.0);
            for (const auto& [f, w] : features(t)) {
                const auto& fv = feature(f);
                for (std::size_t i = 0; i < dim_; ++i) v[i] += w * fv[i];
            }
            normalize(v);
            out.push_back(std::move(v));
        }
        return out;
    }

    std::size_t dimension() const override { return dim_; }
    std::string model_id() const override { return model_; }
    std::size_t calls() const noexcept { return calls_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
    std::string model_;
    std::atomic<std::size_t> calls_{0};
    std::mutex mu_;
    std::unordered_map<std::string, Vector> cache_;

    const Vector& feature(const std::string& f) {
        std::lock_guard lock(mu_);
        auto it = cache_.find(f);
        if (it == cache_.end()) it = cache_.emplace(f, hash_to_sphere(f, dim_, seed_)).first;
        return it->second;
    }
};

/// Fraction of distinct query content tokens present in each document.
class MockScorer : public RelevanceScorer {
public:
    std::vector<double> score(const std::string& query, std::span<const std::string> documents) override {
        ++calls_;
        auto q = content_tokens(query);
        const std::set<std::string> qset(q.begin(), q.end());
        std::vector<double> out;
        for (const auto& d : documents) {
            auto toks = text::tokenize(d);
            const std::set<std::string> dset(toks.begin(), toks.end());
            std::size_t hit = 0;
            for (const auto& t : qset) hit += dset.contains(t) ? 1 : 0;
            out.push_back(qset.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(qset.size()));
        }
        return out;
    }
    std::string model_id() const override { return "mock-rerank"; }
    std::size_t calls() const noexcept { return calls_; }

private:
    std::atomic<std::size_t> calls_{0};
};

}  // namespace ragonite::llm::mock
