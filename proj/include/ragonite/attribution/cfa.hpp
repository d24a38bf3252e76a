#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/attribution/dbscan.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/llm/gateway.hpp"
#include "ragonite/llm/prompts.hpp"
#include "ragonite/llm/provider.hpp"
#include "ragonite/text.hpp"

namespace ragonite::attribution {

enum class Method { cfa, cfa_no_cluster, naive };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::cfa: return "cfa";
        case Method::cfa_no_cluster: return "cfa_no_cluster";
        case Method::naive: return "naive";
    }
    return "cfa";
}

inline Method method_from(std::string_view s) {
    if (s == "cfa") return Method::cfa;
    if (s == "cfa_no_cluster") return Method::cfa_no_cluster;
    if (s == "naive") return Method::naive;
    throw InvalidConfig("unknown attribution method: " + std::string(s));
}

struct CfaConfig {
    double eps = 0.005;
    int min_pts = 2;
    int m = 1;
    double temperature = 0.05;
    int max_parallel = 8;
    double generation_temperature = 0.7;  // sampling temperature of counterfactual answers
    std::uint64_t seed = 0;
    std::string model_id;  // counterfactual chat model, may differ from the main one

    void validate() const {
        if (!(eps > 0.0)) throw InvalidConfig("eps must be positive");
        if (m < 1) throw InvalidConfig("m must be at least 1");
        if (min_pts < 1) throw InvalidConfig("min_pts must be at least 1");
        if (!(temperature > 0.0)) throw InvalidConfig("temperature must be positive");
        if (max_parallel < 1) throw InvalidConfig("max_parallel must be at least 1");
    }
    bool operator==(const CfaConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const CfaConfig& c) {
    j = nlohmann::json{{"eps", c.eps},
                       {"min_pts", c.min_pts},
                       {"m", c.m},
                       {"temperature", c.temperature},
                       {"max_parallel", c.max_parallel},
                       {"generation_temperature", c.generation_temperature},
                       {"seed", c.seed},
                       {"model_id", c.model_id}};
}

inline void from_json(const nlohmann::json& j, CfaConfig& c) {
    CfaConfig d;
    c.eps = j.value("eps", d.eps);
    c.min_pts = j.value("min_pts", d.min_pts);
    c.m = j.value("m", d.m);
    c.temperature = j.value("temperature", d.temperature);
    c.max_parallel = j.value("max_parallel", d.max_parallel);
    c.generation_temperature = j.value("generation_temperature", d.generation_temperature);
    c.seed = j.value("seed", d.seed);
    c.model_id = j.value("model_id", d.model_id);
}

struct EvidenceCluster {
    int id = 0;
    std::vector<std::string> member_ids;  // ascending

    bool operator==(const EvidenceCluster&) const = default;
};

struct ClusterAttribution {
    EvidenceCluster cluster;
    double contribution = 0.0;  // c_i in [0, 1]
    double mean_similarity = 0.0;
    double probability = 0.0;
    std::vector<std::string> counterfactual_answers;
    std::vector<double> similarities;

    bool operator==(const ClusterAttribution&) const = default;
};

struct AttributionReport {
    Method method = Method::cfa;
    std::string question;
    std::string answer;
    std::vector<ClusterAttribution> clusters;
    std::map<std::string, double> distribution;  // evidence id -> probability
    double elapsed_ms = 0.0;

    /// Cluster with the highest probability; ties go to the lower cluster id.
    const ClusterAttribution& top_cluster() const {
        if (clusters.empty()) throw PreconditionViolation("empty attribution report");
        return *std::max_element(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
            return a.probability < b.probability;
        });
    }
};

inline void to_json(nlohmann::json& j, const EvidenceCluster& c) {
    j = nlohmann::json{{"id", c.id}, {"member_ids", c.member_ids}};
}
inline void from_json(const nlohmann::json& j, EvidenceCluster& c) {
    c.id = j.at("id").get<int>();
    c.member_ids = j.at("member_ids").get<std::vector<std::string>>();
}

inline void to_json(nlohmann::json& j, const ClusterAttribution& c) {
    j = nlohmann::json{{"cluster", c.cluster},
                       {"contribution", c.contribution},
                       {"mean_similarity", c.mean_similarity},
                       {"probability", c.probability},
                       {"counterfactual_answers", c.counterfactual_answers},
                       {"similarities", c.similarities}};
}
inline void from_json(const nlohmann::json& j, ClusterAttribution& c) {
    c.cluster = j.at("cluster").get<EvidenceCluster>();
    c.contribution = j.at("contribution").get<double>();
    c.mean_similarity = j.at("mean_similarity").get<double>();
    c.probability = j.at("probability").get<double>();
    c.counterfactual_answers = j.at("counterfactual_answers").get<std::vector<std::string>>();
    c.similarities = j.at("similarities").get<std::vector<double>>();
}

inline void to_json(nlohmann::json& j, const AttributionReport& r) {
    j = nlohmann::json{{"method", to_string(r.method)},
                       {"question", r.question},
                       {"answer", r.answer},
                       {"clusters", r.clusters},
                       {"distribution", r.distribution},
                       {"elapsed_ms", r.elapsed_ms}};
}
inline void from_json(const nlohmann::json& j, AttributionReport& r) {
    r.method = method_from(j.at("method").get<std::string>());
    r.question = j.value("question", std::string{});
    r.answer = j.value("answer", std::string{});
    r.clusters = j.at("clusters").get<std::vector<ClusterAttribution>>();
    r.distribution = j.at("distribution").get<std::map<std::string, double>>();
    r.elapsed_ms = j.value("elapsed_ms", 0.0);
}

/// softmax(x / t), computed stably.
inline std::vector<double> softmax(const std::vector<double>& x, double t = 1.0) {
    if (!(t > 0.0)) throw PreconditionViolation("softmax temperature must be positive");
    if (x.empty()) return {};
    const double hi = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp((x[i] - hi) / t);
    for (auto& v : out) v /= sum;
    return out;
}

/// Groups evidences whose attribution embeddings are near-duplicates.
/// Evidences are visited in id order, so the result does not depend on input order.
inline std::vector<EvidenceCluster> cluster_evidences(const std::vector<corpus::ContextualizedEvidence>& evidences,
                                                      const std::vector<llm::Vector>& embeddings, double eps,
                                                      std::size_t min_pts) {
    if (evidences.size() != embeddings.size())
        throw PreconditionViolation("cluster_evidences needs one embedding per evidence");
    std::vector<std::size_t> order(evidences.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return evidences[a].evidence.id < evidences[b].evidence.id; });
    std::vector<llm::Vector> points;
    points.reserve(order.size());
    for (auto i : order) points.push_back(embeddings[i]);
    std::vector<EvidenceCluster> out;
    for (const auto& members : dbscan(points, eps, min_pts)) {
        EvidenceCluster c{static_cast<int>(out.size()), {}};
        for (auto p : members) c.member_ids.push_back(evidences[order[p]].evidence.id);
        out.push_back(std::move(c));
    }
    return out;
}

/// Answers from the retrieved evidences minus the ablated cluster, using the
/// same prompt as the main answer.
inline llm::Generation counterfactual_answer(const std::string& completed_question,
                                             const std::vector<EvidenceCluster>& clusters, int ablate,
                                             const std::vector<corpus::ContextualizedEvidence>& evidences,
                                             llm::ChatProvider& chat, const llm::AnswerOptions& opt = {},
                                             const llm::PromptSet& prompts = llm::default_prompts()) {
    const auto it = std::find_if(clusters.begin(), clusters.end(), [&](const auto& c) { return c.id == ablate; });
    if (it == clusters.end()) throw PreconditionViolation("no cluster with id " + std::to_string(ablate));
    std::vector<corpus::ContextualizedEvidence> kept;
    for (const auto& ev : evidences)
        if (std::find(it->member_ids.begin(), it->member_ids.end(), ev.evidence.id) == it->member_ids.end())
            kept.push_back(ev);
    return llm::generate_answer(completed_question, kept, chat, opt, prompts);
}

inline std::string similarity_text(const std::string& question, const std::string& answer) {
    return question + "\n" + answer;
}

/// Cosine of the embeddings of question+answer and question+counterfactual answer.
inline double answer_similarity(const std::string& completed_question, const std::string& answer,
                                const std::string& cf_answer, llm::EmbeddingProvider& embedder) {
    if (text::is_blank(answer) || text::is_blank(cf_answer))
        throw PreconditionViolation("answer_similarity needs nonempty answers");
    const std::vector<std::string> texts{similarity_text(completed_question, answer),
                                         similarity_text(completed_question, cf_answer)};
    const auto v = llm::embed_texts(texts, embedder);
    return std::clamp(llm::dot(v[0], v[1]), -1.0, 1.0);
}

/// Seed of one Monte Carlo draw.
inline std::uint64_t draw_seed(std::uint64_t base, std::size_t cluster, std::size_t iteration) {
    std::uint64_t s = base ^ (0x9e3779b97f4a7c15ull * (cluster + 1)) ^ (0xbf58476d1ce4e5b9ull * (iteration + 1));
    return text::splitmix64(s);
}

struct CfaProviders {
    llm::ChatProvider& chat;           // counterfactual generator
    llm::EmbeddingProvider& embedder;  // clustering and answer similarity
};

namespace detail {

inline void fill_distribution(AttributionReport& r, const std::vector<double>& scores, double t) {
    const auto p = softmax(scores, t);
    for (std::size_t i = 0; i < r.clusters.size(); ++i) {
        r.clusters[i].probability = p[i];
        for (const auto& id : r.clusters[i].cluster.member_ids) r.distribution[id] = p[i];
    }
}

}  // namespace detail

/// Counterfactual attribution: ablate each evidence cluster, regenerate the
/// answer m times, and score the cluster by one minus the mean similarity to
/// the original answer. Ablations run concurrently up to cfg.max_parallel.
/// With `cluster` false every evidence is its own cluster.
inline AttributionReport attribute_counterfactual(const std::string& completed_question,
                                                  const std::vector<corpus::ContextualizedEvidence>& evidences,
                                                  const std::string& answer, const CfaConfig& cfg,
                                                  CfaProviders providers, bool cluster = true,
                                                  const llm::PromptSet& prompts = llm::default_prompts()) {
    cfg.validate();
    if (evidences.empty()) throw PreconditionViolation("attribution needs at least one evidence");
    if (text::is_blank(answer)) throw PreconditionViolation("attribution needs a nonempty answer");
    const auto start = std::chrono::steady_clock::now();
    AttributionReport report;
    report.method = cluster ? Method::cfa : Method::cfa_no_cluster;
    report.question = completed_question;
    report.answer = answer;
    try {
        std::vector<EvidenceCluster> clusters;
        if (cluster) {
            std::vector<std::string> texts;
            for (const auto& ev : evidences) texts.push_back(ev.composed_text);
            clusters = cluster_evidences(evidences, llm::embed_texts(texts, providers.embedder), cfg.eps,
                                         static_cast<std::size_t>(cfg.min_pts));
        } else {
            std::vector<std::string> ids;
            for (const auto& ev : evidences) ids.push_back(ev.evidence.id);
            std::sort(ids.begin(), ids.end());
            for (auto& id : ids) clusters.push_back({static_cast<int>(clusters.size()), {std::move(id)}});
        }
        const auto base = llm::embed_text(similarity_text(completed_question, answer), providers.embedder);

        const std::size_t m = static_cast<std::size_t>(cfg.m);
        struct Draw {
            std::string answer;
            double similarity = 0.0;
        };
        std::vector<Draw> draws(clusters.size() * m);
        auto run = [&](std::size_t ci, std::size_t j) {
            llm::AnswerOptions opt;
            opt.temperature = cfg.generation_temperature;
            opt.model_id = cfg.model_id;
            opt.seed = draw_seed(cfg.seed, ci, j);
            auto gen = counterfactual_answer(completed_question, clusters, clusters[ci].id, evidences, providers.chat,
                                             opt, prompts);
            const auto v = llm::embed_text(similarity_text(completed_question, gen.output), providers.embedder);
            draws[ci * m + j] = {std::move(gen.output), std::clamp(llm::dot(base, v), -1.0, 1.0)};
        };

        if (cfg.max_parallel == 1) {
            for (std::size_t ci = 0; ci < clusters.size(); ++ci)
                for (std::size_t j = 0; j < m; ++j) run(ci, j);
        } else {
            llm::ConcurrencyLimit limit(static_cast<std::size_t>(cfg.max_parallel));
            std::vector<std::future<void>> jobs;
            for (std::size_t ci = 0; ci < clusters.size(); ++ci)
                for (std::size_t j = 0; j < m; ++j)
                    jobs.push_back(std::async(std::launch::async, [&, ci, j] {
                        auto slot = limit.acquire_slot();
                        run(ci, j);
                    }));
            std::exception_ptr first;
            for (auto& job : jobs) {
                try {
                    job.get();
                } catch (...) {
                    if (!first) first = std::current_exception();
                }
            }
            if (first) std::rethrow_exception(first);
        }

        std::vector<double> contributions;
        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            ClusterAttribution ca;
            ca.cluster = clusters[ci];
            double sum = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                auto& d = draws[ci * m + j];
                sum += d.similarity;
                ca.similarities.push_back(d.similarity);
                ca.counterfactual_answers.push_back(std::move(d.answer));
            }
            ca.mean_similarity = sum / static_cast<double>(m);
            ca.contribution = std::clamp(1.0 - ca.mean_similarity, 0.0, 1.0);
            contributions.push_back(ca.contribution);
            report.clusters.push_back(std::move(ca));
        }
        detail::fill_distribution(report, contributions, cfg.temperature);
    } catch (const PreconditionViolation&) {
        throw;
    } catch (const std::exception& e) {
        throw AttributionFailed(std::string("counterfactual attribution failed: ") + e.what());
    }
    report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

/// Baseline: softmax over cosine(answer, evidence) without clustering or ablation.
inline AttributionReport attribute_naive(const std::string& answer,
                                         const std::vector<corpus::ContextualizedEvidence>& evidences,
                                         llm::EmbeddingProvider& embedder, const std::string& question = {}) {
    if (evidences.empty()) throw PreconditionViolation("attribution needs at least one evidence");
    if (text::is_blank(answer)) throw PreconditionViolation("attribution needs a nonempty answer");
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(evidences.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return evidences[a].evidence.id < evidences[b].evidence.id; });
    std::vector<std::string> texts{answer};
    for (auto i : order) texts.push_back(evidences[i].composed_text);
    const auto v = llm::embed_texts(texts, embedder);

    AttributionReport report;
    report.method = Method::naive;
    report.question = question;
    report.answer = answer;
    std::vector<double> scores;
    for (std::size_t k = 0; k < order.size(); ++k) {
        ClusterAttribution ca;
        ca.cluster = {static_cast<int>(k), {evidences[order[k]].evidence.id}};
        ca.mean_similarity = std::clamp(llm::dot(v[0], v[k + 1]), -1.0, 1.0);
        ca.contribution = std::clamp(ca.mean_similarity, 0.0, 1.0);
        scores.push_back(ca.mean_similarity);
        report.clusters.push_back(std::move(ca));
    }
    detail::fill_distribution(report, scores, 1.0);
    report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace ragonite::attribution
