#pragma once

#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/attribution/cfa.hpp"
#include "ragonite/corpus/pool.hpp"
#include "ragonite/evaluation/benchmark.hpp"
#include "ragonite/llm/gateway.hpp"
#include "ragonite/retrieval/index.hpp"
#include "ragonite/retrieval/retrieve.hpp"

namespace ragonite::evaluation {

enum class CompletionSource { llm, human };

inline std::string_view to_string(CompletionSource s) { return s == CompletionSource::llm ? "llm" : "human"; }

inline CompletionSource completion_source_from(std::string_view s) {
    if (s == "llm") return CompletionSource::llm;
    if (s == "human") return CompletionSource::human;
    throw InvalidConfig("unknown completion source: " + std::string(s));
}

struct EvalConfig {
    retrieval::RetrievalConfig retrieval{};
    llm::AnswerOptions answer{};
    attribution::CfaConfig cfa{};
    CompletionSource completion = CompletionSource::llm;
    std::set<attribution::Method> methods{attribution::Method::cfa, attribution::Method::cfa_no_cluster,
                                          attribution::Method::naive};
    int max_parallel = 8;  // conversations evaluated at once
    llm::PromptSet prompts = llm::default_prompts();
    nlohmann::json labels = nlohmann::json::object();  // index-side settings, part of the fingerprint
};

inline nlohmann::json config_json(const EvalConfig& c) {
    nlohmann::json methods = nlohmann::json::array();
    for (auto m : c.methods) methods.push_back(to_string(m));
    return {{"retrieval", c.retrieval},
            {"answer_temperature", c.answer.temperature},
            {"answer_model", c.answer.model_id},
            {"cfa", c.cfa},
            {"completion", to_string(c.completion)},
            {"methods", methods},
            {"prompts", c.prompts.version},
            {"labels", c.labels}};
}

inline std::string fingerprint(const EvalConfig& c) { return text::hex64(text::fnv1a(config_json(c).dump())); }

struct ItemResult {
    std::string conversation_id;
    int turn = 1;
    std::map<std::string, std::string> slices;
    std::string query;  // the question retrieval ran on
    std::string answer;
    bool is_oos = false;
    int p_at_1 = 0;
    int p_at_k = 0;
    double relevance = 0.0;
    bool gold_retrieved = false;
    std::map<std::string, int> attribution_hits;  // method -> 0/1, only when gold_retrieved
    std::vector<std::string> retrieved_ids;
    std::optional<std::string> error;
};

struct Metrics {
    std::size_t items = 0;
    std::size_t failures = 0;
    double precision_at_1 = 0.0;
    double precision_at_k = 0.0;
    double answer_relevance = 0.0;
    double oos_rate = 0.0;
    std::size_t attribution_denominator = 0;
    std::map<std::string, double> attribution_accuracy;  // method -> accuracy
};

struct EvalReport {
    std::string fingerprint;
    nlohmann::json config;
    Metrics overall;
    std::map<std::string, std::map<std::string, Metrics>> slices;  // slice -> value -> metrics
    std::vector<ItemResult> items;
};

inline Metrics aggregate(const std::vector<const ItemResult*>& items, const std::set<attribution::Method>& methods) {
    Metrics m;
    m.items = items.size();
    std::size_t ok = 0, oos = 0;
    double p1 = 0, pk = 0, rel = 0;
    std::map<std::string, double> hits;
    for (const auto* r : items) {
        if (r->error) {
            ++m.failures;
            continue;
        }
        ++ok;
        p1 += r->p_at_1;
        pk += r->p_at_k;
        rel += r->relevance;
        oos += r->is_oos ? 1 : 0;
        if (r->gold_retrieved) {
            ++m.attribution_denominator;
            for (const auto& [method, hit] : r->attribution_hits) hits[method] += hit;
        }
    }
    if (ok) {
        const double n = static_cast<double>(ok);
        m.precision_at_1 = p1 / n;
        m.precision_at_k = pk / n;
        m.answer_relevance = rel / n;
        m.oos_rate = static_cast<double>(oos) / n;
    }
    for (auto method : methods) {
        const std::string name(to_string(method));
        m.attribution_accuracy[name] =
            m.attribution_denominator ? hits[name] / static_cast<double>(m.attribution_denominator) : 0.0;
    }
    return m;
}

inline void to_json(nlohmann::json& j, const Metrics& m) {
    j = nlohmann::json{{"items", m.items},
                       {"failures", m.failures},
                       {"precision_at_1", m.precision_at_1},
                       {"precision_at_k", m.precision_at_k},
                       {"answer_relevance", m.answer_relevance},
                       {"oos_rate", m.oos_rate},
                       {"attribution_denominator", m.attribution_denominator},
                       {"attribution_accuracy", m.attribution_accuracy}};
}

inline void to_json(nlohmann::json& j, const ItemResult& r) {
    j = nlohmann::json{{"conversation_id", r.conversation_id},
                       {"turn", r.turn},
                       {"slices", r.slices},
                       {"query", r.query},
                       {"answer", r.answer},
                       {"is_oos", r.is_oos},
                       {"p_at_1", r.p_at_1},
                       {"p_at_k", r.p_at_k},
                       {"relevance", r.relevance},
                       {"gold_retrieved", r.gold_retrieved},
                       {"attribution_hits", r.attribution_hits},
                       {"retrieved_ids", r.retrieved_ids},
                       {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)}};
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json{{"fingerprint", r.fingerprint},
                       {"config", r.config},
                       {"overall", r.overall},
                       {"slices", r.slices},
                       {"items", r.items}};
}

/// Runs one pipeline configuration over a benchmark. Conversations run
/// concurrently; turns within a conversation run in order so that LLM
/// completion sees the answers generated earlier in this run. Item failures
/// are recorded and excluded from the means.
inline EvalReport evaluate_run(const std::vector<BenchmarkItem>& benchmark, const retrieval::EvidenceIndex& index,
                               const llm::Providers& providers, const EvalConfig& cfg) {
    cfg.retrieval.validate();
    std::vector<ItemResult> results(benchmark.size());
    std::map<std::string, std::vector<std::size_t>> conversations;
    for (std::size_t i = 0; i < benchmark.size(); ++i) conversations[benchmark[i].conversation_id].push_back(i);
    for (auto& [id, idx] : conversations)
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return benchmark[a].turn < benchmark[b].turn; });

    auto run_item = [&](const BenchmarkItem& item, std::vector<llm::HistoryTurn>& history, ItemResult& r) {
        r.conversation_id = item.conversation_id;
        r.turn = item.turn;
        r.slices = {{"complexity", item.complexity},
                    {"answer_source", item.answer_source},
                    {"language", item.language},
                    {"turn", turn_bucket(item.turn)}};
        try {
            r.query = cfg.completion == CompletionSource::human
                          ? item.completed_question
                          : llm::complete_question(history, item.question, *providers.chat, cfg.prompts).output;
            const auto rt = retrieval::retrieve_with_trace(index, r.query, cfg.retrieval, providers.embedder.get(),
                                                           providers.scorer.get());
            const auto evidences = index.resolve(rt.result);
            r.retrieved_ids = rt.result.ids();
            r.answer = llm::generate_answer(r.query, evidences, *providers.chat, cfg.answer, cfg.prompts).output;
            r.is_oos = llm::is_out_of_scope(r.answer);
            r.relevance =
                llm::judge_answer(item.completed_question, item.gold_answer, r.answer, providers.judge_chat(),
                                  cfg.prompts)
                    .score;
            r.p_at_1 = precision_at_k(rt.result, index, item.gold_urls, 1);
            r.p_at_k = precision_at_k(rt.result, index, item.gold_urls, static_cast<std::size_t>(cfg.retrieval.k));
            r.gold_retrieved = r.p_at_k == 1;
            if (r.gold_retrieved) {
                for (auto method : cfg.methods) {
                    attribution::AttributionReport report;
                    if (method == attribution::Method::naive) {
                        report = attribution::attribute_naive(r.answer, evidences, providers.attr_embedder(), r.query);
                    } else {
                        report = attribution::attribute_counterfactual(
                            r.query, evidences, r.answer, cfg.cfa, {providers.cf_chat(), providers.attr_embedder()},
                            method == attribution::Method::cfa, cfg.prompts);
                    }
                    r.attribution_hits[std::string(to_string(method))] =
                        attribution_accuracy(report, rt.result, index, item.gold_urls);
                }
            }
            history.push_back({item.question, r.answer});
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    };

    llm::ConcurrencyLimit limit(static_cast<std::size_t>(std::max(1, cfg.max_parallel)));
    std::vector<std::future<void>> jobs;
    for (const auto& [id, idx] : conversations) {
        jobs.push_back(std::async(std::launch::async, [&, &idx = idx] {
            auto slot = limit.acquire_slot();
            std::vector<llm::HistoryTurn> history;
            for (auto i : idx) run_item(benchmark[i], history, results[i]);
        }));
    }
    for (auto& j : jobs) j.get();

    EvalReport report;
    report.config = config_json(cfg);
    report.fingerprint = fingerprint(cfg);
    std::vector<const ItemResult*> all;
    std::map<std::string, std::map<std::string, std::vector<const ItemResult*>>> groups;
    for (const auto& r : results) {
        all.push_back(&r);
        for (const auto& [slice, value] : r.slices) groups[slice][value].push_back(&r);
    }
    report.overall = aggregate(all, cfg.methods);
    for (const auto& [slice, values] : groups)
        for (const auto& [value, members] : values) report.slices[slice][value] = aggregate(members, cfg.methods);
    report.items = std::move(results);
    return report;
}

// Ablation matrix

struct AblationAxes {
    std::vector<corpus::ContextConfig> context;
    std::vector<corpus::LinearizerMode> linearizer;
    std::vector<corpus::IndexingMode> indexing;
    std::vector<retrieval::RankingMode> ranking;
    std::vector<retrieval::RerankMode> rerank;
    std::vector<CompletionSource> completion;
    std::vector<std::string> chat_model;
    std::vector<std::string> embedding_model;
};

struct AblationBase {
    std::filesystem::path corpus_dir;
    corpus::PoolBuildOptions pool{};
    EvalConfig eval{};
    std::string chat_model;
    std::string embedding_model;
};

/// Returns the providers for one (chat model, embedding model) pair.
using ProviderFactory = std::function<llm::Providers(const std::string& chat_model, const std::string& embedding_model)>;

struct AblationCell {
    std::vector<std::pair<std::string, std::string>> labels;  // axis -> value, in axis order
    std::size_t pool_size = 0;
    std::optional<EvalReport> report;
    std::optional<std::string> error;
};

struct AblationTable {
    std::vector<std::string> axes;
    std::vector<AblationCell> cells;
};

/// One evaluation per configuration in the cross product of the requested
/// axes; an empty axis keeps the base setting. Indexes are built once per
/// distinct corpus-side configuration. A failing cell is recorded and the
/// others still run.
inline AblationTable run_ablation(const std::vector<BenchmarkItem>& benchmark, const AblationAxes& axes,
                                  const AblationBase& base, const ProviderFactory& providers_for) {
    struct Axis {
        std::string name;
        std::vector<std::string> values;
    };
    std::vector<Axis> list;
    auto add = [&](const char* name, const auto& values, auto show) {
        if (values.empty()) return;
        Axis a{name, {}};
        for (const auto& v : values) a.values.push_back(std::string(show(v)));
        list.push_back(std::move(a));
    };
    add("context", axes.context, [](const auto& v) { return corpus::to_string(v); });
    add("linearizer", axes.linearizer, [](auto v) { return corpus::to_string(v); });
    add("indexing", axes.indexing, [](auto v) { return corpus::to_string(v); });
    add("ranking", axes.ranking, [](auto v) { return retrieval::to_string(v); });
    add("rerank", axes.rerank, [](auto v) { return retrieval::to_string(v); });
    add("completion", axes.completion, [](auto v) { return to_string(v); });
    add("chat_model", axes.chat_model, [](const auto& v) { return v; });
    add("embedding_model", axes.embedding_model, [](const auto& v) { return v; });

    AblationTable table;
    for (const auto& a : list) table.axes.push_back(a.name);

    std::map<std::string, std::shared_ptr<retrieval::EvidenceIndex>> indexes;
    std::vector<std::size_t> pos(list.size(), 0);
    for (;;) {
        AblationCell cell;
        auto pool_opt = base.pool;
        auto eval = base.eval;
        auto chat_model = base.chat_model;
        auto embedding_model = base.embedding_model;
        for (std::size_t a = 0; a < list.size(); ++a) {
            const auto& name = list[a].name;
            const auto& value = list[a].values[pos[a]];
            cell.labels.emplace_back(name, value);
            if (name == "context") pool_opt.context = corpus::parse_context_config(value);
            else if (name == "linearizer") pool_opt.linearizer = corpus::linearizer_from(value);
            else if (name == "indexing") pool_opt.indexing = corpus::indexing_from(value);
            else if (name == "ranking") eval.retrieval.mode = retrieval::ranking_mode_from(value);
            else if (name == "rerank") eval.retrieval.rerank = retrieval::rerank_mode_from(value);
            else if (name == "completion") eval.completion = completion_source_from(value);
            else if (name == "chat_model") chat_model = value;
            else if (name == "embedding_model") embedding_model = value;
        }
        eval.answer.model_id = chat_model;
        eval.labels = {{"context", corpus::to_string(pool_opt.context)},
                       {"linearizer", corpus::to_string(pool_opt.linearizer)},
                       {"indexing", corpus::to_string(pool_opt.indexing)},
                       {"chat_model", chat_model},
                       {"embedding_model", embedding_model}};
        try {
            const auto providers = providers_for(chat_model, embedding_model);
            const auto key = corpus::to_string(pool_opt.context) + "/" + std::string(corpus::to_string(pool_opt.linearizer)) +
                             "/" + std::string(corpus::to_string(pool_opt.indexing)) + "/" + embedding_model;
            auto& index = indexes[key];
            if (!index) {
                auto pool = corpus::build_evidence_pool(base.corpus_dir, pool_opt);
                index = std::make_shared<retrieval::EvidenceIndex>(
                    pool.evidences.empty() ? retrieval::EvidenceIndex{}
                                           : retrieval::index_pool(std::move(pool.evidences), *providers.embedder));
            }
            cell.pool_size = index->size();
            cell.report = evaluate_run(benchmark, *index, providers, eval);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        table.cells.push_back(std::move(cell));

        std::size_t a = list.size();
        while (a > 0) {
            --a;
            if (++pos[a] < list[a].values.size()) break;
            pos[a] = 0;
            if (a == 0) return table;
        }
        if (list.empty()) return table;
    }
}

inline void to_json(nlohmann::json& j, const AblationCell& c) {
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [k, v] : c.labels) labels[k] = v;
    j = nlohmann::json{{"labels", labels},
                       {"pool_size", c.pool_size},
                       {"overall", c.report ? nlohmann::json(c.report->overall) : nlohmann::json(nullptr)},
                       {"fingerprint", c.report ? nlohmann::json(c.report->fingerprint) : nlohmann::json(nullptr)},
                       {"error", c.error ? nlohmann::json(*c.error) : nlohmann::json(nullptr)}};
}

inline void to_json(nlohmann::json& j, const AblationTable& t) {
    j = nlohmann::json{{"axes", t.axes}, {"cells", t.cells}};
}

namespace detail {

inline std::string fixed3(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << v;
    return s.str();
}

inline std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (width.size() <= c) width.push_back(0);
            width[c] = std::max(width[c], r[c].size());
        }
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::string line;
        for (std::size_t c = 0; c < rows[i].size(); ++c) {
            if (c) line += "  ";
            line += rows[i][c] + std::string(width[c] - rows[i][c].size(), ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
        if (i == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
        }
    }
    return out;
}

inline std::vector<std::string> metric_header() {
    return {"n", "fail", "P@1", "P@k", "Rel", "CFA", "CFA-nc", "Naive", "attr-n", "OOS"};
}

inline std::vector<std::string> metric_cells(const Metrics& m) {
    auto acc = [&](const char* name) {
        auto it = m.attribution_accuracy.find(name);
        return it == m.attribution_accuracy.end() ? std::string("-") : fixed3(it->second);
    };
    return {std::to_string(m.items),      std::to_string(m.failures),   fixed3(m.precision_at_1),
            fixed3(m.precision_at_k),     fixed3(m.answer_relevance),   acc("cfa"),
            acc("cfa_no_cluster"),        acc("naive"),                 std::to_string(m.attribution_denominator),
            fixed3(m.oos_rate)};
}

}  // namespace detail

/// Aligned plain-text rendering of a report: overall row plus one row per slice value.
inline std::string format_report(const EvalReport& r) {
    std::vector<std::vector<std::string>> rows;
    auto header = detail::metric_header();
    header.insert(header.begin(), "slice");
    rows.push_back(header);
    auto row = detail::metric_cells(r.overall);
    row.insert(row.begin(), "overall");
    rows.push_back(row);
    for (const auto& [slice, values] : r.slices)
        for (const auto& [value, m] : values) {
            auto cells = detail::metric_cells(m);
            cells.insert(cells.begin(), slice + "=" + value);
            rows.push_back(cells);
        }
    return detail::render_rows(rows);
}

/// Aligned plain-text rendering: one row per configuration.
inline std::string format_table(const AblationTable& t) {
    std::vector<std::vector<std::string>> rows;
    auto header = t.axes;
    header.push_back("pool");
    for (auto& h : detail::metric_header()) header.push_back(h);
    rows.push_back(header);
    for (const auto& c : t.cells) {
        std::vector<std::string> row;
        for (const auto& [axis, value] : c.labels) row.push_back(value);
        row.push_back(std::to_string(c.pool_size));
        if (c.report) {
            for (auto& v : detail::metric_cells(c.report->overall)) row.push_back(v);
        } else {
            row.push_back("error: " + c.error.value_or("unknown"));
        }
        rows.push_back(row);
    }
    return detail::render_rows(rows);
}

}  // namespace ragonite::evaluation
