// ragonite: operator CLI for ingesting corpora, asking questions, explaining
// answers, running evaluations and serving the HTTP API.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ragonite/evaluation/run.hpp"
#include "ragonite/service/http.hpp"

using namespace ragonite;
using nlohmann::json;

namespace {

/// Flags that mirror RuntimeConfig fields. Unset flags leave the config file (or defaults) alone.
struct ConfigFlags {
    std::string file;
    std::optional<int> k, rrf_k, min_pts, m, max_parallel, max_retries;
    std::optional<std::string> mode, rerank, context, linearizer, indexing, provider, endpoint, chat_model,
        cf_model, judge_model, embedding_model, attr_embedding_model, rerank_model, prompts_dir;
    std::optional<double> eps, temperature, answer_temperature;
    std::optional<std::uint64_t> seed;

    void add(CLI::App& app) {
        app.add_option("--config", file, "JSON config file (RuntimeConfig fields)");
        app.add_option("--k", k, "evidences passed to the answer model");
        app.add_option("--mode", mode, "ranking: lexical | dense | hybrid");
        app.add_option("--rerank", rerank, "none | model_rrf");
        app.add_option("--rrf-k", rrf_k, "RRF rank offset");
        app.add_option("--context", context, "ALL | NONE | subset of TTL+HDR+BEF+AFT");
        app.add_option("--linearizer", linearizer, "VBL | PIPE | MD | HTML | TXT");
        app.add_option("--indexing", indexing, "row_only | table_only | both");
        app.add_option("--eps", eps, "DBSCAN radius (cosine distance)");
        app.add_option("--min-pts", min_pts, "DBSCAN core threshold");
        app.add_option("--mc", m, "Monte Carlo draws per cluster");
        app.add_option("--temperature", temperature, "attribution softmax temperature");
        app.add_option("--answer-temperature", answer_temperature, "answer sampling temperature");
        app.add_option("--max-parallel", max_parallel, "concurrent counterfactual generations");
        app.add_option("--provider", provider, "mock | openai");
        app.add_option("--endpoint", endpoint, "OpenAI-compatible base URL, e.g. http://localhost:8000/v1");
        app.add_option("--chat-model", chat_model);
        app.add_option("--cf-model", cf_model, "chat model for counterfactual answers");
        app.add_option("--judge-model", judge_model);
        app.add_option("--embedding-model", embedding_model);
        app.add_option("--attribution-embedding-model", attr_embedding_model);
        app.add_option("--rerank-model", rerank_model);
        app.add_option("--max-retries", max_retries);
        app.add_option("--prompts", prompts_dir, "directory with prompt template files");
        app.add_option("--seed", seed, "seed of the mock providers and Monte Carlo draws");
    }

    service::RuntimeConfig resolve() const {
        auto cfg = file.empty() ? service::RuntimeConfig{} : service::load_config_file(file);
        json p = json::object();
        auto set = [&](const auto& v, std::initializer_list<const char*> path) {
            if (!v) return;
            json* at = &p;
            for (auto it = path.begin(); it + 1 != path.end(); ++it) at = &(*at)[*it];
            (*at)[*(path.end() - 1)] = *v;
        };
        set(k, {"retrieval", "k"});
        set(mode, {"retrieval", "mode"});
        set(rerank, {"retrieval", "rerank"});
        set(rrf_k, {"retrieval", "rrf_k"});
        set(context, {"context"});
        set(linearizer, {"linearizer"});
        set(indexing, {"indexing"});
        set(eps, {"cfa", "eps"});
        set(min_pts, {"cfa", "min_pts"});
        set(m, {"cfa", "m"});
        set(temperature, {"cfa", "temperature"});
        set(max_parallel, {"cfa", "max_parallel"});
        set(seed, {"cfa", "seed"});
        set(seed, {"provider", "seed"});
        set(answer_temperature, {"answer_temperature"});
        set(provider, {"provider", "kind"});
        set(endpoint, {"provider", "endpoint_url"});
        set(chat_model, {"provider", "chat_model"});
        set(cf_model, {"provider", "counterfactual_model"});
        set(judge_model, {"provider", "judge_model"});
        set(embedding_model, {"provider", "embedding_model"});
        set(attr_embedding_model, {"provider", "attribution_embedding_model"});
        set(rerank_model, {"provider", "rerank_model"});
        set(max_retries, {"provider", "max_retries"});
        set(prompts_dir, {"prompts_dir"});
        return service::merge_config(cfg, p);
    }
};

llm::PromptSet prompts_for(const service::RuntimeConfig& cfg) {
    if (cfg.prompts_dir.empty()) return llm::default_prompts();
    auto p = llm::load_prompt_set(cfg.prompts_dir);
    llm::validate(p);
    return p;
}

std::shared_ptr<const retrieval::EvidenceIndex> load(const std::string& corpus, const std::string& index_dir,
                                                     const service::RuntimeConfig& cfg, const llm::Providers& p) {
    std::vector<std::string> warnings;
    auto index = service::open_index({"cli", corpus, index_dir}, cfg, *p.embedder, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return index;
}

void print_turn(const conversation::ConversationTurn& t) {
    std::cout << "Q: " << t.question << "\n";
    if (t.completed_question != t.question) std::cout << "   completed: " << t.completed_question << "\n";
    for (const auto& e : t.retrieved.entries) {
        const auto& ev = t.evidences[static_cast<std::size_t>(e.rank - 1)];
        std::string first = ev.evidence.raw_text.substr(0, ev.evidence.raw_text.find('\n'));
        if (first.size() > 90) first = first.substr(0, 87) + "...";
        std::printf("   %2d  %.4f  %-9s %s\n", e.rank, e.score, std::string(corpus::to_string(ev.evidence.kind)).c_str(),
                    first.c_str());
    }
    std::cout << "A: " << t.answer << "\n";
}

void write_json(const std::string& path, const json& j) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

template <class T>
std::vector<T> split_values(const std::vector<std::string>& raw, T (*parse)(std::string_view)) {
    std::vector<T> out;
    for (const auto& r : raw) out.push_back(parse(r));
    return out;
}

corpus::ContextConfig parse_ctx(std::string_view s) { return corpus::parse_context_config(s); }

std::atomic<httplib::Server*> g_server{nullptr};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ragonite: conversational question answering over document corpora"};
    app.require_subcommand(1);
    ConfigFlags flags;

    std::string corpus_dir, index_dir;

    auto* ingest = app.add_subcommand("ingest", "build and cache the evidence index of a corpus");
    ingest->add_option("--corpus", corpus_dir, "directory with manifest.json and HTML files")->required();
    ingest->add_option("--index", index_dir, "index cache directory")->required();
    std::string pool_out;
    ingest->add_option("--pool-out", pool_out, "also write the evidence pool as JSON lines");
    flags.add(*ingest);

    std::vector<std::string> questions;
    auto* ask = app.add_subcommand("ask", "ask one or more questions as one conversation");
    ask->add_option("--corpus", corpus_dir)->required();
    ask->add_option("--index", index_dir, "index cache directory");
    ask->add_option("questions", questions, "questions, asked in order")->required();
    bool show_trace = false;
    ask->add_flag("--trace", show_trace, "print the full trace of each turn as JSON");
    flags.add(*ask);

    std::string method = "cfa";
    auto* explain = app.add_subcommand("explain", "answer a question and attribute the answer to its evidences");
    explain->add_option("--corpus", corpus_dir)->required();
    explain->add_option("--index", index_dir);
    explain->add_option("questions", questions, "questions; the last one is explained")->required();
    explain->add_option("--method", method, "cfa | cfa_no_cluster | naive");
    flags.add(*explain);

    std::string benchmark_file, out_file, completion = "llm";
    auto* eval = app.add_subcommand("eval", "evaluate the pipeline on a benchmark");
    eval->add_option("--corpus", corpus_dir)->required();
    eval->add_option("--index", index_dir);
    eval->add_option("--benchmark", benchmark_file, "JSON-lines benchmark")->required();
    eval->add_option("--completion", completion, "llm | human");
    eval->add_option("--out", out_file, "write the report as JSON");
    flags.add(*eval);

    std::vector<std::string> ax_context, ax_linearizer, ax_indexing, ax_ranking, ax_rerank, ax_completion, ax_chat,
        ax_embedding;
    auto* ablate = app.add_subcommand("ablate", "evaluate the cross product of configuration axes");
    ablate->add_option("--corpus", corpus_dir)->required();
    ablate->add_option("--benchmark", benchmark_file)->required();
    ablate->add_option("--out", out_file, "write the table as JSON");
    ablate->add_option("--axis-context", ax_context)->delimiter(',');
    ablate->add_option("--axis-linearizer", ax_linearizer)->delimiter(',');
    ablate->add_option("--axis-indexing", ax_indexing)->delimiter(',');
    ablate->add_option("--axis-ranking", ax_ranking)->delimiter(',');
    ablate->add_option("--axis-rerank", ax_rerank)->delimiter(',');
    ablate->add_option("--axis-completion", ax_completion)->delimiter(',');
    ablate->add_option("--axis-chat-model", ax_chat)->delimiter(',');
    ablate->add_option("--axis-embedding-model", ax_embedding)->delimiter(',');
    flags.add(*ablate);

    std::vector<std::string> domain_specs;
    std::string store_path = "ragonite.db", bind = "127.0.0.1", static_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "serve the HTTP API");
    serve->add_option("--domain", domain_specs, "name=corpus_dir[:index_dir], repeatable")->required();
    serve->add_option("--store", store_path, "SQLite store file");
    serve->add_option("--bind", bind);
    serve->add_option("--port", port);
    serve->add_option("--static", static_dir, "directory with web client assets");
    flags.add(*serve);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = flags.resolve();
        auto providers = llm::limit_concurrency(service::make_providers(cfg.provider),
                                                static_cast<std::size_t>(cfg.provider.max_in_flight));

        if (*ingest) {
            std::vector<std::string> warnings;
            auto index = service::open_index({"cli", corpus_dir, index_dir}, cfg, *providers.embedder, &warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "indexed " << index->size() << " evidences (" << corpus::to_string(cfg.context) << ", "
                      << corpus::to_string(cfg.linearizer) << ", " << corpus::to_string(cfg.indexing) << ") into "
                      << index_dir << "/" << service::index_key(cfg, providers.embedder->model_id()) << "\n";
            if (!pool_out.empty()) {
                std::ofstream out(pool_out);
                corpus::write_pool_jsonl(out, index->pool());
            }
            return 0;
        }

        if (*ask || *explain) {
            auto index = load(corpus_dir, index_dir, cfg, providers);
            conversation::Conversation conv{"cli", "cli"};
            conversation::TurnContext ctx{*index, providers};
            ctx.retrieval = cfg.retrieval;
            ctx.answer.temperature = cfg.answer_temperature;
            ctx.answer.model_id = cfg.provider.chat_model;
            ctx.prompts = prompts_for(cfg);
            ctx.retry.max_retries = cfg.provider.max_retries;
            for (const auto& q : questions) {
                auto r = conversation::ask_turn(conv, q, ctx);
                print_turn(r.turn);
                if (show_trace) std::cout << json(r.trace).dump(2) << "\n";
            }
            if (*explain) {
                const auto& t = conv.turns.back();
                if (t.evidences.empty()) throw PreconditionViolation("nothing was retrieved; nothing to explain");
                const auto m = attribution::method_from(method);
                auto report = m == attribution::Method::naive
                                  ? attribution::attribute_naive(t.answer, t.evidences, providers.attr_embedder(),
                                                                 t.completed_question)
                                  : attribution::attribute_counterfactual(
                                        t.completed_question, t.evidences, t.answer, cfg.cfa,
                                        {providers.cf_chat(), providers.attr_embedder()},
                                        m == attribution::Method::cfa, ctx.prompts);
                std::cout << "\nattribution (" << attribution::to_string(m) << ", " << report.elapsed_ms << " ms)\n";
                for (const auto& c : report.clusters) {
                    std::printf("  cluster %d  p=%.4f  c=%.4f\n", c.cluster.id, c.probability, c.contribution);
                    for (const auto& id : c.cluster.member_ids) std::printf("      %s\n", id.c_str());
                    for (const auto& a : c.counterfactual_answers) std::printf("      without: %s\n", a.c_str());
                }
            }
            return 0;
        }

        if (*eval) {
            const auto benchmark = evaluation::load_benchmark(benchmark_file);
            auto index = load(corpus_dir, index_dir, cfg, providers);
            evaluation::EvalConfig ec;
            ec.retrieval = cfg.retrieval;
            ec.answer.temperature = cfg.answer_temperature;
            ec.answer.model_id = cfg.provider.chat_model;
            ec.cfa = cfg.cfa;
            ec.completion = evaluation::completion_source_from(completion);
            ec.prompts = prompts_for(cfg);
            ec.labels = {{"context", corpus::to_string(cfg.context)},
                         {"linearizer", corpus::to_string(cfg.linearizer)},
                         {"indexing", corpus::to_string(cfg.indexing)}};
            const auto report = evaluation::evaluate_run(benchmark, *index, providers, ec);
            std::cout << evaluation::format_report(report);
            write_json(out_file, report);
            return report.overall.failures == 0 ? 0 : 3;
        }

        if (*ablate) {
            const auto benchmark = evaluation::load_benchmark(benchmark_file);
            evaluation::AblationAxes axes;
            axes.context = split_values(ax_context, &parse_ctx);
            axes.linearizer = split_values(ax_linearizer, &corpus::linearizer_from);
            axes.indexing = split_values(ax_indexing, &corpus::indexing_from);
            axes.ranking = split_values(ax_ranking, &retrieval::ranking_mode_from);
            axes.rerank = split_values(ax_rerank, &retrieval::rerank_mode_from);
            axes.completion = split_values(ax_completion, &evaluation::completion_source_from);
            axes.chat_model = ax_chat;
            axes.embedding_model = ax_embedding;
            evaluation::AblationBase base;
            base.corpus_dir = corpus_dir;
            base.pool = {cfg.context, cfg.indexing, cfg.linearizer};
            base.eval.retrieval = cfg.retrieval;
            base.eval.answer.temperature = cfg.answer_temperature;
            base.eval.cfa = cfg.cfa;
            base.eval.prompts = prompts_for(cfg);
            base.chat_model = cfg.provider.chat_model;
            base.embedding_model = cfg.provider.embedding_model;
            const auto table = evaluation::run_ablation(
                benchmark, axes, base, [&](const std::string& chat, const std::string& emb) {
                    auto pc = cfg.provider;
                    pc.chat_model = chat;
                    pc.embedding_model = emb;
                    return llm::limit_concurrency(service::make_providers(pc),
                                                  static_cast<std::size_t>(pc.max_in_flight));
                });
            std::cout << evaluation::format_table(table);
            write_json(out_file, table);
            return 0;
        }

        if (*serve) {
            std::vector<service::Domain> domains;
            for (const auto& spec : domain_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) throw InvalidConfig("--domain expects name=corpus_dir[:index_dir]");
                const auto rest = spec.substr(eq + 1);
                const auto colon = rest.find(':');
                domains.push_back({spec.substr(0, eq), rest.substr(0, colon),
                                   colon == std::string::npos ? std::string{} : rest.substr(colon + 1)});
            }
            service::Store store(store_path);
            service::Engine engine(store, domains, cfg);
            for (const auto& d : engine.domains()) {
                const auto index = engine.index(d.name);
                std::cerr << "domain " << d.name << ": " << index->size() << " evidences\n";
            }
            httplib::Server server;
            std::mutex log_mu;
            service::register_routes(
                server, engine,
                [&](const std::string& line) {
                    std::lock_guard lock(log_mu);
                    std::cerr << line << "\n";
                },
                static_dir);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (auto* s = g_server.load()) s->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (auto* s = g_server.load()) s->stop();
            });
            std::cerr << "listening on http://" << bind << ":" << port << "\n";
            if (!server.listen(bind, port)) throw Error("cannot listen on " + bind + ":" + std::to_string(port));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
