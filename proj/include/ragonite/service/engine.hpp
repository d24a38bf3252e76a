#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ragonite/attribution/cfa.hpp"
#include "ragonite/conversation/conversation.hpp"
#include "ragonite/corpus/pool.hpp"
#include "ragonite/llm/prompts.hpp"
#include "ragonite/retrieval/index.hpp"
#include "ragonite/service/config.hpp"
#include "ragonite/service/store.hpp"

namespace ragonite::service {

/// One searchable corpus.
struct Domain {
    std::string name;
    std::filesystem::path corpus_dir;
    std::filesystem::path index_dir;  // cache of built indexes; empty disables caching
};

inline void to_json(nlohmann::json& j, const Domain& d) {
    j = nlohmann::json{{"name", d.name}, {"corpus_dir", d.corpus_dir.string()}, {"index_dir", d.index_dir.string()}};
}

/// Directory name of a cached index for one corpus-side configuration.
inline std::string index_key(const RuntimeConfig& c, const std::string& embedding_model) {
    std::string model;
    for (char ch : embedding_model) model += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
    std::string ctx = corpus::to_string(c.context);
    for (auto& ch : ctx)
        if (ch == '+') ch = '_';
    return ctx + "-" + std::string(corpus::to_string(c.linearizer)) + "-" + std::string(corpus::to_string(c.indexing)) +
           "-" + model;
}

/// Loads the cached index for `cfg`, or builds (and caches) it from the corpus.
inline std::shared_ptr<const retrieval::EvidenceIndex> open_index(const Domain& d, const RuntimeConfig& cfg,
                                                                  llm::EmbeddingProvider& embedder,
                                                                  std::vector<std::string>* warnings = nullptr) {
    const auto key = index_key(cfg, embedder.model_id());
    if (!d.index_dir.empty() && std::filesystem::exists(d.index_dir / key / "index.json"))
        return std::make_shared<const retrieval::EvidenceIndex>(retrieval::load_index(d.index_dir / key));
    auto pool = corpus::build_evidence_pool(d.corpus_dir, {cfg.context, cfg.indexing, cfg.linearizer});
    if (warnings)
        for (auto& w : pool.warnings) warnings->push_back(std::move(w));
    if (pool.evidences.empty()) return std::make_shared<const retrieval::EvidenceIndex>();
    retrieval::IndexBuildOptions opt;
    opt.max_in_flight = static_cast<std::size_t>(cfg.provider.max_in_flight);
    opt.retry.max_retries = cfg.provider.max_retries;
    auto index = std::make_shared<const retrieval::EvidenceIndex>(retrieval::index_pool(std::move(pool.evidences), embedder, opt));
    if (!d.index_dir.empty()) retrieval::save_index(*index, d.index_dir / key);
    return index;
}

/// Service state behind the HTTP API: store, domains, indexes, providers and
/// the current config version. Turns on one conversation are serialized;
/// a second concurrent ask on the same conversation is a Conflict.
class Engine {
public:
    using ProviderFactory = std::function<llm::Providers(const ProviderConfig&)>;

    Engine(Store& store, std::vector<Domain> domains, RuntimeConfig initial,
           ProviderFactory factory = [](const ProviderConfig& c) { return make_providers(c); })
        : store_(store), factory_(std::move(factory)) {
        if (domains.empty()) throw InvalidConfig("at least one domain is required");
        for (auto& d : domains) domains_.emplace(d.name, std::move(d));
        if (auto saved = store_.latest_config()) {
            config_ = *saved;
        } else {
            if (initial.domain.empty()) initial.domain = domains_.begin()->first;
            initial.validate();
            config_ = store_.add_config(initial);
        }
        providers_ = build_providers(config_);
    }

    RuntimeConfig config() const {
        std::shared_lock lock(mu_);
        return config_;
    }

    /// Applies a partial update; a changed config becomes a new version.
    RuntimeConfig update_config(const nlohmann::json& patch) {
        std::unique_lock lock(mu_);
        auto next = merge_config(config_, patch);
        if (!next.domain.empty() && !domains_.contains(next.domain)) throw InvalidConfig("unknown domain " + next.domain);
        if (next.same_settings(config_)) return config_;
        auto providers = next.provider == config_.provider ? providers_ : build_providers(next);
        config_ = store_.add_config(next);
        providers_ = std::move(providers);
        return config_;
    }

    std::vector<Domain> domains() const {
        std::vector<Domain> out;
        for (const auto& [name, d] : domains_) out.push_back(d);
        return out;
    }

    conversation::Conversation create_conversation(std::string domain) {
        if (domain.empty()) domain = config().domain;
        if (!domains_.contains(domain)) throw NotFound("domain " + domain);
        return store_.create_conversation(domain);
    }

    std::vector<conversation::Conversation> conversations(bool include_deleted) {
        return store_.list_conversations(include_deleted);
    }

    conversation::Conversation conversation(const std::string& id) { return store_.conversation(id); }

    void delete_conversation(const std::string& id) { store_.soft_delete(id); }

    conversation::ConversationTurn ask(const std::string& conversation_id, const std::string& question) {
        auto& m = conversation_mutex(conversation_id);
        std::unique_lock turn_lock(m, std::try_to_lock);
        if (!turn_lock.owns_lock()) throw Conflict("conversation " + conversation_id + " already has a turn in progress");

        auto conv = store_.conversation(conversation_id);
        if (conv.deleted) throw NotFound("conversation " + conversation_id + " is deleted");
        const auto [cfg, providers] = snapshot();
        const auto index = index_for(conv.domain, cfg, providers);
        const auto prompts = prompt_set(cfg);
        conversation::TurnContext ctx{*index, providers};
        ctx.retrieval = cfg.retrieval;
        ctx.answer.temperature = cfg.answer_temperature;
        ctx.answer.model_id = cfg.provider.chat_model;
        ctx.prompts = prompts;
        ctx.retry.max_retries = cfg.provider.max_retries;
        ctx.completion_model = cfg.provider.chat_model;
        ctx.config_version = cfg.version;
        auto result = conversation::ask_turn(conv, question, ctx);
        store_.append_turn(conv.id, result.turn, result.trace);
        return result.turn;
    }

    /// Computes (or returns the cached) attribution report for a turn.
    attribution::AttributionReport explain(const std::string& turn_id, attribution::Method method) {
        if (auto cached = store_.attribution(turn_id, method)) return *cached;
        const auto [conv_id, turn] = store_.turn(turn_id);
        if (turn.evidences.empty()) throw PreconditionViolation("turn " + turn_id + " retrieved no evidence to attribute");
        const auto [cfg, providers] = snapshot();
        attribution::AttributionReport report;
        if (method == attribution::Method::naive) {
            report = attribution::attribute_naive(turn.answer, turn.evidences, providers.attr_embedder(),
                                                  turn.completed_question);
        } else {
            auto cfa = cfg.cfa;
            if (cfa.model_id.empty()) cfa.model_id = cfg.provider.counterfactual_model;
            report = attribution::attribute_counterfactual(turn.completed_question, turn.evidences, turn.answer, cfa,
                                                           {providers.cf_chat(), providers.attr_embedder()},
                                                           method == attribution::Method::cfa, prompt_set(cfg));
        }
        store_.put_attribution(turn_id, report);
        return report;
    }

    conversation::TraceRecord trace(const std::string& turn_id) { return store_.trace(turn_id); }

    conversation::ConversationTurn feedback(const std::string& turn_id, conversation::Feedback value) {
        auto [conv_id, turn] = store_.turn(turn_id);
        auto conv = store_.conversation(conv_id);
        auto& updated = conversation::record_feedback(conv, turn.index, value);
        store_.update_turn(updated);
        return updated;
    }

    /// Follow-up suggestions for the conversation as of `turn_id`.
    std::vector<std::string> suggestions(const std::string& turn_id, int n = 3) {
        auto [conv_id, turn] = store_.turn(turn_id);
        auto conv = store_.conversation(conv_id);
        conv.turns.resize(static_cast<std::size_t>(turn.index) + 1);
        const auto [cfg, providers] = snapshot();
        return conversation::suggest_followups(conv, n, *providers.chat, prompt_set(cfg));
    }

    /// Builds (or loads) the index of a domain under the current config.
    std::shared_ptr<const retrieval::EvidenceIndex> index(const std::string& domain) {
        const auto [cfg, providers] = snapshot();
        return index_for(domain, cfg, providers);
    }

private:
    Store& store_;
    ProviderFactory factory_;
    std::map<std::string, Domain> domains_;
    mutable std::shared_mutex mu_;
    RuntimeConfig config_;
    llm::Providers providers_;

    std::mutex index_mu_;
    std::map<std::string, std::shared_ptr<const retrieval::EvidenceIndex>> indexes_;

    std::mutex conv_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> conv_locks_;

    llm::Providers build_providers(const RuntimeConfig& cfg) const {
        return llm::limit_concurrency(factory_(cfg.provider), static_cast<std::size_t>(cfg.provider.max_in_flight));
    }

    std::pair<RuntimeConfig, llm::Providers> snapshot() const {
        std::shared_lock lock(mu_);
        return {config_, providers_};
    }

    static llm::PromptSet prompt_set(const RuntimeConfig& cfg) {
        if (cfg.prompts_dir.empty()) return llm::default_prompts();
        auto p = llm::load_prompt_set(cfg.prompts_dir);
        llm::validate(p);
        return p;
    }

    std::mutex& conversation_mutex(const std::string& id) {
        std::lock_guard lock(conv_mu_);
        auto& m = conv_locks_[id];
        if (!m) m = std::make_unique<std::mutex>();
        return *m;
    }

    std::shared_ptr<const retrieval::EvidenceIndex> index_for(const std::string& domain, const RuntimeConfig& cfg,
                                                              const llm::Providers& providers) {
        auto it = domains_.find(domain);
        if (it == domains_.end()) throw NotFound("domain " + domain);
        const auto key = domain + "/" + index_key(cfg, providers.embedder->model_id());
        std::lock_guard lock(index_mu_);
        auto& slot = indexes_[key];
        if (!slot) slot = open_index(it->second, cfg, *providers.embedder);
        return slot;
    }
};

}  // namespace ragonite::service
