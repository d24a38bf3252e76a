#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "ragonite/attribution/cfa.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/llm/mock.hpp"
#include "ragonite/llm/openai.hpp"
#include "ragonite/llm/provider.hpp"
#include "ragonite/retrieval/retrieve.hpp"

namespace ragonite::service {

struct ProviderConfig {
    std::string kind = "mock";  // mock | openai
    std::string endpoint_url;
    std::string api_key_env_var = "RAGONITE_API_KEY";
    std::string chat_model = "mock-chat";
    std::string counterfactual_model;  // empty: same as chat_model
    std::string judge_model;           // empty: same as chat_model
    std::string embedding_model = "mock-embed";
    std::string attribution_embedding_model;  // empty: same as embedding_model
    std::string rerank_model = "mock-rerank";
    std::size_t embedding_dimension = 0;  // 0: learned from the provider
    int request_timeout_seconds = 60;
    int max_retries = 3;
    int max_in_flight = 8;
    std::uint64_t seed = 0;  // mock providers only

    bool operator==(const ProviderConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ProviderConfig& c) {
    j = nlohmann::json{{"kind", c.kind},
                       {"endpoint_url", c.endpoint_url},
                       {"api_key_env_var", c.api_key_env_var},
                       {"chat_model", c.chat_model},
                       {"counterfactual_model", c.counterfactual_model},
                       {"judge_model", c.judge_model},
                       {"embedding_model", c.embedding_model},
                       {"attribution_embedding_model", c.attribution_embedding_model},
                       {"rerank_model", c.rerank_model},
                       {"embedding_dimension", c.embedding_dimension},
                       {"request_timeout_seconds", c.request_timeout_seconds},
                       {"max_retries", c.max_retries},
                       {"max_in_flight", c.max_in_flight},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ProviderConfig& c) {
    ProviderConfig d;
    c.kind = j.value("kind", d.kind);
    c.endpoint_url = j.value("endpoint_url", d.endpoint_url);
    c.api_key_env_var = j.value("api_key_env_var", d.api_key_env_var);
    c.chat_model = j.value("chat_model", d.chat_model);
    c.counterfactual_model = j.value("counterfactual_model", d.counterfactual_model);
    c.judge_model = j.value("judge_model", d.judge_model);
    c.embedding_model = j.value("embedding_model", d.embedding_model);
    c.attribution_embedding_model = j.value("attribution_embedding_model", d.attribution_embedding_model);
    c.rerank_model = j.value("rerank_model", d.rerank_model);
    c.embedding_dimension = j.value("embedding_dimension", d.embedding_dimension);
    c.request_timeout_seconds = j.value("request_timeout_seconds", d.request_timeout_seconds);
    c.max_retries = j.value("max_retries", d.max_retries);
    c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    c.seed = j.value("seed", d.seed);
}

/// Everything a turn runs under. Each accepted change gets a new version.
struct RuntimeConfig {
    int version = 1;
    std::string domain;  // default domain for new conversations
    retrieval::RetrievalConfig retrieval{};
    corpus::ContextConfig context = corpus::ContextConfig::all();
    corpus::LinearizerMode linearizer = corpus::LinearizerMode::VBL;
    corpus::IndexingMode indexing = corpus::IndexingMode::both;
    attribution::CfaConfig cfa{};
    double answer_temperature = 0.7;
    std::string prompts_dir;  // empty: built-in templates
    ProviderConfig provider{};

    void validate() const {
        retrieval.validate();
        cfa.validate();
        if (!(answer_temperature >= 0.0) || answer_temperature > 2.0)
            throw InvalidConfig("answer_temperature must lie in [0, 2]");
        if (provider.kind != "mock" && provider.kind != "openai")
            throw InvalidConfig("provider.kind must be 'mock' or 'openai'");
        if (provider.kind == "openai" && provider.endpoint_url.empty())
            throw InvalidConfig("provider.endpoint_url is required for openai providers");
        if (provider.max_retries < 0) throw InvalidConfig("provider.max_retries must be non-negative");
        if (provider.max_in_flight < 1) throw InvalidConfig("provider.max_in_flight must be at least 1");
    }

    /// Equality ignoring the version number.
    bool same_settings(const RuntimeConfig& o) const {
        auto a = *this;
        a.version = o.version;
        return a == o;
    }
    bool operator==(const RuntimeConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const RuntimeConfig& c) {
    j = nlohmann::json{{"version", c.version},
                       {"domain", c.domain},
                       {"retrieval", c.retrieval},
                       {"context", corpus::to_string(c.context)},
                       {"linearizer", corpus::to_string(c.linearizer)},
                       {"indexing", corpus::to_string(c.indexing)},
                       {"cfa", c.cfa},
                       {"answer_temperature", c.answer_temperature},
                       {"prompts_dir", c.prompts_dir},
                       {"provider", c.provider}};
}

inline void from_json(const nlohmann::json& j, RuntimeConfig& c) {
    RuntimeConfig d;
    c.version = j.value("version", d.version);
    c.domain = j.value("domain", d.domain);
    c.retrieval = j.contains("retrieval") ? j.at("retrieval").get<retrieval::RetrievalConfig>() : d.retrieval;
    c.context = corpus::parse_context_config(j.value("context", corpus::to_string(d.context)));
    c.linearizer = corpus::linearizer_from(j.value("linearizer", std::string(corpus::to_string(d.linearizer))));
    c.indexing = corpus::indexing_from(j.value("indexing", std::string(corpus::to_string(d.indexing))));
    c.cfa = j.contains("cfa") ? j.at("cfa").get<attribution::CfaConfig>() : d.cfa;
    c.answer_temperature = j.value("answer_temperature", d.answer_temperature);
    c.prompts_dir = j.value("prompts_dir", d.prompts_dir);
    c.provider = j.contains("provider") ? j.at("provider").get<ProviderConfig>() : d.provider;
}

/// Applies a partial JSON update (object members replace or merge recursively).
inline RuntimeConfig merge_config(const RuntimeConfig& base, const nlohmann::json& patch) {
    if (!patch.is_object()) throw InvalidConfig("config update must be a JSON object");
    nlohmann::json j = base;
    j.merge_patch(patch);
    RuntimeConfig out;
    try {
        out = j.get<RuntimeConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("malformed config: ") + e.what());
    }
    out.validate();
    return out;
}

inline RuntimeConfig load_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFound("config file " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(file.string() + ": " + e.what());
    }
    return merge_config(RuntimeConfig{}, j);
}

/// Builds the provider bundle a config describes.
inline llm::Providers make_providers(const ProviderConfig& c) {
    llm::Providers p;
    if (c.kind == "mock") {
        p.chat = std::make_shared<llm::mock::MockChat>(c.seed, c.chat_model);
        p.embedder = std::make_shared<llm::mock::MockEmbedder>(c.embedding_dimension ? c.embedding_dimension : 128,
                                                               c.seed, c.embedding_model);
        if (!c.attribution_embedding_model.empty() && c.attribution_embedding_model != c.embedding_model)
            p.attribution_embedder = std::make_shared<llm::mock::MockEmbedder>(
                c.embedding_dimension ? c.embedding_dimension : 128, c.seed + 1, c.attribution_embedding_model);
        p.scorer = std::make_shared<llm::mock::MockScorer>();
        return p;
    }
    if (c.kind != "openai") throw InvalidConfig("unknown provider kind: " + c.kind);
    llm::openai::ClientOptions opt;
    opt.endpoint_url = c.endpoint_url;
    opt.api_key_env_var = c.api_key_env_var;
    opt.timeout_seconds = c.request_timeout_seconds;
    opt.retry.max_retries = c.max_retries;
    p.chat = std::make_shared<llm::openai::ChatClient>(opt, c.chat_model);
    if (!c.counterfactual_model.empty() && c.counterfactual_model != c.chat_model)
        p.counterfactual_chat = std::make_shared<llm::openai::ChatClient>(opt, c.counterfactual_model);
    if (!c.judge_model.empty() && c.judge_model != c.chat_model)
        p.judge = std::make_shared<llm::openai::ChatClient>(opt, c.judge_model);
    p.embedder = std::make_shared<llm::openai::EmbeddingClient>(opt, c.embedding_model, c.embedding_dimension);
    if (!c.attribution_embedding_model.empty() && c.attribution_embedding_model != c.embedding_model)
        p.attribution_embedder = std::make_shared<llm::openai::EmbeddingClient>(opt, c.attribution_embedding_model);
    if (!c.rerank_model.empty()) p.scorer = std::make_shared<llm::openai::RerankClient>(opt, c.rerank_model);
    return p;
}

}  // namespace ragonite::service
