#pragma once

// Providers for any endpoint speaking the OpenAI-compatible HTTP shape:
// POST {base}/chat/completions, {base}/embeddings and {base}/rerank.
// HTTPS endpoints need CPPHTTPLIB_OPENSSL_SUPPORT defined before inclusion.

#include <cstdlib>
#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragonite/llm/provider.hpp"

namespace ragonite::llm::openai {

struct Endpoint {
    std::string origin;     // scheme://host[:port]
    std::string base_path;  // e.g. /v1, no trailing slash
};

inline Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw InvalidConfig("endpoint must be an http(s) URL: " + url);
    std::string path = m[2].matched ? m[2].str() : "";
    while (!path.empty() && path.back() == '/') path.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.rfind("https://", 0) == 0)
        throw InvalidConfig("this build has no TLS support; use an http:// endpoint or rebuild with OpenSSL");
#endif
    return {m[1].str(), path};
}

/// Replaces every occurrence of `secret` with a placeholder.
inline std::string redact(std::string s, const std::string& secret) {
    if (secret.empty()) return s;
    for (auto pos = s.find(secret); pos != std::string::npos; pos = s.find(secret, pos))
        s.replace(pos, secret.size(), "[REDACTED]");
    return s;
}

struct ClientOptions {
    std::string endpoint_url;
    std::string api_key_env_var = "RAGONITE_API_KEY";
    int timeout_seconds = 60;
    RetryPolicy retry{};
};

/// JSON-over-HTTP transport shared by the three providers. Thread-safe: each
/// request uses its own connection.
class Transport {
public:
    explicit Transport(ClientOptions opt) : opt_(std::move(opt)), endpoint_(parse_endpoint(opt_.endpoint_url)) {
        if (!opt_.api_key_env_var.empty())
            if (const char* key = std::getenv(opt_.api_key_env_var.c_str())) key_ = key;
    }

    nlohmann::json post(const std::string& provider, const std::string& route, const nlohmann::json& body) const {
        return with_retries(opt_.retry, [&] { return post_once(provider, route, body); });
    }

    const ClientOptions& options() const noexcept { return opt_; }

private:
    ClientOptions opt_;
    Endpoint endpoint_;
    std::string key_;

    nlohmann::json post_once(const std::string& provider, const std::string& route, const nlohmann::json& body) const {
        httplib::Client client(endpoint_.origin);
        client.set_connection_timeout(opt_.timeout_seconds);
        client.set_read_timeout(opt_.timeout_seconds);
        client.set_write_timeout(opt_.timeout_seconds);
        httplib::Headers headers;
        if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
        auto res = client.Post(endpoint_.base_path + route, headers, body.dump(), "application/json");
        if (!res) throw ProviderFailure(provider, "request to " + route + " failed: " + httplib::to_string(res.error()), true);
        if (res->status == 429 || res->status >= 500)
            throw ProviderFailure(provider, "HTTP " + std::to_string(res->status) + ": " + redact(res->body, key_), true);
        if (res->status != 200)
            throw ProviderFailure(provider, "HTTP " + std::to_string(res->status) + ": " + redact(res->body, key_));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
            throw ProviderFailure(provider, route + " returned a non-JSON body");
        }
    }
};

class ChatClient : public ChatProvider {
public:
    ChatClient(ClientOptions opt, std::string model) : http_(std::move(opt)), model_(std::move(model)) {}

    std::string complete(const ChatRequest& req) override {
        nlohmann::json body{{"model", req.model_id.empty() ? model_ : req.model_id},
                            {"messages",
                             {{{"role", "system"}, {"content", req.system_prompt}},
                              {{"role", "user"}, {"content", req.user_prompt}}}},
                            {"temperature", req.temperature},
                            {"max_tokens", req.max_output_tokens}};
        if (req.seed) body["seed"] = *req.seed;
        const auto j = http_.post(name(), "/chat/completions", body);
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ProviderFailure(name(), "chat response lacks choices[0].message.content");
        }
    }

    std::string name() const override { return "chat:" + model_; }

private:
    Transport http_;
    std::string model_;
};

class EmbeddingClient : public EmbeddingProvider {
public:
    /// `dimension` 0 means: learn it from the first response.
    EmbeddingClient(ClientOptions opt, std::string model, std::size_t dimension = 0)
        : http_(std::move(opt)), model_(std::move(model)), dim_(dimension) {}

    std::vector<Vector> embed(std::span<const std::string> texts) override {
        const nlohmann::json body{{"model", model_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
        const auto j = http_.post("embed:" + model_, "/embeddings", body);
        std::vector<Vector> out(texts.size());
        try {
            const auto& data = j.at("data");
            if (data.size() != texts.size())
                throw ProviderFailure("embed:" + model_, "returned " + std::to_string(data.size()) + " embeddings");
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto idx = data[i].value("index", i);
                if (idx >= out.size()) throw ProviderFailure("embed:" + model_, "embedding index out of range");
                out[idx] = data[i].at("embedding").get<Vector>();
            }
        } catch (const nlohmann::json::exception&) {
            throw ProviderFailure("embed:" + model_, "embedding response lacks data[].embedding");
        }
        std::lock_guard lock(mu_);
        if (dim_ == 0 && !out.empty()) dim_ = out.front().size();
        return out;
    }

    std::size_t dimension() const override {
        {
            std::lock_guard lock(mu_);
            if (dim_) return dim_;
        }
        const std::string probe = "dimension probe";
        auto* self = const_cast<EmbeddingClient*>(this);
        return self->embed(std::span<const std::string>(&probe, 1)).front().size();
    }

    std::string model_id() const override { return model_; }

private:
    Transport http_;
    std::string model_;
    mutable std::mutex mu_;
    std::size_t dim_;
};

/// Cross-encoder reranking via {base}/rerank (`results[].index`, `results[].relevance_score`).
class RerankClient : public RelevanceScorer {
public:
    RerankClient(ClientOptions opt, std::string model) : http_(std::move(opt)), model_(std::move(model)) {}

    std::vector<double> score(const std::string& query, std::span<const std::string> documents) override {
        const nlohmann::json body{{"model", model_},
                                  {"query", query},
                                  {"documents", std::vector<std::string>(documents.begin(), documents.end())}};
        const auto j = http_.post("rerank:" + model_, "/rerank", body);
        std::vector<double> out(documents.size(), 0.0);
        try {
            for (const auto& r : j.at("results")) {
                const auto idx = r.at("index").get<std::size_t>();
                if (idx < out.size()) out[idx] = r.at("relevance_score").get<double>();
            }
        } catch (const nlohmann::json::exception&) {
            throw ProviderFailure("rerank:" + model_, "rerank response lacks results[].relevance_score");
        }
        return out;
    }

    std::string model_id() const override { return model_; }

private:
    Transport http_;
    std::string model_;
};

}  // namespace ragonite::llm::openai
