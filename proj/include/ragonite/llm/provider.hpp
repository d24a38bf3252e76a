#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ragonite/error.hpp"

namespace ragonite::llm {

using Vector = std::vector<double>;

struct ChatRequest {
    std::string template_id;  // "rephrase", "answer", "judge", "followup"
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::string model_id;
    std::optional<std::uint64_t> seed;  // sampling seed; Monte Carlo draws vary it
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// One batched call; returns one vector per text in input order.
    virtual std::vector<Vector> embed(std::span<const std::string> texts) = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string model_id() const = 0;
};

class RelevanceScorer {
public:
    virtual ~RelevanceScorer() = default;
    /// Scores each document against the query; higher is more relevant.
    virtual std::vector<double> score(const std::string& query, std::span<const std::string> documents) = 0;
    virtual std::string model_id() const = 0;
};

/// Process-wide cap on in-flight provider calls.
class ConcurrencyLimit {
public:
    explicit ConcurrencyLimit(std::size_t slots = 8) : free_(slots == 0 ? 1 : slots) {}

    class Slot {
    public:
        explicit Slot(ConcurrencyLimit& owner) : owner_(&owner) { owner_->acquire(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;
        ~Slot() { owner_->release(); }

    private:
        ConcurrencyLimit* owner_;
    };

    Slot acquire_slot() { return Slot(*this); }

private:
    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return free_ > 0; });
        --free_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++free_;
        }
        cv_.notify_one();
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t free_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;
};

/// Runs `fn`, retrying retryable ProviderFailures with exponential backoff.
/// Non-retryable failures and the final failure propagate unchanged.
template <class Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const ProviderFailure& e) {
            if (!e.retryable() || attempt >= policy.max_retries) throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline void normalize(Vector& v) {
    const double n = l2_norm(v);
    if (n == 0.0 || !std::isfinite(n)) throw ProviderFailure("embedding", "zero or non-finite vector");
    for (auto& x : v) x /= n;
}

/// All model handles a pipeline run needs. Optional slots fall back as documented.
struct Providers {
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<ChatProvider> counterfactual_chat;  // defaults to `chat`
    std::shared_ptr<ChatProvider> judge;                // defaults to `chat`
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<EmbeddingProvider> attribution_embedder;  // defaults to `embedder`
    std::shared_ptr<RelevanceScorer> scorer;

    ChatProvider& cf_chat() const { return counterfactual_chat ? *counterfactual_chat : *chat; }
    ChatProvider& judge_chat() const { return judge ? *judge : *chat; }
    EmbeddingProvider& attr_embedder() const {
        return attribution_embedder ? *attribution_embedder : *embedder;
    }
};

/// Decorators that route every call through one shared ConcurrencyLimit.
class LimitedChat : public ChatProvider {
public:
    LimitedChat(std::shared_ptr<ChatProvider> inner, std::shared_ptr<ConcurrencyLimit> limit)
        : inner_(std::move(inner)), limit_(std::move(limit)) {}
    std::string complete(const ChatRequest& r) override {
        auto slot = limit_->acquire_slot();
        return inner_->complete(r);
    }
    std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<ChatProvider> inner_;
    std::shared_ptr<ConcurrencyLimit> limit_;
};

class LimitedEmbedder : public EmbeddingProvider {
public:
    LimitedEmbedder(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<ConcurrencyLimit> limit)
        : inner_(std::move(inner)), limit_(std::move(limit)) {}
    std::vector<Vector> embed(std::span<const std::string> texts) override {
        auto slot = limit_->acquire_slot();
        return inner_->embed(texts);
    }
    std::size_t dimension() const override { return inner_->dimension(); }
    std::string model_id() const override { return inner_->model_id(); }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::shared_ptr<ConcurrencyLimit> limit_;
};

class LimitedScorer : public RelevanceScorer {
public:
    LimitedScorer(std::shared_ptr<RelevanceScorer> inner, std::shared_ptr<ConcurrencyLimit> limit)
        : inner_(std::move(inner)), limit_(std::move(limit)) {}
    std::vector<double> score(const std::string& q, std::span<const std::string> docs) override {
        auto slot = limit_->acquire_slot();
        return inner_->score(q, docs);
    }
    std::string model_id() const override { return inner_->model_id(); }

private:
    std::shared_ptr<RelevanceScorer> inner_;
    std::shared_ptr<ConcurrencyLimit> limit_;
};

/// Wraps every provider in `p` so that at most `slots` calls are in flight in total.
inline Providers limit_concurrency(const Providers& p, std::size_t slots) {
    auto limit = std::make_shared<ConcurrencyLimit>(slots);
    Providers out;
    auto chat = [&](const std::shared_ptr<ChatProvider>& c) -> std::shared_ptr<ChatProvider> {
        return c ? std::make_shared<LimitedChat>(c, limit) : nullptr;
    };
    auto emb = [&](const std::shared_ptr<EmbeddingProvider>& e) -> std::shared_ptr<EmbeddingProvider> {
        return e ? std::make_shared<LimitedEmbedder>(e, limit) : nullptr;
    };
    out.chat = chat(p.chat);
    out.counterfactual_chat = chat(p.counterfactual_chat);
    out.judge = chat(p.judge);
    out.embedder = emb(p.embedder);
    out.attribution_embedder = emb(p.attribution_embedder);
    out.scorer = p.scorer ? std::make_shared<LimitedScorer>(p.scorer, limit) : nullptr;
    return out;
}

}  // namespace ragonite::llm
