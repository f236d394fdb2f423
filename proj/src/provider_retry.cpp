#include <algorithm>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "topoclinic/error.hpp"
#include "topoclinic/provider.hpp"

namespace topoclinic {

RetryingProvider::RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy,
                                   Sleeper sleeper, std::uint32_t seed)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)), rng_(seed) {
    if (policy_.max_attempts < 1) {
        throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
    }
    if (policy_.jitter < 0.0 || policy_.jitter > 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "jitter must be in [0, 1]");
    }
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

std::chrono::milliseconds RetryingProvider::backoff(int attempt) {
    const double base = static_cast<double>(policy_.base_backoff.count()) *
                        std::pow(2.0, static_cast<double>(attempt - 1));
    double jitter = 0.0;
    if (policy_.jitter > 0.0) {
        std::lock_guard lock(rng_mutex_);
        jitter = std::uniform_real_distribution<double>(0.0, policy_.jitter)(rng_) * base;
    }
    return std::chrono::milliseconds(static_cast<std::int64_t>(base + jitter));
}

ChatResponse RetryingProvider::complete(const ChatRequest& request) {
    for (int attempt = 1;; ++attempt) {
        ++attempts_;
        try {
            return inner_->complete(request);
        } catch (const Error& e) {
            if (!e.transient() || attempt >= policy_.max_attempts) throw;
            const auto wait = backoff(attempt);
            spdlog::debug("attempt {} failed ({}), retrying in {} ms", attempt, e.what(),
                          wait.count());
            sleeper_(wait);
        }
    }
}

TokenBucket::TokenBucket(double requests_per_minute, double capacity)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, capacity)),
      tokens_(capacity_),
      last_(Clock::now()) {
    if (!(requests_per_minute > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "requests per minute must be positive");
    }
}

void TokenBucket::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = Clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait_sec = (1.0 - tokens_) / rate_per_sec_;
        // Other waiters queue on the mutex.
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_sec));
    }
}

RateLimitedProvider::RateLimitedProvider(std::shared_ptr<Provider> inner,
                                         std::shared_ptr<TokenBucket> bucket)
    : inner_(std::move(inner)), bucket_(std::move(bucket)) {}

ChatResponse RateLimitedProvider::complete(const ChatRequest& request) {
    bucket_->acquire();
    return inner_->complete(request);
}

}  // namespace topoclinic
