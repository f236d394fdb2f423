#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace topoclinic {

enum class ChatRole { kSystem, kUser, kAssistant };

std::string_view chat_role_name(ChatRole role);
ChatRole parse_chat_role(std::string_view name);

struct ChatMessage {
    ChatRole role = ChatRole::kUser;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<std::int64_t> max_tokens;

    /// Throws kInvalidArgument when the request breaks its invariants.
    void validate() const;

    /// Message contents joined by blank lines; what scripted matchers see.
    std::string rendered_prompt() const;

    bool operator==(const ChatRequest&) const = default;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

enum class ProviderTag { kLive, kScripted, kCacheHit };

std::string_view provider_tag_name(ProviderTag tag);
ProviderTag parse_provider_tag(std::string_view name);

struct ChatResponse {
    std::string content;
    TokenUsage usage;
    ProviderTag provider_tag = ProviderTag::kLive;
};

nlohmann::json to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChatResponse& response);
ChatResponse chat_response_from_json(const nlohmann::json& j);

/// Chat-completion contract. Implementations must be safe to call from many
/// threads at once.
class Provider {
public:
    virtual ~Provider() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend

struct ScriptEntry {
    /// Every substring must occur in the rendered prompt. Empty = wildcard.
    std::vector<std::string> match_all;
    std::string response;
    /// Repeating entries answer every matching call and are never consumed.
    bool repeat = false;

    static ScriptEntry wildcard(std::string response, bool repeat = false) {
        return ScriptEntry{{}, std::move(response), repeat};
    }
    static ScriptEntry on(std::string substring, std::string response) {
        return ScriptEntry{{std::move(substring)}, std::move(response), false};
    }
};

/// Offline deterministic backend. Each call consumes the first live entry
/// whose matcher accepts the rendered prompt; every call is logged.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(std::vector<ScriptEntry> script);

    ChatResponse complete(const ChatRequest& request) override;

    /// Rendered prompts in call order.
    std::vector<std::string> call_log() const;
    std::size_t call_count() const;

private:
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> script_;
    std::vector<bool> consumed_;
    std::vector<std::string> log_;
};

/// Script file: JSON array of {"match": string | [string...] | "*", "response":
/// string, "repeat": bool?}.
std::vector<ScriptEntry> load_script(const std::filesystem::path& path);
std::vector<ScriptEntry> parse_script(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Live OpenAI-compatible backend

struct HttpProviderOptions {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;
    std::chrono::seconds timeout{120};
};

class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderOptions options);
    ChatResponse complete(const ChatRequest& request) override;

    /// Request body exactly as sent on the wire.
    static nlohmann::json build_body(const ChatRequest& request);
    /// Parses a chat-completions response body; throws kTransport/kEmptyCompletion.
    static ChatResponse parse_body(std::string_view body);

private:
    HttpProviderOptions options_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

// ---------------------------------------------------------------------------
// Decorators

/// Stable content key: hex SHA-256 over (model, messages, temperature, max_tokens).
std::string cache_key(const ChatRequest& request);

/// Content-addressed response cache, one JSON file per key. Errors from the
/// inner provider are never stored.
class CachedProvider : public Provider {
public:
    CachedProvider(std::shared_ptr<Provider> inner, std::filesystem::path cache_dir);
    ChatResponse complete(const ChatRequest& request) override;

    std::size_t inner_calls() const;

private:
    std::mutex& key_mutex(const std::string& key);

    std::shared_ptr<Provider> inner_;
    std::filesystem::path dir_;
    std::array<std::mutex, 64> shards_;
    std::atomic<std::size_t> inner_calls_{0};
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{500};
    /// Fraction of the backoff added as uniform random jitter, in [0, 1].
    double jitter = 0.25;
};

/// Retries transient failures (kTransport, kRateLimited) with exponential
/// backoff; everything else propagates on the first throw.
class RetryingProvider : public Provider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy,
                     Sleeper sleeper = {}, std::uint32_t seed = 0x7c11u);
    ChatResponse complete(const ChatRequest& request) override;

    std::size_t attempts() const { return attempts_.load(); }

private:
    std::chrono::milliseconds backoff(int attempt);

    std::shared_ptr<Provider> inner_;
    RetryPolicy policy_;
    Sleeper sleeper_;
    std::mutex rng_mutex_;
    std::mt19937 rng_;
    std::atomic<std::size_t> attempts_{0};
};

/// Token bucket refilled at requests_per_minute / 60 tokens per second.
class TokenBucket {
public:
    using Clock = std::chrono::steady_clock;

    TokenBucket(double requests_per_minute, double capacity = 1.0);

    /// Blocks until a token is available.
    void acquire();

private:
    std::mutex mutex_;
    double rate_per_sec_;
    double capacity_;
    double tokens_;
    Clock::time_point last_;
};

class RateLimitedProvider : public Provider {
public:
    RateLimitedProvider(std::shared_ptr<Provider> inner, std::shared_ptr<TokenBucket> bucket);
    ChatResponse complete(const ChatRequest& request) override;

private:
    std::shared_ptr<Provider> inner_;
    std::shared_ptr<TokenBucket> bucket_;
};

}  // namespace topoclinic
