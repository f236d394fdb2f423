#include <functional>

#include <spdlog/spdlog.h>

#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/hash.hpp"
#include "topoclinic/provider.hpp"

namespace topoclinic {

using json = nlohmann::json;

std::string cache_key(const ChatRequest& request) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    return sha256_hex(to_json(request).dump());
}

CachedProvider::CachedProvider(std::shared_ptr<Provider> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw Error(ErrorCode::kIo, "cannot create cache dir " + dir_.string());
    }
}

std::mutex& CachedProvider::key_mutex(const std::string& key) {
    return shards_[std::hash<std::string>{}(key) % shards_.size()];
}

std::size_t CachedProvider::inner_calls() const { return inner_calls_.load(); }

ChatResponse CachedProvider::complete(const ChatRequest& request) {
    request.validate();
    const std::string key = cache_key(request);
    const auto path = dir_ / (key + ".json");
    std::lock_guard lock(key_mutex(key));
    if (std::filesystem::exists(path)) {
        try {
            const json entry = json::parse(read_file(path));
            if (chat_request_from_json(entry.at("request")) != request) {
                throw Error(ErrorCode::kCacheCorrupt, "stored request differs from lookup");
            }
            ChatResponse response = chat_response_from_json(entry.at("response"));
            if (response.content.empty()) {
                throw Error(ErrorCode::kCacheCorrupt, "stored response is empty");
            }
            response.provider_tag = ProviderTag::kCacheHit;
            return response;
        } catch (const std::exception& e) {
            spdlog::warn("cache entry {} unreadable, treating as miss: {}", path.string(), e.what());
        }
    }
    ++inner_calls_;
    ChatResponse response = inner_->complete(request);
    json entry{{"key", key}, {"request", to_json(request)}, {"response", to_json(response)}};
    write_file_atomic(path, entry.dump(2) + "\n");
    return response;
}

}  // namespace topoclinic
