#include "topoclinic/provider.hpp"

#include <algorithm>
#include <sstream>

#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"

namespace topoclinic {

using json = nlohmann::json;

std::string_view chat_role_name(ChatRole role) {
    switch (role) {
        case ChatRole::kSystem: return "system";
        case ChatRole::kUser: return "user";
        case ChatRole::kAssistant: return "assistant";
    }
    return "user";
}

ChatRole parse_chat_role(std::string_view name) {
    if (name == "system") return ChatRole::kSystem;
    if (name == "user") return ChatRole::kUser;
    if (name == "assistant") return ChatRole::kAssistant;
    throw Error(ErrorCode::kParse, "unknown chat role '" + std::string(name) + "'");
}

std::string_view provider_tag_name(ProviderTag tag) {
    switch (tag) {
        case ProviderTag::kLive: return "live";
        case ProviderTag::kScripted: return "scripted";
        case ProviderTag::kCacheHit: return "cache-hit";
    }
    return "live";
}

ProviderTag parse_provider_tag(std::string_view name) {
    if (name == "live") return ProviderTag::kLive;
    if (name == "scripted") return ProviderTag::kScripted;
    if (name == "cache-hit") return ProviderTag::kCacheHit;
    throw Error(ErrorCode::kParse, "unknown provider tag '" + std::string(name) + "'");
}

void ChatRequest::validate() const {
    if (messages.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "chat request has no messages");
    }
    if (messages.front().role != ChatRole::kSystem) {
        throw Error(ErrorCode::kInvalidArgument, "first chat message must have the system role");
    }
    for (const auto& message : messages) {
        if (message.role != ChatRole::kAssistant && message.content.empty()) {
            throw Error(ErrorCode::kInvalidArgument,
                        "empty " + std::string(chat_role_name(message.role)) + " message");
        }
    }
    if (!(temperature >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
    }
    if (max_tokens && *max_tokens <= 0) {
        throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
    }
}

std::string ChatRequest::rendered_prompt() const {
    std::string out;
    for (const auto& message : messages) {
        if (!out.empty()) out += "\n\n";
        out += message.content;
    }
    return out;
}

json to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", chat_role_name(m.role)}, {"content", m.content}});
    }
    json j{{"model", request.model}, {"messages", std::move(messages)},
           {"temperature", request.temperature}};
    j["max_tokens"] = request.max_tokens ? json(*request.max_tokens) : json(nullptr);
    return j;
}

ChatRequest chat_request_from_json(const json& j) {
    try {
        ChatRequest request;
        request.model = j.at("model").get<std::string>();
        for (const auto& m : j.at("messages")) {
            request.messages.push_back(
                {parse_chat_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
        }
        request.temperature = j.at("temperature").get<double>();
        if (auto it = j.find("max_tokens"); it != j.end() && !it->is_null()) {
            request.max_tokens = it->get<std::int64_t>();
        }
        return request;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("chat request: ") + e.what());
    }
}

json to_json(const ChatResponse& response) {
    return json{{"content", response.content},
                {"usage",
                 {{"prompt_tokens", response.usage.prompt_tokens},
                  {"completion_tokens", response.usage.completion_tokens}}},
                {"provider_tag", provider_tag_name(response.provider_tag)}};
}

ChatResponse chat_response_from_json(const json& j) {
    try {
        ChatResponse response;
        response.content = j.at("content").get<std::string>();
        response.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::int64_t>();
        response.usage.completion_tokens =
            j.at("usage").at("completion_tokens").get<std::int64_t>();
        response.provider_tag = parse_provider_tag(j.at("provider_tag").get<std::string>());
        return response;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("chat response: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

std::int64_t word_count(std::string_view text) {
    std::int64_t count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

bool matches(const ScriptEntry& entry, std::string_view prompt) {
    return std::all_of(entry.match_all.begin(), entry.match_all.end(),
                       [&](const std::string& s) { return prompt.find(s) != std::string_view::npos; });
}

}  // namespace

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script)
    : script_(std::move(script)), consumed_(script_.size(), false) {}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
    request.validate();
    const std::string prompt = request.rendered_prompt();
    std::lock_guard lock(mutex_);
    log_.push_back(prompt);
    bool any_live = false;
    for (std::size_t i = 0; i < script_.size(); ++i) {
        if (consumed_[i]) continue;
        any_live = true;
        if (!matches(script_[i], prompt)) continue;
        if (!script_[i].repeat) consumed_[i] = true;
        const std::string& content = script_[i].response;
        if (content.empty()) {
            throw Error(ErrorCode::kEmptyCompletion, "scripted entry has empty content");
        }
        return ChatResponse{content, {word_count(prompt), word_count(content)},
                            ProviderTag::kScripted};
    }
    if (!any_live) {
        throw Error(ErrorCode::kScriptExhausted, "script exhausted");
    }
    throw Error(ErrorCode::kNoMatch, "no script entry matches prompt: " + prompt.substr(0, 120));
}

std::vector<std::string> ScriptedProvider::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t ScriptedProvider::call_count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

std::vector<ScriptEntry> parse_script(const json& doc) {
    if (!doc.is_array() || doc.empty()) {
        throw Error(ErrorCode::kParse, "script must be a non-empty JSON array");
    }
    std::vector<ScriptEntry> entries;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& item = doc[i];
        try {
            ScriptEntry entry;
            const json& match = item.at("match");
            if (match.is_string()) {
                if (match.get<std::string>() != "*") entry.match_all.push_back(match.get<std::string>());
            } else {
                entry.match_all = match.get<std::vector<std::string>>();
            }
            entry.response = item.at("response").get<std::string>();
            entry.repeat = item.value("repeat", false);
            entries.push_back(std::move(entry));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParse, "script entry " + std::to_string(i) + ": " + e.what());
        }
    }
    return entries;
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
    try {
        return parse_script(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
}

}  // namespace topoclinic
