#include <httplib.h>

#include "topoclinic/error.hpp"
#include "topoclinic/provider.hpp"

namespace topoclinic {

using json = nlohmann::json;

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
    std::string_view url = options_.base_url;
    while (!url.empty() && url.back() == '/') url.remove_suffix(1);
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw Error(ErrorCode::kConfig, "base url must start with http:// or https://: " +
                                            options_.base_url);
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw Error(ErrorCode::kConfig, "unsupported url scheme in " + options_.base_url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string_view::npos) {
        scheme_host_port_ = std::string(url);
    } else {
        scheme_host_port_ = std::string(url.substr(0, path_start));
        path_prefix_ = std::string(url.substr(path_start));
    }
}

json HttpProvider::build_body(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", chat_role_name(m.role)}, {"content", m.content}});
    }
    json body{{"model", request.model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature}};
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
    return body;
}

ChatResponse HttpProvider::parse_body(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kTransport, std::string("malformed completion body: ") + e.what());
    }
    ChatResponse response;
    response.provider_tag = ProviderTag::kLive;
    try {
        const json& message = doc.at("choices").at(0).at("message");
        if (auto it = message.find("content"); it != message.end() && it->is_string()) {
            response.content = it->get<std::string>();
        }
        if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
            response.usage.prompt_tokens = std::max<std::int64_t>(0, usage->value("prompt_tokens", 0));
            response.usage.completion_tokens =
                std::max<std::int64_t>(0, usage->value("completion_tokens", 0));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kTransport, std::string("unexpected completion shape: ") + e.what());
    }
    if (response.content.empty()) {
        throw Error(ErrorCode::kEmptyCompletion, "completion has empty content");
    }
    return response;
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
    request.validate();
    httplib::Client client(scheme_host_port_);
    const auto timeout = static_cast<time_t>(options_.timeout.count());
    client.set_connection_timeout(timeout, 0);
    client.set_read_timeout(timeout, 0);
    client.set_write_timeout(timeout, 0);
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }
    auto result = client.Post(path_prefix_ + "/chat/completions", headers,
                              build_body(request).dump(), "application/json");
    if (!result) {
        throw Error(ErrorCode::kTransport,
                    "POST " + options_.base_url + "/chat/completions failed: " +
                        httplib::to_string(result.error()));
    }
    if (result->status == 429) {
        throw Error(ErrorCode::kRateLimited, "endpoint returned 429");
    }
    if (result->status < 200 || result->status >= 300) {
        throw Error(ErrorCode::kTransport, "endpoint returned HTTP " +
                                               std::to_string(result->status) + ": " +
                                               result->body.substr(0, 200));
    }
    return parse_body(result->body);
}

}  // namespace topoclinic
