#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "autoresearch/llm_gateway.hpp"

#include <json.hpp>

namespace autoresearch {

using nlohmann::json;

namespace {

constexpr std::size_t kExcerptBytes = 512;

std::string excerpt(std::string_view body) {
    return std::string(body.substr(0, kExcerptBytes));
}

} // namespace

std::string wire_request_body(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    json body = {
        {"model", request.model},
        {"messages", std::move(messages)},
        {"temperature", request.temperature},
    };
    if (request.max_output_tokens) body["max_tokens"] = *request.max_output_tokens;
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

ChatResponse parse_wire_response(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw WireError(200, excerpt(body), std::string("malformed response body: ") + e.what());
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
        throw WireError(200, excerpt(body), "response has no choices");
    }
    const json& choice = doc["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
        throw WireError(200, excerpt(body), "response choice has no message content");
    }
    ChatResponse response;
    response.content = choice["message"]["content"].get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
        auto reason = finish_reason_from_string(choice["finish_reason"].get<std::string>());
        // Provider-specific reasons (content_filter, tool_calls) map to error.
        response.finish_reason = reason.value_or(FinishReason::error);
    }
    if (doc.contains("usage") && doc["usage"].is_object()) {
        response.usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
        response.usage.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
    }
    return response;
}

WireBackend::WireBackend(WireConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw InvalidRequest("wire backend needs a base URL");
}

ChatResponse WireBackend::send(const ChatRequest& request) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(std::chrono::seconds(60));
    if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(config_.path, wire_request_body(request), "application/json");
    if (!result) {
        throw WireError(0, "", "transport error talking to " + config_.base_url + ": " +
                                   httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) {
        throw WireError(result->status, excerpt(result->body),
                        "chat endpoint returned HTTP " + std::to_string(result->status));
    }
    ChatResponse response = parse_wire_response(result->body);
    response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return response;
}

} // namespace autoresearch
