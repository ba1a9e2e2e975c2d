#include "ragforge/live_backend.hpp"

#include "ragforge/errors.hpp"

namespace ragforge::llm {

LiveBackend::LiveBackend(Config config) : config_(std::move(config)) {
    auto [origin, prefix] = split_base_url(config_.base_url);
    transport_ = std::make_shared<HttpTransport>(origin);
    path_prefix_ = prefix;
    if (config_.model.empty()) throw ValidationError("live backend requires a model name");
}

LiveBackend::LiveBackend(Config config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    path_prefix_ = split_base_url(config_.base_url).second;
    if (config_.model.empty()) throw ValidationError("live backend requires a model name");
    if (!transport_) throw ValidationError("live backend requires a transport");
}

Json LiveBackend::build_request_body(const ChatRequest& request) const {
    Json body = Json::object();
    body["model"] = config_.model;
    Json messages = Json::array();
    for (const ChatMessage& msg : request.messages) messages.push_back(message_to_wire(msg));
    body["messages"] = std::move(messages);
    body["temperature"] = request.params.temperature;
    if (request.params.max_tokens) body["max_tokens"] = *request.params.max_tokens;
    if (!request.tools.empty()) {
        Json tools = Json::array();
        for (const Json& t : request.tools) tools.push_back(t);
        body["tools"] = std::move(tools);
        body["tool_choice"] = "auto";
    }
    return body;
}

ChatMessage LiveBackend::complete(const ChatRequest& request) {
    HttpHeaders headers;
    if (!config_.api_key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    }

    const HttpResponse res =
        post_with_retries(*transport_, path_prefix_ + "/chat/completions",
                          build_request_body(request).dump(), headers, config_.retry);
    if (res.status != 200) {
        // Non-retryable HTTP error (4xx): the request itself is wrong.
        throw ProtocolError("chat endpoint returned HTTP " + std::to_string(res.status) + ": " +
                            res.body.substr(0, 300));
    }

    Json parsed;
    try {
        parsed = Json::parse(res.body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("chat endpoint returned invalid JSON: ") + e.what());
    }

    if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty()) {
        throw ProtocolError("chat endpoint returned no choices");
    }

    try {
        return message_from_wire(parsed["choices"][0].at("message"));
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("chat endpoint returned malformed message: ") + e.what());
    } catch (const ValidationError& e) {
        throw ProtocolError(std::string("chat endpoint returned malformed message: ") + e.what());
    }
}

}  // namespace ragforge::llm
