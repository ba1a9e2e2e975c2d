#include "ragforge/backend.hpp"

#include "ragforge/errors.hpp"

namespace ragforge::llm {

ChatMessage chat_complete(ChatBackend& backend, std::vector<ChatMessage> messages,
                          std::vector<Json> tools, const SamplingParams& params) {
    validate_conversation(messages);

    ChatRequest request;
    request.messages = std::move(messages);
    request.tools = std::move(tools);
    request.params = params;

    ChatMessage reply = backend.complete(request);
    if (reply.role != Role::kAssistant) {
        throw ProtocolError("backend returned a non-assistant message");
    }
    validate(reply);
    if (reply.content.empty() && reply.tool_calls.empty()) {
        throw ProtocolError("assistant returned neither content nor tool calls");
    }
    return reply;
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}

ChatMessage RecordingBackend::complete(const ChatRequest& request) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        recorded_.push_back(request);
    }
    return inner_->complete(request);
}

std::vector<ChatRequest> RecordingBackend::recorded() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return recorded_;
}

std::size_t RecordingBackend::call_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return recorded_.size();
}

std::string RecordingBackend::transcript_text() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out;
    for (const ChatRequest& req : recorded_) {
        for (const ChatMessage& msg : req.messages) {
            out += msg.content;
            out.push_back('\n');
            for (const ToolCall& call : msg.tool_calls) {
                out += call.name;
                out.push_back('\n');
                out += call.arguments.dump();
                out.push_back('\n');
            }
        }
        for (const Json& tool : req.tools) {
            out += tool.dump();
            out.push_back('\n');
        }
    }
    return out;
}

}  // namespace ragforge::llm
