#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ragforge/chat.hpp"

namespace ragforge::llm {

struct SamplingParams {
    double temperature = 0.7;
    std::optional<int> max_tokens;
};

// Everything a backend sees for one completion. Replay backends record these
// verbatim, which is what the prompt-content assertions in tests run against.
struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::vector<Json> tools;
    SamplingParams params;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    // Returns the assistant turn for the request. Implementations throw
    // TransportError / ProtocolError / ScriptUnderrun.
    virtual ChatMessage complete(const ChatRequest& request) = 0;
};

// Single entry point used by the agent loops. Validates the conversation
// shape on the way in and the assistant contract on the way out.
ChatMessage chat_complete(ChatBackend& backend, std::vector<ChatMessage> messages,
                          std::vector<Json> tools, const SamplingParams& params);

// Decorator that keeps a transcript of every request it forwards.
// Thread-safe; the pipeline shares one recorder across workers.
class RecordingBackend : public ChatBackend {
public:
    explicit RecordingBackend(std::shared_ptr<ChatBackend> inner);

    ChatMessage complete(const ChatRequest& request) override;

    std::vector<ChatRequest> recorded() const;
    std::size_t call_count() const;

    // Every prompt-side message content concatenated, plus serialized tool
    // schemas. Vocabulary scans (e.g. the teacher-agnosticism check) run
    // over this string.
    std::string transcript_text() const;

private:
    std::shared_ptr<ChatBackend> inner_;
    mutable std::mutex mutex_;
    std::vector<ChatRequest> recorded_;
};

}  // namespace ragforge::llm
