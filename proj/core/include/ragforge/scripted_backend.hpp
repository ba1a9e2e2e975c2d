#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ragforge/backend.hpp"

namespace ragforge::llm {

// One scripted assistant turn. Entries either all carry keys (keyed mode)
// or none do (sequential mode).
struct ScriptEntry {
    std::optional<std::string> key;
    ChatMessage turn;
};

// Extracts the text a keyed script matches against.
using KeyFn = std::function<std::string(const std::vector<ChatMessage>&)>;

// Every user message, newline-joined. Default key source: stable across
// corrective re-prompts, which append rather than replace user content.
std::string all_user_text(const std::vector<ChatMessage>& messages);
// Just the last user message.
std::string last_user_text(const std::vector<ChatMessage>& messages);

// Offline stand-in for a chat model. Sequential mode replays entries in
// order; keyed mode serves the first unconsumed entry whose key is a
// substring of the extracted text, so interleaved agents each get their own
// turns. Exhaustion (or no key match) raises ScriptUnderrun.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> script, KeyFn key_fn = all_user_text);

    // JSONL, one entry per line:
    //   {"key"?: str, "content": str,
    //    "tool_calls"?: [{"name": str, "arguments": object|string, "id"?: str}]}
    // Missing call ids are assigned from the entry index at load time, so a
    // given script always yields the same ids.
    static std::shared_ptr<ScriptedBackend> from_jsonl(const std::filesystem::path& path,
                                                       KeyFn key_fn = all_user_text);

    ChatMessage complete(const ChatRequest& request) override;

    std::size_t calls_made() const;
    std::size_t remaining() const;
    std::vector<ChatRequest> recorded() const;
    std::string transcript_text() const;

    // Keyed scripts tolerate out-of-order consumption; sequential ones do not,
    // so callers running work in parallel should check this and serialize.
    bool keyed() const { return keyed_; }

private:
    std::vector<ScriptEntry> script_;
    std::vector<bool> consumed_;
    KeyFn key_fn_;
    bool keyed_ = false;
    std::size_t next_ = 0;
    std::size_t calls_ = 0;
    std::vector<ChatRequest> recorded_;
    mutable std::mutex mutex_;
};

// Parses one script entry (without the key) into an assistant message.
ChatMessage script_turn_from_json(const Json& j, std::size_t entry_index);

}  // namespace ragforge::llm
