#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ragforge/util.hpp"

namespace ragforge::llm {

enum class Role { kSystem, kUser, kAssistant, kTool };

const char* to_string(Role role);
Role role_from_string(const std::string& s);

struct ToolCall {
    std::string call_id;
    std::string name;
    Json arguments;  // always an object after parsing

    bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
    Role role = Role::kUser;
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant messages only
    std::string tool_call_id;          // tool messages only

    static ChatMessage system(std::string text);
    static ChatMessage user(std::string text);
    static ChatMessage assistant(std::string text);
    static ChatMessage assistant_call(std::string text, std::vector<ToolCall> calls);
    static ChatMessage tool(std::string call_id, std::string text);

    bool operator==(const ChatMessage&) const = default;
};

// Per-message shape rules: tool_calls only on assistant messages,
// tool_call_id present iff role == tool.
void validate(const ChatMessage& msg);

// Whole-conversation shape: non-empty, exactly one system message at the
// front, tool replies only after an assistant turn that requested them and
// answering one of its call ids.
void validate_conversation(const std::vector<ChatMessage>& messages);

// OpenAI chat-completions wire format.
Json message_to_wire(const ChatMessage& msg);
ChatMessage message_from_wire(const Json& j);

// Tool arguments arrive either as a JSON object or as a JSON-encoded string;
// both normalize to an object. Anything else raises ProtocolError.
Json parse_tool_arguments(const Json& raw);

struct ToolRequest {
    std::vector<ToolCall> calls;
};
struct FinalText {
    std::string text;
};
using AssistantTurn = std::variant<ToolRequest, FinalText>;

// Classifies an assistant message. Empty content with no tool calls raises
// ProtocolError; tool calls win when both are present.
AssistantTurn parse_assistant_turn(const ChatMessage& msg);

// Name of the dense search tool exposed to every agent role.
inline constexpr const char* kDenseSearchToolName = "query_knowledge_base_dense";
// Name of the distractor writer tool exposed only during tree exploration.
inline constexpr const char* kDistractorWriterToolName = "write_distractor_docs";

// Function schemas in OpenAI "tools" format.
Json dense_search_tool_schema();
Json distractor_writer_tool_schema();

}  // namespace ragforge::llm
