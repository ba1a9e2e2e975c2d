#include "ragforge/chat.hpp"

#include <set>

#include "ragforge/errors.hpp"

namespace ragforge::llm {

const char* to_string(Role role) {
    switch (role) {
        case Role::kSystem: return "system";
        case Role::kUser: return "user";
        case Role::kAssistant: return "assistant";
        case Role::kTool: return "tool";
    }
    return "user";
}

Role role_from_string(const std::string& s) {
    if (s == "system") return Role::kSystem;
    if (s == "user") return Role::kUser;
    if (s == "assistant") return Role::kAssistant;
    if (s == "tool") return Role::kTool;
    throw ValidationError("unknown chat role: " + s);
}

ChatMessage ChatMessage::system(std::string text) {
    return ChatMessage{Role::kSystem, std::move(text), {}, {}};
}
ChatMessage ChatMessage::user(std::string text) {
    return ChatMessage{Role::kUser, std::move(text), {}, {}};
}
ChatMessage ChatMessage::assistant(std::string text) {
    return ChatMessage{Role::kAssistant, std::move(text), {}, {}};
}
ChatMessage ChatMessage::assistant_call(std::string text, std::vector<ToolCall> calls) {
    return ChatMessage{Role::kAssistant, std::move(text), std::move(calls), {}};
}
ChatMessage ChatMessage::tool(std::string call_id, std::string text) {
    return ChatMessage{Role::kTool, std::move(text), {}, std::move(call_id)};
}

void validate(const ChatMessage& msg) {
    if (!msg.tool_calls.empty() && msg.role != Role::kAssistant) {
        throw ValidationError("tool_calls are only valid on assistant messages");
    }
    if (msg.role == Role::kTool && msg.tool_call_id.empty()) {
        throw ValidationError("tool message requires tool_call_id");
    }
    if (msg.role != Role::kTool && !msg.tool_call_id.empty()) {
        throw ValidationError("tool_call_id is only valid on tool messages");
    }
    for (const ToolCall& call : msg.tool_calls) {
        if (call.name.empty()) throw ValidationError("tool call requires a name");
        if (call.call_id.empty()) throw ValidationError("tool call requires an id");
        if (!call.arguments.is_object()) throw ValidationError("tool call arguments must be an object");
    }
}

void validate_conversation(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw ValidationError("conversation must be non-empty");
    if (messages.front().role != Role::kSystem) {
        throw ValidationError("conversation must start with a system message");
    }

    std::set<std::string> open_call_ids;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        const ChatMessage& msg = messages[i];
        validate(msg);
        if (i > 0 && msg.role == Role::kSystem) {
            throw ValidationError("only the first message may be a system message");
        }
        if (msg.role == Role::kTool) {
            if (open_call_ids.find(msg.tool_call_id) == open_call_ids.end()) {
                throw ValidationError("tool message answers unknown call id: " + msg.tool_call_id);
            }
            open_call_ids.erase(msg.tool_call_id);
            continue;
        }
        if (!open_call_ids.empty()) {
            throw ValidationError("pending tool calls must be answered before the next turn");
        }
        if (msg.role == Role::kAssistant) {
            for (const ToolCall& call : msg.tool_calls) open_call_ids.insert(call.call_id);
        }
    }
}

Json message_to_wire(const ChatMessage& msg) {
    Json j = Json::object();
    j["role"] = to_string(msg.role);
    j["content"] = msg.content;
    if (!msg.tool_calls.empty()) {
        Json calls = Json::array();
        for (const ToolCall& call : msg.tool_calls) {
            Json c = Json::object();
            c["id"] = call.call_id;
            c["type"] = "function";
            c["function"] = Json::object();
            c["function"]["name"] = call.name;
            c["function"]["arguments"] = call.arguments.dump();
            calls.push_back(std::move(c));
        }
        j["tool_calls"] = std::move(calls);
    }
    if (msg.role == Role::kTool) j["tool_call_id"] = msg.tool_call_id;
    return j;
}

Json parse_tool_arguments(const Json& raw) {
    if (raw.is_object()) return raw;
    if (raw.is_string()) {
        Json parsed;
        try {
            parsed = Json::parse(raw.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("tool arguments are not valid JSON: ") + e.what());
        }
        if (!parsed.is_object()) throw ProtocolError("tool arguments must decode to an object");
        return parsed;
    }
    throw ProtocolError("tool arguments must be an object or a JSON-encoded string");
}

ChatMessage message_from_wire(const Json& j) {
    ChatMessage msg;
    msg.role = role_from_string(j.at("role").get<std::string>());
    if (j.contains("content") && !j["content"].is_null()) {
        msg.content = j["content"].get<std::string>();
    }
    if (j.contains("tool_calls") && !j["tool_calls"].is_null()) {
        for (const Json& c : j["tool_calls"]) {
            ToolCall call;
            call.call_id = c.value("id", std::string());
            const Json& fn = c.at("function");
            call.name = fn.at("name").get<std::string>();
            call.arguments = parse_tool_arguments(fn.at("arguments"));
            msg.tool_calls.push_back(std::move(call));
        }
    }
    if (j.contains("tool_call_id") && !j["tool_call_id"].is_null()) {
        msg.tool_call_id = j["tool_call_id"].get<std::string>();
    }
    validate(msg);
    return msg;
}

AssistantTurn parse_assistant_turn(const ChatMessage& msg) {
    if (msg.role != Role::kAssistant) {
        throw ProtocolError("expected an assistant message, got " + std::string(to_string(msg.role)));
    }
    if (!msg.tool_calls.empty()) return ToolRequest{msg.tool_calls};
    if (msg.content.empty()) {
        throw ProtocolError("assistant returned neither content nor tool calls");
    }
    return FinalText{msg.content};
}

Json dense_search_tool_schema() {
    return Json::parse(R"JSON({
  "type": "function",
  "function": {
    "name": "query_knowledge_base_dense",
    "description": "[Dense Search] Semantic vector search over the knowledge base. Falls back to configured top_k or 5.",
    "parameters": {
      "type": "object",
      "properties": {
        "query": {
          "type": "string",
          "description": "Natural language question or statement to retrieve against the KB.",
          "minLength": 1
        },
        "top_k": {
          "type": "integer",
          "description": "Override for number of results; positive integer.",
          "minimum": 1
        }
      },
      "required": ["query"]
    }
  }
})JSON");
}

Json distractor_writer_tool_schema() {
    return Json::parse(R"JSON({
  "type": "function",
  "function": {
    "name": "write_distractor_docs",
    "description": "Store hand-written negative documents alongside the knowledge base. Pass the true fact being played against, the dimension, the guideline you followed to keep the texts disambiguatable, and the full text of each document.",
    "parameters": {
      "type": "object",
      "properties": {
        "original_fact": {
          "type": "string",
          "description": "The true fact the negative documents are confusable with."
        },
        "distractor_type": {
          "type": "string",
          "enum": ["doppelganger", "false_shortcut", "fragmented_puzzle", "subjective_fallacy"]
        },
        "creating_guideline": {
          "type": "string",
          "description": "How the texts stay precise and logically distinguishable from the truth."
        },
        "distractor_texts": {
          "type": "array",
          "items": {"type": "string", "minLength": 1},
          "minItems": 1,
          "description": "Full text of each negative document, written by you."
        }
      },
      "required": ["original_fact", "distractor_type", "creating_guideline", "distractor_texts"]
    }
  }
})JSON");
}

}  // namespace ragforge::llm
