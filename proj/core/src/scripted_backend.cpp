#include "ragforge/scripted_backend.hpp"

#include "ragforge/errors.hpp"

namespace ragforge::llm {

std::string all_user_text(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (const ChatMessage& msg : messages) {
        if (msg.role != Role::kUser) continue;
        if (!out.empty()) out.push_back('\n');
        out += msg.content;
    }
    return out;
}

std::string last_user_text(const std::vector<ChatMessage>& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == Role::kUser) return it->content;
    }
    return "";
}

ChatMessage script_turn_from_json(const Json& j, std::size_t entry_index) {
    ChatMessage msg;
    msg.role = Role::kAssistant;
    msg.content = j.value("content", std::string());
    if (j.contains("tool_calls") && !j["tool_calls"].is_null()) {
        if (!j["tool_calls"].is_array()) {
            throw ParseError("script entry " + std::to_string(entry_index + 1) +
                             ": tool_calls must be an array");
        }
        std::size_t call_idx = 0;
        for (const Json& c : j["tool_calls"]) {
            ToolCall call;
            call.name = c.at("name").get<std::string>();
            call.arguments = parse_tool_arguments(c.at("arguments"));
            if (c.contains("id") && !c["id"].is_null()) {
                call.call_id = c["id"].get<std::string>();
            } else {
                call.call_id = "call-" + std::to_string(entry_index);
                if (call_idx > 0) call.call_id += "-" + std::to_string(call_idx);
            }
            msg.tool_calls.push_back(std::move(call));
            ++call_idx;
        }
    }
    if (msg.content.empty() && msg.tool_calls.empty()) {
        throw ParseError("script entry " + std::to_string(entry_index + 1) +
                         ": needs content or tool_calls");
    }
    return msg;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script, KeyFn key_fn)
    : script_(std::move(script)), key_fn_(std::move(key_fn)) {
    consumed_.assign(script_.size(), false);
    std::size_t with_key = 0;
    for (const ScriptEntry& e : script_) {
        if (e.key.has_value()) ++with_key;
    }
    if (with_key != 0 && with_key != script_.size()) {
        throw ValidationError("replay script mixes keyed and sequential entries");
    }
    keyed_ = with_key == script_.size() && !script_.empty();
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_jsonl(const std::filesystem::path& path,
                                                             KeyFn key_fn) {
    std::vector<Json> rows = util::read_jsonl_file(path);
    std::vector<ScriptEntry> script;
    script.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ScriptEntry entry;
        if (rows[i].contains("key") && !rows[i]["key"].is_null()) {
            entry.key = rows[i]["key"].get<std::string>();
        }
        entry.turn = script_turn_from_json(rows[i], i);
        script.push_back(std::move(entry));
    }
    return std::make_shared<ScriptedBackend>(std::move(script), std::move(key_fn));
}

ChatMessage ScriptedBackend::complete(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    recorded_.push_back(request);
    ++calls_;

    if (keyed_) {
        const std::string text = key_fn_(request.messages);
        for (std::size_t i = 0; i < script_.size(); ++i) {
            if (consumed_[i]) continue;
            if (text.find(*script_[i].key) != std::string::npos) {
                consumed_[i] = true;
                return script_[i].turn;
            }
        }
        throw ScriptUnderrun("script underrun: no unconsumed entry matches request (key text: \"" +
                             text.substr(0, 160) + "\")");
    }

    while (next_ < script_.size() && consumed_[next_]) ++next_;
    if (next_ >= script_.size()) {
        throw ScriptUnderrun("script underrun after " + std::to_string(script_.size()) + " turns");
    }
    consumed_[next_] = true;
    return script_[next_++].turn;
}

std::size_t ScriptedBackend::calls_made() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t left = 0;
    for (bool c : consumed_) {
        if (!c) ++left;
    }
    return left;
}

std::vector<ChatRequest> ScriptedBackend::recorded() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return recorded_;
}

std::string ScriptedBackend::transcript_text() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out;
    for (const ChatRequest& req : recorded_) {
        for (const ChatMessage& msg : req.messages) {
            out += msg.content;
            out.push_back('\n');
        }
    }
    return out;
}

}  // namespace ragforge::llm
