#include "ragforge/dataset_io.hpp"

#include "ragforge/errors.hpp"
#include "ragforge/prompts.hpp"

namespace ragforge::dataset {

TrainingSample to_training_sample(const quality::ScoredSample& sample,
                                  const std::string& config_hash) {
    if (!sample.accepted) {
        throw ValidationError("only accepted samples can be exported (qa_id=" + sample.qa.qa_id +
                              ", reject_reason=" + sample.reject_reason + ")");
    }
    const elicit::Trajectory& t = sample.trajectory;
    if (t.terminated_by != elicit::Termination::kAnswer) {
        throw ValidationError("accepted sample has a non-answer trajectory (qa_id=" +
                              sample.qa.qa_id + ")");
    }
    if (t.prompts_version != prompts::kVersion) {
        throw ValidationError("trajectory was elicited under prompts_version " +
                              std::to_string(t.prompts_version) + " but this build exports " +
                              std::to_string(prompts::kVersion));
    }

    TrainingSample out;
    out.messages.push_back(
        SampleMessage{llm::Role::kSystem, prompts::teacher_rollout_system(), {}, false});
    out.messages.push_back(SampleMessage{llm::Role::kUser, t.question, {}, false});
    for (const elicit::TrajectoryStep& step : t.steps) {
        out.messages.push_back(SampleMessage{llm::Role::kAssistant, step.thought, {step.action}, true});
        out.messages.push_back(SampleMessage{
            llm::Role::kTool, elicit::render_observation(step.observation, t.observation_char_cap),
            {}, false});
    }
    out.messages.push_back(SampleMessage{llm::Role::kAssistant, t.final_raw_text, {}, true});

    out.meta.qa_id = sample.qa.qa_id;
    out.meta.tree_id = sample.qa.tree_id;
    out.meta.f1 = sample.f1;
    out.meta.seed = t.rng_seed;
    out.meta.config_hash = config_hash;
    out.meta.schema_version = kSchemaVersion;
    return out;
}

MaskReport verify_masks(const TrainingSample& sample) {
    MaskReport report;
    const auto fail = [&report](const std::string& what) {
        report.passed = false;
        report.violations.push_back(what);
    };

    const std::vector<SampleMessage>& m = sample.messages;
    if (m.size() < 3 || m.size() % 2 == 0) {
        fail("message count must be odd and at least 3, got " + std::to_string(m.size()));
        return report;
    }

    if (m[0].role != llm::Role::kSystem) fail("message 0 must be system");
    if (m[1].role != llm::Role::kUser) fail("message 1 must be user");

    for (std::size_t i = 2; i + 1 < m.size(); i += 2) {
        const std::string at = "message " + std::to_string(i);
        if (m[i].role != llm::Role::kAssistant) fail(at + " must be assistant");
        if (m[i].tool_calls.empty()) fail(at + " must carry a tool call");
        if (m[i + 1].role != llm::Role::kTool) {
            fail("message " + std::to_string(i + 1) + " must be a tool reply");
        }
    }

    const SampleMessage& last = m.back();
    if (last.role != llm::Role::kAssistant) fail("final message must be assistant");
    if (!last.tool_calls.empty()) fail("final assistant message must not call tools");
    if (last.content.empty()) fail("final assistant message must carry the answer text");

    for (std::size_t i = 0; i < m.size(); ++i) {
        const bool should_learn = m[i].role == llm::Role::kAssistant;
        if (m[i].loss != should_learn) {
            fail("message " + std::to_string(i) + ": loss must be " +
                 (should_learn ? "true" : "false") + " for role " +
                 llm::to_string(m[i].role));
        }
    }
    return report;
}

Json sample_to_json(const TrainingSample& sample) {
    Json j = Json::object();
    Json messages = Json::array();
    for (const SampleMessage& msg : sample.messages) {
        Json m = Json::object();
        m["role"] = llm::to_string(msg.role);
        m["content"] = msg.content;
        if (!msg.tool_calls.empty()) {
            Json calls = Json::array();
            for (const llm::ToolCall& call : msg.tool_calls) {
                Json c = Json::object();
                c["id"] = call.call_id;
                c["type"] = "function";
                c["function"] = Json::object();
                c["function"]["name"] = call.name;
                c["function"]["arguments"] = call.arguments.dump();
                calls.push_back(std::move(c));
            }
            m["tool_calls"] = std::move(calls);
        }
        m["loss"] = msg.loss;
        messages.push_back(std::move(m));
    }
    j["messages"] = std::move(messages);

    Json meta = Json::object();
    meta["qa_id"] = sample.meta.qa_id;
    meta["tree_id"] = sample.meta.tree_id;
    meta["f1"] = sample.meta.f1;
    meta["seed"] = sample.meta.seed;
    meta["config_hash"] = sample.meta.config_hash;
    meta["schema_version"] = sample.meta.schema_version;
    j["meta"] = std::move(meta);
    return j;
}

TrainingSample sample_from_json(const Json& j) {
    TrainingSample sample;
    for (const Json& m : j.at("messages")) {
        SampleMessage msg;
        msg.role = llm::role_from_string(m.at("role").get<std::string>());
        msg.content = m.at("content").get<std::string>();
        if (m.contains("tool_calls") && !m["tool_calls"].is_null()) {
            for (const Json& c : m["tool_calls"]) {
                llm::ToolCall call;
                call.call_id = c.at("id").get<std::string>();
                call.name = c.at("function").at("name").get<std::string>();
                call.arguments = llm::parse_tool_arguments(c.at("function").at("arguments"));
                msg.tool_calls.push_back(std::move(call));
            }
        }
        msg.loss = m.at("loss").get<bool>();
        sample.messages.push_back(std::move(msg));
    }
    const Json& meta = j.at("meta");
    sample.meta.qa_id = meta.at("qa_id").get<std::string>();
    sample.meta.tree_id = meta.at("tree_id").get<std::string>();
    sample.meta.f1 = meta.at("f1").get<double>();
    sample.meta.seed = meta.at("seed").get<std::uint64_t>();
    sample.meta.config_hash = meta.at("config_hash").get<std::string>();
    sample.meta.schema_version = meta.at("schema_version").get<int>();
    return sample;
}

std::size_t write_jsonl(const std::filesystem::path& path,
                        const std::vector<TrainingSample>& samples) {
    std::vector<Json> rows;
    rows.reserve(samples.size());
    for (const TrainingSample& s : samples) rows.push_back(sample_to_json(s));
    util::write_jsonl_file(path, rows);
    return samples.size();
}

std::vector<TrainingSample> read_jsonl(const std::filesystem::path& path) {
    std::vector<TrainingSample> samples;
    std::size_t line = 0;
    for (const Json& row : util::read_jsonl_file(path)) {
        ++line;
        try {
            samples.push_back(sample_from_json(row));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.filename().string() + ": bad training sample on line " +
                             std::to_string(line) + ": " + e.what());
        }
    }
    return samples;
}

}  // namespace ragforge::dataset
