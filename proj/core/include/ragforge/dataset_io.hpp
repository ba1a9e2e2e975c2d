#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ragforge/quality.hpp"

namespace ragforge::dataset {

inline constexpr int kSchemaVersion = 1;

// One chat message of a training sample. Tool replies pair with the
// assistant message directly before them, so no call id is persisted.
struct SampleMessage {
    llm::Role role = llm::Role::kUser;
    std::string content;
    std::vector<llm::ToolCall> tool_calls;
    bool loss = false;

    bool operator==(const SampleMessage&) const = default;
};

struct SampleMeta {
    std::string qa_id;
    std::string tree_id;
    double f1 = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    int schema_version = kSchemaVersion;

    bool operator==(const SampleMeta&) const = default;
};

struct TrainingSample {
    std::vector<SampleMessage> messages;
    SampleMeta meta;

    bool operator==(const TrainingSample&) const = default;
};

// Rebuilds the solver transcript from an accepted sample: system and user
// first, then each step's assistant call plus its tool observation, then the
// closing assistant message. Loss is set on assistant messages only -- the
// model learns its own turns, never the environment's.
TrainingSample to_training_sample(const quality::ScoredSample& sample,
                                  const std::string& config_hash);

struct MaskReport {
    bool passed = true;
    std::vector<std::string> violations;
};

// Checks the message grammar [system, user, (assistant, tool)*, assistant]
// and that loss == (role == assistant) on every message.
MaskReport verify_masks(const TrainingSample& sample);

Json sample_to_json(const TrainingSample& sample);
TrainingSample sample_from_json(const Json& j);

// Atomic, deterministic JSONL. Writing the same samples twice produces
// byte-identical files.
std::size_t write_jsonl(const std::filesystem::path& path,
                        const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> read_jsonl(const std::filesystem::path& path);

}  // namespace ragforge::dataset
