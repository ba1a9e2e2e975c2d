#pragma once

#include <map>
#include <string>
#include <vector>

#include "ragforge/backend.hpp"
#include "ragforge/elicitation.hpp"
#include "ragforge/synthesis.hpp"

namespace ragforge::quality {

// Answer normalization: lowercase, strip punctuation, drop the articles
// a/an/the, collapse whitespace, split on spaces.
std::vector<std::string> normalize_answer(const std::string& text);

// Bag-of-tokens F1 over normalized answers, counting multiplicity: the
// overlap is the sum of per-token minimum counts. Both empty -> 1.0, exactly
// one empty -> 0.0.
double token_f1(const std::string& prediction, const std::string& gold);

// Normalized token sequences equal, order included.
bool exact_match(const std::string& prediction, const std::string& gold);

struct ScoredSample {
    synthesis::QAItem qa;
    elicit::Trajectory trajectory;
    double f1 = 0.0;
    bool em = false;
    bool accepted = false;
    std::string reject_reason;  // "", "protocol_error", "step_limit", "low_f1"
};

// F1/EM between the trajectory's final answer and the QA's gold answer.
// Acceptance is decided by filter_dataset, not here.
ScoredSample score_sample(synthesis::QAItem qa, elicit::Trajectory trajectory);

struct FilterReport {
    double threshold = 0.9;
    // The threshold itself passes: accepted means f1 >= threshold.
    std::string boundary = "inclusive";
    int total = 0;
    int accepted = 0;
    std::map<std::string, int> rejected_by_reason;
};

// Marks each sample accepted or rejected. A trajectory that never answered
// (protocol_error, step_limit) is rejected regardless of its F1.
FilterReport filter_dataset(std::vector<ScoredSample>& samples, double threshold);

enum class BehaviorCategory { kHandlingSuccess, kFallbackSuccess, kDirectAnswer, kFailure };
enum class DistractorOutcome { kResolved, kMisled, kUnseen };

const char* to_string(BehaviorCategory c);
const char* to_string(DistractorOutcome o);
BehaviorCategory behavior_category_from_string(const std::string& s);
DistractorOutcome distractor_outcome_from_string(const std::string& s);

struct BehaviorTag {
    BehaviorCategory category = BehaviorCategory::kFailure;
    std::map<corpus::DistractorType, DistractorOutcome> per_distractor;
    // Raw model reply, kept only when it was unusable.
    std::string raw_output;
};

// Labels how the solver behaved on one sample. Zero-tool-call trajectories
// are direct_answer by definition and never consult the model; an unusable
// or self-contradictory model reply yields kFailure with raw_output set.
BehaviorTag tag_trajectory(const ScoredSample& sample, llm::ChatBackend& backend,
                           const llm::SamplingParams& params);

// Distribution of tool calls per trajectory.
std::map<int, int> tool_call_histogram(const std::vector<ScoredSample>& samples);

Json scored_to_json(const ScoredSample& s);
ScoredSample scored_from_json(const Json& j);

Json tag_to_json(const BehaviorTag& tag);

}  // namespace ragforge::quality
