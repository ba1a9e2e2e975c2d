#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragforge/backend.hpp"
#include "ragforge/knowledge_base.hpp"
#include "ragforge/rng.hpp"

namespace ragforge::elicit {

// Retrieval routing for one solver step. The solver never learns which case
// fired; routing lives entirely on the environment side.
enum class RouterCase {
    kForcedFirst,               // step 1: always mix distractors in
    kSuppressedAfterInjection,  // previous observation carried a distractor
    kProbabilisticInject,       // random draw landed below p_e
    kClean,                     // random draw landed at or above p_e
};

enum class Termination { kAnswer, kStepLimit, kProtocolError };

// Which tag pair wraps the final answer.
enum class AnswerTagMode { kRollout, kEval };

const char* to_string(RouterCase c);
const char* to_string(Termination t);
RouterCase router_case_from_string(const std::string& s);
Termination termination_from_string(const std::string& s);

struct RouterDecision {
    int step = 0;
    RouterCase router_case = RouterCase::kClean;
    // The uniform draw, present only when the case was decided by chance.
    std::optional<double> draw;
};

struct TrajectoryStep {
    int step_index = 0;            // 1-based
    std::string thought;           // assistant text accompanying the call
    llm::ToolCall action;
    std::vector<corpus::RetrievalHit> observation;
    bool distractor_injected = false;
    bool degraded = false;         // injection scheduled but the store was empty
    bool below_threshold = false;  // distractor slots filled ignoring tau
};

struct Trajectory {
    std::string qa_id;
    std::string question;
    std::vector<TrajectoryStep> steps;
    std::string final_answer;    // extracted from between the answer tags
    std::string final_raw_text;  // the closing assistant message, verbatim
    Termination terminated_by = Termination::kProtocolError;
    std::string failure_reason;
    std::vector<RouterDecision> router_log;
    std::uint64_t rng_seed = 0;
    int prompts_version = 0;
    int observation_char_cap = 2000;
};

struct ElicitConfig {
    int k = 5;
    double tau = 0.8;
    double p_e = 0.5;  // injection probability on eligible steps
    int max_steps = 50;
    int observation_char_cap = 2000;
    llm::SamplingParams sampling{0.2, std::nullopt};

    void validate() const;
};

// Pure routing: step 1 forces injection, a step right after an actual
// injection suppresses it, anything else draws once against p_e. The draw is
// recorded in the decision for auditability.
RouterDecision route_retrieval(int step_index, bool prev_injected, double p_e, SeededRng& rng);

struct RetrievalPlanResult {
    std::vector<corpus::RetrievalHit> hits;
    bool injected = false;
    bool degraded = false;
    bool below_threshold = false;
};

// Executes one routed retrieval. Injection cases take k-2 clean hits plus the
// top-2 distractor hits (threshold first; if fewer than 2 clear tau while the
// store is non-empty, the top-2 ignoring tau are taken and flagged), merged
// and re-ranked by score. An empty distractor store degrades the step to the
// k-2 clean hits alone.
RetrievalPlanResult execute_retrieval_plan(const RouterDecision& decision,
                                           const std::string& query,
                                           const corpus::KnowledgeBase& kb,
                                           const corpus::KnowledgeBase& distractors, int k,
                                           double tau);

// What the solver sees: rank, title, and text only. No ids, origins, or
// scores -- nothing that could mark a document as planted.
std::string render_observation(const std::vector<corpus::RetrievalHit>& hits,
                               int observation_char_cap);

// Pulls the answer from between the tags; the last complete pair wins.
// Missing or unbalanced tags raise ExtractionError.
std::string extract_final_answer(const std::string& text, AnswerTagMode mode);

// Runs the solver agent loop over one question. Model-side failures terminate
// the trajectory (kProtocolError) instead of throwing, so every question
// yields a persistable record.
Trajectory run_teacher(const std::string& question, const corpus::KnowledgeBase& kb,
                       const corpus::KnowledgeBase& distractors, const ElicitConfig& config,
                       llm::ChatBackend& backend, SeededRng& rng);

Json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

}  // namespace ragforge::elicit
