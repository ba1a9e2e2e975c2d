#pragma once

#include <string>

namespace ragforge::prompts {

// Bumped whenever any prompt text changes. Stored in trajectories and
// checked at export so a dataset never mixes prompt revisions.
inline constexpr int kVersion = 1;

// System prompt driving tree exploration: depth-first dependency chains plus
// hand-written negative documents.
const std::string& exploration_system();

// System prompt for turning a selected path into one multi-hop QA pair.
const std::string& qa_synthesis_system();

// System prompt for the solver whose trajectories become training data.
// Must stay free of any hint that planted noise exists.
const std::string& teacher_rollout_system();

// Benchmark-style solver prompt (honesty over fallback; XML answer tags).
const std::string& eval_system();

// System prompt for post-hoc behavior tagging of finished trajectories.
const std::string& tagging_system();

}  // namespace ragforge::prompts
