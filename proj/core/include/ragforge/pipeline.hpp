#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ragforge/backend.hpp"
#include "ragforge/embedder.hpp"
#include "ragforge/util.hpp"

namespace ragforge::pipeline {

enum class Stage {
    kBuildKb,
    kExplore,
    kSelectPaths,
    kSynthQa,
    kElicit,
    kScoreFilter,
    kExport,
    kStats,
    kTag,
};

inline constexpr std::array<Stage, 9> kAllStages = {
    Stage::kBuildKb,   Stage::kExplore, Stage::kSelectPaths,
    Stage::kSynthQa,   Stage::kElicit,  Stage::kScoreFilter,
    Stage::kExport,    Stage::kStats,   Stage::kTag,
};

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& name);

// Chat backend settings for one model role. "live" talks to an
// OpenAI-compatible server; "replay" serves canned turns from a JSONL script.
struct RoleBackendConfig {
    std::string kind = "live";
    std::string base_url;
    std::string model;
    std::string api_key_env;  // credentials come from this env var, never config
    std::string script;       // replay only: path to the script file
    int max_attempts = 3;
    int backoff_base_ms = 250;
};

// Everything a run depends on, in one flat snapshot. All stages hash the
// canonical form (minus output_dir and force) and stamp that hash into their
// reports and artifacts, so stale mixes of outputs are detectable.
struct PipelineConfig {
    std::string corpus_file;
    std::string seeds_file;

    std::string embedder = "hashing";  // "hashing" or "remote"
    int embedding_dim = 256;
    std::string embedding_base_url;
    std::string embedding_model;
    std::string embedding_api_key_env;

    RoleBackendConfig llm;  // default backend, overridable per role
    std::map<std::string, RoleBackendConfig> roles;

    std::vector<double> branch_probabilities{0.5, 0.5};  // by depth, 1-based
    int max_depth = 30;
    double tau = 0.8;
    int k = 5;
    double p_e = 0.5;
    int max_steps = 50;
    int selection_m = 2;
    double filter_threshold = 0.9;
    int distractor_budget = 5;
    int observation_char_cap = 2000;

    double curator_temperature = 0.7;
    double synthesizer_temperature = 0.7;
    double teacher_temperature = 0.2;
    double tagger_temperature = 0.0;

    // "batch": solver-side distractor store is the union over all trees in
    // the run; "per-tree": each question only sees its own tree's store.
    std::string distractor_scope = "batch";

    int max_in_flight = 8;
    std::uint64_t seed = 7;
    int limit = 0;  // > 0 truncates seeds (explore) and questions (elicit)
    bool tag_rejected = false;
    std::string output_dir = "out";
    bool force = false;

    void validate() const;
};

// Strict: unknown keys or wrong types are rejected, so a typo cannot
// silently fall back to a default.
PipelineConfig config_from_json(const Json& j);
Json config_to_json(const PipelineConfig& cfg);

// config_to_json minus output_dir and force: relocating or forcing a run
// must not change its identity.
Json canonical_config(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

// Rewires every role. "live" keeps configured endpoints; "replay:<dir>" maps
// each role to <dir>/<role>.jsonl, falling back to <dir>/default.jsonl.
void apply_backend_override(PipelineConfig& cfg, const std::string& backend_spec);

struct StageReport {
    Stage stage = Stage::kBuildKb;
    bool skipped = false;
    std::string config_hash;
    std::string inputs_fingerprint;
    std::vector<std::string> artifacts;  // outputs, relative to the out dir
    Json details;

    Json to_json() const;
};

// Runs stages against one output directory. Stages are idempotent per
// (inputs fingerprint, config hash): a completed stage whose inputs and
// config are unchanged is skipped without touching any backend.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg);

    StageReport run_stage(Stage stage);

    // All stages in order, stopping at the first hard failure. The aggregate
    // report (also written to reports/run.json) carries every stage report
    // plus the tool-call histogram and acceptance stats.
    Json run_all();

    // Test seams: pre-built backends / embedder take precedence over config.
    void set_backend(const std::string& role, std::shared_ptr<llm::ChatBackend> backend);
    void set_embedder(std::shared_ptr<corpus::Embedder> embedder);

    // The recorder wrapped around the teacher during the last elicit run;
    // null until elicit has executed. Lets callers audit exactly what the
    // solver was shown.
    std::shared_ptr<llm::RecordingBackend> teacher_recorder() const { return teacher_recorder_; }

    const PipelineConfig& config() const { return config_; }
    const std::string& hash() const { return config_hash_; }
    std::filesystem::path out_path(const std::string& relative) const;

private:
    struct StageIo;  // input files, artifacts, producer hints

    StageIo stage_io(Stage stage) const;
    std::shared_ptr<corpus::Embedder> embedder();
    std::shared_ptr<llm::ChatBackend> role_backend(const std::string& role);
    llm::SamplingParams role_sampling(const std::string& role) const;
    bool role_is_sequential_script(const std::string& role);
    int worker_count(const std::string& role, std::size_t items);
    void write_config_snapshot();

    Json run_build_kb();
    Json run_explore(std::vector<std::string>& artifacts);
    Json run_select_paths();
    Json run_synth_qa();
    Json run_elicit();
    Json run_score_filter();
    Json run_export();
    Json run_stats();
    Json run_tag();

    PipelineConfig config_;
    std::string config_hash_;
    std::shared_ptr<corpus::Embedder> embedder_;
    std::map<std::string, std::shared_ptr<llm::ChatBackend>> backends_;
    std::shared_ptr<llm::RecordingBackend> teacher_recorder_;
};

}  // namespace ragforge::pipeline
