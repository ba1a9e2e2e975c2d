#include "ragforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <set>
#include <thread>
#include <utility>

#include "ragforge/curator.hpp"
#include "ragforge/dataset_io.hpp"
#include "ragforge/elicitation.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/knowledge_base.hpp"
#include "ragforge/live_backend.hpp"
#include "ragforge/prompts.hpp"
#include "ragforge/quality.hpp"
#include "ragforge/rng.hpp"
#include "ragforge/scripted_backend.hpp"
#include "ragforge/synthesis.hpp"

namespace ragforge::pipeline {

namespace fs = std::filesystem;

const char* to_string(Stage stage) {
    switch (stage) {
        case Stage::kBuildKb: return "build-kb";
        case Stage::kExplore: return "explore";
        case Stage::kSelectPaths: return "select-paths";
        case Stage::kSynthQa: return "synth-qa";
        case Stage::kElicit: return "elicit";
        case Stage::kScoreFilter: return "score-filter";
        case Stage::kExport: return "export";
        case Stage::kStats: return "stats";
        case Stage::kTag: return "tag";
    }
    throw ValidationError("unknown stage enum value");
}

Stage stage_from_string(const std::string& name) {
    for (Stage s : kAllStages) {
        if (name == to_string(s)) return s;
    }
    throw ValidationError("unknown stage '" + name + "'");
}

namespace {

constexpr const char* kRoleNames[] = {"curator", "synthesizer", "teacher", "tagger"};

std::string key_path(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ValidationError("unknown config key '" + key_path(where, item.key()) + "'");
        }
    }
}

std::string get_string(const Json& j, const std::string& key, std::string fallback,
                       const std::string& where = "") {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_string()) {
        throw ValidationError("config key '" + key_path(where, key) + "' must be a string");
    }
    return v.get<std::string>();
}

int get_int(const Json& j, const std::string& key, int fallback, const std::string& where = "") {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number_integer()) {
        throw ValidationError("config key '" + key_path(where, key) + "' must be an integer");
    }
    return v.get<int>();
}

double get_double(const Json& j, const std::string& key, double fallback,
                  const std::string& where = "") {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number()) {
        throw ValidationError("config key '" + key_path(where, key) + "' must be a number");
    }
    return v.get<double>();
}

bool get_bool(const Json& j, const std::string& key, bool fallback,
              const std::string& where = "") {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_boolean()) {
        throw ValidationError("config key '" + key_path(where, key) + "' must be a boolean");
    }
    return v.get<bool>();
}

std::uint64_t get_u64(const Json& j, const std::string& key, std::uint64_t fallback,
                      const std::string& where = "") {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))) {
        throw ValidationError("config key '" + key_path(where, key) +
                              "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

RoleBackendConfig role_backend_from_json(const Json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError("config key '" + where + "' must be an object");
    reject_unknown_keys(
        j, {"kind", "base_url", "model", "api_key_env", "script", "max_attempts",
            "backoff_base_ms"},
        where);
    RoleBackendConfig out;
    out.kind = get_string(j, "kind", out.kind, where);
    if (out.kind != "live" && out.kind != "replay") {
        throw ValidationError("config key '" + where + ".kind' must be \"live\" or \"replay\"");
    }
    out.base_url = get_string(j, "base_url", out.base_url, where);
    out.model = get_string(j, "model", out.model, where);
    out.api_key_env = get_string(j, "api_key_env", out.api_key_env, where);
    out.script = get_string(j, "script", out.script, where);
    out.max_attempts = get_int(j, "max_attempts", out.max_attempts, where);
    out.backoff_base_ms = get_int(j, "backoff_base_ms", out.backoff_base_ms, where);
    if (out.max_attempts < 1) {
        throw ValidationError("config key '" + where + ".max_attempts' must be >= 1");
    }
    if (out.backoff_base_ms < 0) {
        throw ValidationError("config key '" + where + ".backoff_base_ms' must be >= 0");
    }
    return out;
}

Json role_backend_to_json(const RoleBackendConfig& rb) {
    Json j = Json::object();
    j["kind"] = rb.kind;
    j["base_url"] = rb.base_url;
    j["model"] = rb.model;
    j["api_key_env"] = rb.api_key_env;
    j["script"] = rb.script;
    j["max_attempts"] = rb.max_attempts;
    j["backoff_base_ms"] = rb.backoff_base_ms;
    return j;
}

std::string env_or_empty(const std::string& var) {
    if (var.empty()) return "";
    const char* v = std::getenv(var.c_str());
    return v ? v : "";
}

// Runs fn(0..count-1) on up to `workers` threads. Per-item exceptions are
// re-thrown after the pool drains, lowest index first, so the reported
// failure does not depend on thread timing.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (count == 0) return;
    workers = std::max(1, std::min(workers, static_cast<int>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<fs::path> list_tree_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

void PipelineConfig::validate() const {
    if (corpus_file.empty()) throw ValidationError("corpus_file must be set");
    if (seeds_file.empty()) throw ValidationError("seeds_file must be set");
    if (embedder != "hashing" && embedder != "remote") {
        throw ValidationError("embedder must be \"hashing\" or \"remote\"");
    }
    if (embedding_dim < 1) throw ValidationError("embedding_dim must be >= 1");
    if (embedder == "remote" && (embedding_base_url.empty() || embedding_model.empty())) {
        throw ValidationError("remote embedder requires embedding_base_url and embedding_model");
    }
    for (const auto& [role, rb] : roles) {
        bool known = false;
        for (const char* name : kRoleNames) known = known || role == name;
        if (!known) {
            throw ValidationError("unknown role '" + role +
                                  "' (expected curator, synthesizer, teacher, or tagger)");
        }
        if (rb.kind == "replay" && rb.script.empty()) {
            throw ValidationError("role '" + role +
                                  "' uses the replay backend but no script is configured");
        }
    }
    if (llm.kind == "replay" && llm.script.empty()) {
        throw ValidationError("the default llm backend is replay but no script is configured");
    }

    curator::ExploreConfig ec;
    ec.branch.by_depth = branch_probabilities;
    ec.max_depth = max_depth;
    ec.tau = tau;
    ec.default_top_k = k;
    ec.distractor_budget = distractor_budget;
    ec.observation_char_cap = observation_char_cap;
    ec.validate();

    elicit::ElicitConfig el;
    el.k = k;
    el.tau = tau;
    el.p_e = p_e;
    el.max_steps = max_steps;
    el.observation_char_cap = observation_char_cap;
    el.validate();

    if (selection_m < 1) throw ValidationError("selection_m must be >= 1");
    if (filter_threshold < 0.0 || filter_threshold > 1.0) {
        throw ValidationError("filter_threshold must lie in [0, 1]");
    }
    for (double t : {curator_temperature, synthesizer_temperature, teacher_temperature,
                     tagger_temperature}) {
        if (t < 0.0) throw ValidationError("sampling temperatures must be >= 0");
    }
    if (distractor_scope != "batch" && distractor_scope != "per-tree") {
        throw ValidationError("distractor_scope must be \"batch\" or \"per-tree\"");
    }
    if (max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
    if (limit < 0) throw ValidationError("limit must be >= 0");
    if (output_dir.empty()) throw ValidationError("output_dir must be set");
}

PipelineConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    reject_unknown_keys(
        j,
        {"corpus_file",     "seeds_file",        "embedder",
         "embedding_dim",   "embedding_base_url", "embedding_model",
         "embedding_api_key_env",                "llm",
         "roles",           "branch_probabilities",
         "max_depth",       "tau",               "k",
         "p_e",             "max_steps",         "selection_m",
         "filter_threshold", "distractor_budget", "observation_char_cap",
         "curator_temperature",                  "synthesizer_temperature",
         "teacher_temperature",                  "tagger_temperature",
         "distractor_scope", "max_in_flight",    "seed",
         "limit",           "tag_rejected",      "output_dir",
         "force"},
        "");

    PipelineConfig cfg;
    cfg.corpus_file = get_string(j, "corpus_file", cfg.corpus_file);
    cfg.seeds_file = get_string(j, "seeds_file", cfg.seeds_file);
    cfg.embedder = get_string(j, "embedder", cfg.embedder);
    cfg.embedding_dim = get_int(j, "embedding_dim", cfg.embedding_dim);
    cfg.embedding_base_url = get_string(j, "embedding_base_url", cfg.embedding_base_url);
    cfg.embedding_model = get_string(j, "embedding_model", cfg.embedding_model);
    cfg.embedding_api_key_env = get_string(j, "embedding_api_key_env", cfg.embedding_api_key_env);
    if (j.contains("llm")) cfg.llm = role_backend_from_json(j.at("llm"), "llm");
    if (j.contains("roles")) {
        const Json& roles = j.at("roles");
        if (!roles.is_object()) throw ValidationError("config key 'roles' must be an object");
        for (const auto& item : roles.items()) {
            cfg.roles[item.key()] = role_backend_from_json(item.value(), "roles." + item.key());
        }
    }
    if (j.contains("branch_probabilities")) {
        const Json& bp = j.at("branch_probabilities");
        if (!bp.is_array()) {
            throw ValidationError("config key 'branch_probabilities' must be an array of numbers");
        }
        cfg.branch_probabilities.clear();
        for (const Json& v : bp) {
            if (!v.is_number()) {
                throw ValidationError(
                    "config key 'branch_probabilities' must be an array of numbers");
            }
            cfg.branch_probabilities.push_back(v.get<double>());
        }
    }
    cfg.max_depth = get_int(j, "max_depth", cfg.max_depth);
    cfg.tau = get_double(j, "tau", cfg.tau);
    cfg.k = get_int(j, "k", cfg.k);
    cfg.p_e = get_double(j, "p_e", cfg.p_e);
    cfg.max_steps = get_int(j, "max_steps", cfg.max_steps);
    cfg.selection_m = get_int(j, "selection_m", cfg.selection_m);
    cfg.filter_threshold = get_double(j, "filter_threshold", cfg.filter_threshold);
    cfg.distractor_budget = get_int(j, "distractor_budget", cfg.distractor_budget);
    cfg.observation_char_cap = get_int(j, "observation_char_cap", cfg.observation_char_cap);
    cfg.curator_temperature = get_double(j, "curator_temperature", cfg.curator_temperature);
    cfg.synthesizer_temperature =
        get_double(j, "synthesizer_temperature", cfg.synthesizer_temperature);
    cfg.teacher_temperature = get_double(j, "teacher_temperature", cfg.teacher_temperature);
    cfg.tagger_temperature = get_double(j, "tagger_temperature", cfg.tagger_temperature);
    cfg.distractor_scope = get_string(j, "distractor_scope", cfg.distractor_scope);
    cfg.max_in_flight = get_int(j, "max_in_flight", cfg.max_in_flight);
    cfg.seed = get_u64(j, "seed", cfg.seed);
    cfg.limit = get_int(j, "limit", cfg.limit);
    cfg.tag_rejected = get_bool(j, "tag_rejected", cfg.tag_rejected);
    cfg.output_dir = get_string(j, "output_dir", cfg.output_dir);
    cfg.force = get_bool(j, "force", cfg.force);
    return cfg;
}

Json config_to_json(const PipelineConfig& cfg) {
    Json j = Json::object();
    j["corpus_file"] = cfg.corpus_file;
    j["seeds_file"] = cfg.seeds_file;
    j["embedder"] = cfg.embedder;
    j["embedding_dim"] = cfg.embedding_dim;
    j["embedding_base_url"] = cfg.embedding_base_url;
    j["embedding_model"] = cfg.embedding_model;
    j["embedding_api_key_env"] = cfg.embedding_api_key_env;
    j["llm"] = role_backend_to_json(cfg.llm);
    Json roles = Json::object();
    for (const auto& [role, rb] : cfg.roles) roles[role] = role_backend_to_json(rb);
    j["roles"] = roles;
    j["branch_probabilities"] = cfg.branch_probabilities;
    j["max_depth"] = cfg.max_depth;
    j["tau"] = cfg.tau;
    j["k"] = cfg.k;
    j["p_e"] = cfg.p_e;
    j["max_steps"] = cfg.max_steps;
    j["selection_m"] = cfg.selection_m;
    j["filter_threshold"] = cfg.filter_threshold;
    j["distractor_budget"] = cfg.distractor_budget;
    j["observation_char_cap"] = cfg.observation_char_cap;
    j["curator_temperature"] = cfg.curator_temperature;
    j["synthesizer_temperature"] = cfg.synthesizer_temperature;
    j["teacher_temperature"] = cfg.teacher_temperature;
    j["tagger_temperature"] = cfg.tagger_temperature;
    j["distractor_scope"] = cfg.distractor_scope;
    j["max_in_flight"] = cfg.max_in_flight;
    j["seed"] = cfg.seed;
    j["limit"] = cfg.limit;
    j["tag_rejected"] = cfg.tag_rejected;
    j["output_dir"] = cfg.output_dir;
    j["force"] = cfg.force;
    return j;
}

Json canonical_config(const PipelineConfig& cfg) {
    Json j = config_to_json(cfg);
    j.erase("output_dir");
    j.erase("force");
    return j;
}

std::string config_hash(const PipelineConfig& cfg) {
    return util::hex64(util::fnv1a64(canonical_config(cfg).dump()));
}

void apply_backend_override(PipelineConfig& cfg, const std::string& backend_spec) {
    if (backend_spec == "live") {
        cfg.llm.kind = "live";
        cfg.llm.script.clear();
        for (auto& [role, rb] : cfg.roles) {
            rb.kind = "live";
            rb.script.clear();
        }
        return;
    }
    const std::string prefix = "replay:";
    if (backend_spec.rfind(prefix, 0) != 0) {
        throw ValidationError("backend must be \"live\" or \"replay:<script-dir>\" (got '" +
                              backend_spec + "')");
    }
    fs::path dir = backend_spec.substr(prefix.size());
    if (dir.empty() || !fs::is_directory(dir)) {
        throw ValidationError("replay script directory not found: " + dir.string());
    }
    for (const char* role : kRoleNames) {
        fs::path script = dir / (std::string(role) + ".jsonl");
        if (!fs::exists(script)) script = dir / "default.jsonl";
        if (!fs::exists(script)) {
            throw ValidationError("no replay script for role '" + std::string(role) +
                                  "': expected " + (dir / (std::string(role) + ".jsonl")).string() +
                                  " or " + (dir / "default.jsonl").string());
        }
        RoleBackendConfig rb = cfg.roles.count(role) ? cfg.roles.at(role) : cfg.llm;
        rb.kind = "replay";
        rb.script = script.string();
        cfg.roles[role] = rb;
    }
}

Json StageReport::to_json() const {
    Json j = Json::object();
    j["stage"] = to_string(stage);
    j["skipped"] = skipped;
    j["config_hash"] = config_hash;
    j["inputs_fingerprint"] = inputs_fingerprint;
    j["artifacts"] = artifacts;
    j["details"] = details;
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline

struct Pipeline::StageIo {
    struct Input {
        std::string name;  // location-independent label, part of the fingerprint
        fs::path path;
        std::string producer;  // stage that creates it; empty for external files
    };
    std::vector<Input> inputs;
    std::vector<std::string> artifacts;  // relative to the output dir

    // Content hash over (name, bytes) of every input, so a stage re-runs
    // exactly when something it reads has changed.
    std::string fingerprint() const {
        const std::string sep(1, '\0');
        std::uint64_t h = util::fnv1a64("inputs-v1");
        for (const auto& in : inputs) {
            h = util::fnv1a64(in.name, h);
            h = util::fnv1a64(sep, h);
            h = util::fnv1a64(util::read_file(in.path), h);
            h = util::fnv1a64(sep, h);
        }
        return util::hex64(h);
    }
};

Pipeline::Pipeline(PipelineConfig cfg) : config_(std::move(cfg)) {
    config_.validate();
    config_hash_ = pipeline::config_hash(config_);
}

fs::path Pipeline::out_path(const std::string& relative) const {
    return fs::path(config_.output_dir) / relative;
}

void Pipeline::set_backend(const std::string& role, std::shared_ptr<llm::ChatBackend> backend) {
    backends_[role] = std::move(backend);
}

void Pipeline::set_embedder(std::shared_ptr<corpus::Embedder> embedder) {
    embedder_ = std::move(embedder);
}

std::shared_ptr<corpus::Embedder> Pipeline::embedder() {
    if (embedder_) return embedder_;
    if (config_.embedder == "hashing") {
        embedder_ = std::make_shared<corpus::HashingEmbedder>(config_.embedding_dim);
    } else {
        corpus::RemoteEmbedder::Config rc;
        rc.base_url = config_.embedding_base_url;
        rc.model = config_.embedding_model;
        rc.api_key = env_or_empty(config_.embedding_api_key_env);
        embedder_ = std::make_shared<corpus::RemoteEmbedder>(rc);
    }
    return embedder_;
}

std::shared_ptr<llm::ChatBackend> Pipeline::role_backend(const std::string& role) {
    auto it = backends_.find(role);
    if (it != backends_.end()) return it->second;

    RoleBackendConfig rb = config_.roles.count(role) ? config_.roles.at(role) : config_.llm;
    std::shared_ptr<llm::ChatBackend> backend;
    if (rb.kind == "replay") {
        if (rb.script.empty()) {
            throw ValidationError("role '" + role +
                                  "' uses the replay backend but no script is configured");
        }
        backend = llm::ScriptedBackend::from_jsonl(rb.script);
    } else {
        if (rb.base_url.empty()) {
            throw ValidationError("role '" + role +
                                  "' uses the live backend but base_url is not configured");
        }
        llm::LiveBackend::Config lc;
        lc.base_url = rb.base_url;
        lc.model = rb.model;
        lc.api_key = env_or_empty(rb.api_key_env);
        lc.retry.max_attempts = rb.max_attempts;
        lc.retry.backoff_base_ms = rb.backoff_base_ms;
        backend = std::make_shared<llm::LiveBackend>(lc);
    }
    backends_[role] = backend;
    return backend;
}

llm::SamplingParams Pipeline::role_sampling(const std::string& role) const {
    llm::SamplingParams params;
    if (role == "curator") params.temperature = config_.curator_temperature;
    else if (role == "synthesizer") params.temperature = config_.synthesizer_temperature;
    else if (role == "teacher") params.temperature = config_.teacher_temperature;
    else if (role == "tagger") params.temperature = config_.tagger_temperature;
    return params;
}

bool Pipeline::role_is_sequential_script(const std::string& role) {
    auto backend = role_backend(role);
    auto* scripted = dynamic_cast<llm::ScriptedBackend*>(backend.get());
    return scripted != nullptr && !scripted->keyed();
}

int Pipeline::worker_count(const std::string& role, std::size_t items) {
    if (items == 0) return 1;
    // A sequential (unkeyed) script encodes an exact call order, which
    // concurrent workers would scramble.
    if (role_is_sequential_script(role)) return 1;
    return std::max(1, std::min(config_.max_in_flight, static_cast<int>(items)));
}

void Pipeline::write_config_snapshot() {
    Json snap = Json::object();
    snap["config_hash"] = config_hash_;
    snap["prompts_version"] = prompts::kVersion;
    snap["config"] = canonical_config(config_);
    util::atomic_write_file(out_path("config.json"), snap.dump(2) + "\n");
}

Pipeline::StageIo Pipeline::stage_io(Stage stage) const {
    StageIo io;
    auto add = [&](std::string name, fs::path path, std::string producer) {
        io.inputs.push_back({std::move(name), std::move(path), std::move(producer)});
    };
    auto add_kb = [&] {
        for (const char* f : {"kb/meta.json", "kb/corpus.jsonl", "kb/vectors.bin"}) {
            add(f, out_path(f), "build-kb");
        }
    };
    auto add_trees = [&](const char* consumer) {
        auto files = list_tree_files(out_path("trees"));
        if (files.empty()) {
            throw StageError("stage '" + std::string(consumer) + "' requires tree files under " +
                             out_path("trees").string() +
                             " (produced by stage 'explore'); run that stage first");
        }
        for (const auto& f : files) add("trees/" + f.filename().string(), f, "explore");
    };
    auto add_script = [&](const std::string& role) {
        RoleBackendConfig rb = config_.roles.count(role) ? config_.roles.at(role) : config_.llm;
        if (rb.kind == "replay" && !rb.script.empty()) add("script:" + role, rb.script, "");
    };

    switch (stage) {
        case Stage::kBuildKb:
            add("corpus", config_.corpus_file, "");
            io.artifacts = {"kb/meta.json", "kb/corpus.jsonl", "kb/vectors.bin"};
            break;
        case Stage::kExplore:
            add_kb();
            add("seeds", config_.seeds_file, "");
            add_script("curator");
            // Tree files are named per seed; the artifact list is filled in
            // when the stage runs.
            break;
        case Stage::kSelectPaths:
            add_kb();
            add_trees("select-paths");
            io.artifacts = {"paths/paths.jsonl"};
            break;
        case Stage::kSynthQa:
            add_kb();
            add_trees("synth-qa");
            add("paths/paths.jsonl", out_path("paths/paths.jsonl"), "select-paths");
            add_script("synthesizer");
            io.artifacts = {"qa/qa.jsonl"};
            break;
        case Stage::kElicit:
            add_kb();
            add_trees("elicit");
            add("qa/qa.jsonl", out_path("qa/qa.jsonl"), "synth-qa");
            add_script("teacher");
            io.artifacts = {"trajectories/trajectories.jsonl"};
            break;
        case Stage::kScoreFilter:
            add("qa/qa.jsonl", out_path("qa/qa.jsonl"), "synth-qa");
            add("trajectories/trajectories.jsonl", out_path("trajectories/trajectories.jsonl"),
                "elicit");
            io.artifacts = {"scored/scored.jsonl"};
            break;
        case Stage::kExport:
            add("scored/scored.jsonl", out_path("scored/scored.jsonl"), "score-filter");
            add("qa/qa.jsonl", out_path("qa/qa.jsonl"), "synth-qa");
            add("trajectories/trajectories.jsonl", out_path("trajectories/trajectories.jsonl"),
                "elicit");
            io.artifacts = {"sft/train.jsonl"};
            break;
        case Stage::kStats:
            add("scored/scored.jsonl", out_path("scored/scored.jsonl"), "score-filter");
            add("trajectories/trajectories.jsonl", out_path("trajectories/trajectories.jsonl"),
                "elicit");
            // Tags fold into the stats when present; the fingerprint then
            // tracks them, so a later tag run makes stats re-run, not stale.
            if (fs::exists(out_path("tags/tags.jsonl"))) {
                add("tags/tags.jsonl", out_path("tags/tags.jsonl"), "tag");
            }
            break;
        case Stage::kTag:
            add("scored/scored.jsonl", out_path("scored/scored.jsonl"), "score-filter");
            add("qa/qa.jsonl", out_path("qa/qa.jsonl"), "synth-qa");
            add("trajectories/trajectories.jsonl", out_path("trajectories/trajectories.jsonl"),
                "elicit");
            add_script("tagger");
            io.artifacts = {"tags/tags.jsonl"};
            break;
    }
    return io;
}

StageReport Pipeline::run_stage(Stage stage) {
    const std::string name = to_string(stage);
    StageIo io = stage_io(stage);

    for (const auto& in : io.inputs) {
        if (!fs::exists(in.path)) {
            std::string msg = "stage '" + name + "' requires " + in.path.string();
            if (in.producer.empty()) {
                msg += "; check the config";
            } else {
                msg += " (produced by stage '" + in.producer + "'); run that stage first";
            }
            throw StageError(msg);
        }
    }
    const std::string fp = io.fingerprint();

    const fs::path report_path = out_path("reports/" + name + ".json");
    if (fs::exists(report_path)) {
        Json old;
        try {
            old = Json::parse(util::read_file(report_path));
        } catch (const std::exception&) {
            old = Json();
        }
        if (old.is_object() && old.contains("config_hash")) {
            const std::string old_hash = old["config_hash"].get<std::string>();
            if (old_hash != config_hash_ && !config_.force) {
                throw StageError("stage '" + name + "' outputs were produced under config hash " +
                                 old_hash + " but the current config hashes to " + config_hash_ +
                                 "; re-run with --force to overwrite them");
            }
            if (old_hash == config_hash_ && old.value("inputs_fingerprint", "") == fp &&
                !config_.force) {
                bool outputs_present = true;
                for (const Json& a : old.value("artifacts", Json::array())) {
                    outputs_present =
                        outputs_present && fs::exists(out_path(a.get<std::string>()));
                }
                if (outputs_present) {
                    util::log_event("stage_skipped",
                                    {{"stage", name}, {"reason", "up to date"}});
                    StageReport report;
                    report.stage = stage;
                    report.skipped = true;
                    report.config_hash = config_hash_;
                    report.inputs_fingerprint = fp;
                    for (const Json& a : old.value("artifacts", Json::array())) {
                        report.artifacts.push_back(a.get<std::string>());
                    }
                    report.details = old.value("details", Json::object());
                    return report;
                }
            }
        }
    }

    util::log_event("stage_start", {{"stage", name}});
    write_config_snapshot();

    StageReport report;
    report.stage = stage;
    report.config_hash = config_hash_;
    report.inputs_fingerprint = fp;
    report.artifacts = io.artifacts;
    switch (stage) {
        case Stage::kBuildKb: report.details = run_build_kb(); break;
        case Stage::kExplore: report.details = run_explore(report.artifacts); break;
        case Stage::kSelectPaths: report.details = run_select_paths(); break;
        case Stage::kSynthQa: report.details = run_synth_qa(); break;
        case Stage::kElicit: report.details = run_elicit(); break;
        case Stage::kScoreFilter: report.details = run_score_filter(); break;
        case Stage::kExport: report.details = run_export(); break;
        case Stage::kStats: report.details = run_stats(); break;
        case Stage::kTag: report.details = run_tag(); break;
    }

    util::atomic_write_file(report_path, report.to_json().dump(2) + "\n");
    util::log_event("stage_done", {{"stage", name}, {"details", report.details}});
    return report;
}

Json Pipeline::run_build_kb() {
    auto docs = corpus::load_corpus_jsonl(config_.corpus_file);
    auto kb = corpus::KnowledgeBase::build(std::move(docs), embedder());
    kb.save(out_path("kb"));

    Json details = Json::object();
    details["documents"] = kb.size();
    details["embedder"] = embedder()->identity();
    details["dim"] = kb.size() > 0 ? kb.embedding(0).dim() : 0;
    details["failures"] = Json::array();
    return details;
}

Json Pipeline::run_explore(std::vector<std::string>& artifacts) {
    auto kb = corpus::KnowledgeBase::load(out_path("kb"), embedder());
    auto seeds = util::read_line_list(config_.seeds_file);
    if (config_.limit > 0 && static_cast<int>(seeds.size()) > config_.limit) {
        seeds.resize(static_cast<std::size_t>(config_.limit));
    }
    if (seeds.empty()) {
        throw StageError("seeds file " + config_.seeds_file + " lists no seed entities");
    }

    curator::ExploreConfig ec;
    ec.branch.by_depth = config_.branch_probabilities;
    ec.max_depth = config_.max_depth;
    ec.tau = config_.tau;
    ec.default_top_k = config_.k;
    ec.distractor_budget = config_.distractor_budget;
    ec.observation_char_cap = config_.observation_char_cap;
    ec.sampling = role_sampling("curator");

    auto backend = role_backend("curator");
    std::vector<curator::InfoTree> trees(seeds.size());
    parallel_for(seeds.size(), worker_count("curator", seeds.size()), [&](std::size_t i) {
        SeededRng rng(derive_seed(config_.seed, "curator", i));
        trees[i] = curator::explore_tree(seeds[i], "tree-" + util::format_index(i + 1, 4), ec, kb,
                                         *backend, rng);
    });

    artifacts.clear();
    int failed = 0;
    int node_total = 0;
    int distractor_total = 0;
    Json failures = Json::array();
    Json below_budget = Json::array();
    for (const auto& tree : trees) {
        Json tj = curator::tree_to_json(tree);
        tj["config_hash"] = config_hash_;
        tj["prompts_version"] = prompts::kVersion;
        const std::string rel = "trees/" + tree.tree_id + ".json";
        util::atomic_write_file(out_path(rel), tj.dump(2) + "\n");
        artifacts.push_back(rel);

        node_total += tree.quality.node_count;
        distractor_total += static_cast<int>(tree.distractor_store.size());
        if (tree.failed) {
            ++failed;
            failures.push_back(Json{{"tree_id", tree.tree_id}, {"reason", tree.failure_reason}});
            util::log_event("item_failed", {{"stage", "explore"},
                                            {"tree_id", tree.tree_id},
                                            {"reason", tree.failure_reason}});
        }
        if (tree.quality.below_distractor_budget) below_budget.push_back(tree.tree_id);
    }

    Json details = Json::object();
    details["trees"] = seeds.size();
    details["failed"] = failed;
    details["failures"] = failures;
    details["nodes"] = node_total;
    details["distractor_docs"] = distractor_total;
    details["below_distractor_budget"] = below_budget;
    return details;
}

Json Pipeline::run_select_paths() {
    auto kb = corpus::KnowledgeBase::load(out_path("kb"), embedder());
    auto files = list_tree_files(out_path("trees"));

    std::vector<Json> rows;
    int skipped_failed = 0;
    for (const auto& file : files) {
        Json tj = Json::parse(util::read_file(file));
        if (tj.value("failed", false)) {
            ++skipped_failed;
            continue;
        }
        curator::InfoTree tree = curator::tree_from_json(tj, kb);
        for (const auto& path : curator::select_paths(tree, config_.selection_m)) {
            rows.push_back(curator::path_to_json(path));
        }
    }
    util::write_jsonl_file(out_path("paths/paths.jsonl"), rows);

    Json details = Json::object();
    details["trees"] = files.size();
    details["failed_trees_skipped"] = skipped_failed;
    details["paths"] = rows.size();
    return details;
}

Json Pipeline::run_synth_qa() {
    auto kb = corpus::KnowledgeBase::load(out_path("kb"), embedder());
    auto path_rows = util::read_jsonl_file(out_path("paths/paths.jsonl"));

    std::map<std::string, curator::InfoTree> trees;
    for (const auto& file : list_tree_files(out_path("trees"))) {
        Json tj = Json::parse(util::read_file(file));
        if (tj.value("failed", false)) continue;
        curator::InfoTree tree = curator::tree_from_json(tj, kb);
        trees[tree.tree_id] = std::move(tree);
    }

    synthesis::SynthesisConfig sc;
    sc.observation_char_cap = config_.observation_char_cap;
    sc.sampling = role_sampling("synthesizer");
    auto backend = role_backend("synthesizer");

    struct Slot {
        bool ok = false;
        synthesis::QAItem qa;
        std::string qa_id;
        std::string tree_id;
        std::string error;
    };
    std::vector<Slot> slots(path_rows.size());
    parallel_for(path_rows.size(), worker_count("synthesizer", path_rows.size()),
                 [&](std::size_t i) {
                     Slot& slot = slots[i];
                     slot.qa_id = "qa-" + util::format_index(i + 1, 4);
                     curator::InfoPath path = curator::path_from_json(path_rows[i]);
                     slot.tree_id = path.tree_id;
                     auto it = trees.find(path.tree_id);
                     if (it == trees.end()) {
                         slot.error = "tree " + path.tree_id + " not found among loaded trees";
                         return;
                     }
                     try {
                         synthesis::QAItem qa = synthesis::synthesize_qa(it->second, path, sc,
                                                                         *backend);
                         qa.qa_id = slot.qa_id;
                         slot.qa = std::move(qa);
                         slot.ok = true;
                     } catch (const std::exception& e) {
                         slot.error = e.what();
                     }
                 });

    std::vector<Json> rows;
    Json failures = Json::array();
    for (const Slot& slot : slots) {
        if (slot.ok) {
            rows.push_back(synthesis::qa_to_json(slot.qa));
        } else {
            failures.push_back(Json{{"qa_id", slot.qa_id},
                                    {"tree_id", slot.tree_id},
                                    {"reason", slot.error}});
            util::log_event("item_failed", {{"stage", "synth-qa"},
                                            {"qa_id", slot.qa_id},
                                            {"reason", slot.error}});
        }
    }
    util::write_jsonl_file(out_path("qa/qa.jsonl"), rows);

    Json details = Json::object();
    details["paths"] = path_rows.size();
    details["qa"] = rows.size();
    details["failed"] = failures.size();
    details["failures"] = failures;
    return details;
}

Json Pipeline::run_elicit() {
    auto kb = corpus::KnowledgeBase::load(out_path("kb"), embedder());
    auto qa_rows = util::read_jsonl_file(out_path("qa/qa.jsonl"));
    if (config_.limit > 0 && static_cast<int>(qa_rows.size()) > config_.limit) {
        qa_rows.resize(static_cast<std::size_t>(config_.limit));
    }

    // Distractor documents, gathered from the completed trees. Failed trees
    // contribute nothing: their questions never reached this stage.
    std::map<std::string, std::vector<corpus::Document>> store_by_tree;
    std::vector<corpus::Document> all_docs;
    for (const auto& file : list_tree_files(out_path("trees"))) {
        Json tj = Json::parse(util::read_file(file));
        if (tj.value("failed", false)) continue;
        const std::string tree_id = tj.at("tree_id").get<std::string>();
        std::vector<corpus::Document> docs;
        for (const Json& dj : tj.at("distractor_store")) {
            docs.push_back(corpus::document_from_json(dj));
        }
        all_docs.insert(all_docs.end(), docs.begin(), docs.end());
        store_by_tree[tree_id] = std::move(docs);
    }

    std::map<std::string, corpus::KnowledgeBase> stores;
    if (config_.distractor_scope == "per-tree") {
        for (const auto& [tree_id, docs] : store_by_tree) {
            stores.emplace(tree_id, corpus::KnowledgeBase::build(docs, embedder()));
        }
    }
    corpus::KnowledgeBase batch_store = corpus::KnowledgeBase::build(all_docs, embedder());

    elicit::ElicitConfig el;
    el.k = config_.k;
    el.tau = config_.tau;
    el.p_e = config_.p_e;
    el.max_steps = config_.max_steps;
    el.observation_char_cap = config_.observation_char_cap;
    el.sampling = role_sampling("teacher");

    teacher_recorder_ = std::make_shared<llm::RecordingBackend>(role_backend("teacher"));
    std::vector<elicit::Trajectory> out(qa_rows.size());
    parallel_for(qa_rows.size(), worker_count("teacher", qa_rows.size()), [&](std::size_t i) {
        synthesis::QAItem qa = synthesis::qa_from_json(qa_rows[i]);
        const corpus::KnowledgeBase* store = &batch_store;
        if (config_.distractor_scope == "per-tree") {
            auto it = stores.find(qa.tree_id);
            if (it != stores.end()) store = &it->second;
        }
        SeededRng rng(derive_seed(config_.seed, "teacher", i));
        elicit::Trajectory t =
            elicit::run_teacher(qa.question, kb, *store, el, *teacher_recorder_, rng);
        t.qa_id = qa.qa_id;
        out[i] = std::move(t);
    });

    // The solver must never have been told about the planted documents.
    // Any taxonomy vocabulary in its transcript is a plumbing leak.
    static const char* kForbidden[] = {"distractor",          "doppelganger",
                                       "doppelgänger",   "false_shortcut",
                                       "fragmented_puzzle",   "subjective_fallacy",
                                       "secondary knowledge base"};
    const std::string transcript = teacher_recorder_->transcript_text();
    std::vector<std::string> leaked;
    for (const char* term : kForbidden) {
        if (util::contains_ci(transcript, term)) leaked.emplace_back(term);
    }
    if (!leaked.empty()) {
        std::string joined;
        for (const auto& term : leaked) joined += (joined.empty() ? "" : ", ") + term;
        throw StageError("solver transcript mentions hidden-store vocabulary: " + joined);
    }

    std::vector<Json> rows;
    int injected_steps = 0;
    int degraded_steps = 0;
    int below_threshold_steps = 0;
    std::map<std::string, int> by_termination;
    for (const auto& t : out) {
        rows.push_back(elicit::trajectory_to_json(t));
        ++by_termination[elicit::to_string(t.terminated_by)];
        for (const auto& step : t.steps) {
            injected_steps += step.distractor_injected ? 1 : 0;
            degraded_steps += step.degraded ? 1 : 0;
            below_threshold_steps += step.below_threshold ? 1 : 0;
        }
    }
    util::write_jsonl_file(out_path("trajectories/trajectories.jsonl"), rows);

    Json details = Json::object();
    details["questions"] = qa_rows.size();
    details["trajectories"] = rows.size();
    Json term = Json::object();
    for (const char* key : {"answer", "step_limit", "protocol_error"}) {
        term[key] = by_termination.count(key) ? by_termination.at(key) : 0;
    }
    details["by_termination"] = term;
    details["injected_steps"] = injected_steps;
    details["degraded_steps"] = degraded_steps;
    details["below_threshold_steps"] = below_threshold_steps;
    details["hidden_store_docs"] = all_docs.size();
    details["transcript_scan"] = "clean";
    return details;
}

Json Pipeline::run_score_filter() {
    auto qa_rows = util::read_jsonl_file(out_path("qa/qa.jsonl"));
    std::map<std::string, synthesis::QAItem> qa_by_id;
    for (const Json& row : qa_rows) {
        synthesis::QAItem qa = synthesis::qa_from_json(row);
        qa_by_id[qa.qa_id] = std::move(qa);
    }

    auto traj_rows = util::read_jsonl_file(out_path("trajectories/trajectories.jsonl"));
    std::vector<quality::ScoredSample> samples;
    int missing_qa = 0;
    for (const Json& row : traj_rows) {
        elicit::Trajectory t = elicit::trajectory_from_json(row);
        auto it = qa_by_id.find(t.qa_id);
        if (it == qa_by_id.end()) {
            ++missing_qa;
            continue;
        }
        samples.push_back(quality::score_sample(it->second, std::move(t)));
    }

    quality::FilterReport fr = quality::filter_dataset(samples, config_.filter_threshold);

    std::vector<Json> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(quality::scored_to_json(s));
    util::write_jsonl_file(out_path("scored/scored.jsonl"), rows);

    Json details = Json::object();
    details["threshold"] = fr.threshold;
    details["boundary"] = fr.boundary;
    details["total"] = fr.total;
    details["accepted"] = fr.accepted;
    details["acceptance_rate"] = fr.total > 0 ? static_cast<double>(fr.accepted) / fr.total : 0.0;
    Json rejected = Json::object();
    for (const auto& [reason, count] : fr.rejected_by_reason) rejected[reason] = count;
    details["rejected_by_reason"] = rejected;
    details["missing_qa"] = missing_qa;
    return details;
}

namespace {

// Re-joins the scored summaries with their QA items and trajectories.
std::vector<quality::ScoredSample> load_scored_samples(const fs::path& scored_file,
                                                       const fs::path& qa_file,
                                                       const fs::path& traj_file) {
    std::map<std::string, synthesis::QAItem> qa_by_id;
    for (const Json& row : util::read_jsonl_file(qa_file)) {
        synthesis::QAItem qa = synthesis::qa_from_json(row);
        qa_by_id[qa.qa_id] = std::move(qa);
    }
    std::map<std::string, elicit::Trajectory> traj_by_id;
    for (const Json& row : util::read_jsonl_file(traj_file)) {
        elicit::Trajectory t = elicit::trajectory_from_json(row);
        traj_by_id[t.qa_id] = std::move(t);
    }

    std::vector<quality::ScoredSample> samples;
    for (const Json& row : util::read_jsonl_file(scored_file)) {
        quality::ScoredSample s = quality::scored_from_json(row);
        const std::string qa_id = s.qa.qa_id;
        auto qa_it = qa_by_id.find(qa_id);
        if (qa_it == qa_by_id.end()) {
            throw StageError("scored sample " + qa_id + " has no matching row in " +
                             qa_file.string());
        }
        auto traj_it = traj_by_id.find(qa_id);
        if (traj_it == traj_by_id.end()) {
            throw StageError("scored sample " + qa_id + " has no matching row in " +
                             traj_file.string());
        }
        s.qa = qa_it->second;
        s.trajectory = traj_it->second;
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace

Json Pipeline::run_export() {
    auto samples = load_scored_samples(out_path("scored/scored.jsonl"), out_path("qa/qa.jsonl"),
                                       out_path("trajectories/trajectories.jsonl"));

    std::vector<dataset::TrainingSample> exported;
    for (const auto& s : samples) {
        if (!s.accepted) continue;
        dataset::TrainingSample ts = dataset::to_training_sample(s, config_hash_);
        dataset::MaskReport mask = dataset::verify_masks(ts);
        if (!mask.passed) {
            std::string joined;
            for (const auto& v : mask.violations) joined += (joined.empty() ? "" : "; ") + v;
            throw StageError("exported sample " + s.qa.qa_id + " failed mask checks: " + joined);
        }
        exported.push_back(std::move(ts));
    }
    const std::size_t written = dataset::write_jsonl(out_path("sft/train.jsonl"), exported);

    Json details = Json::object();
    details["accepted"] = exported.size();
    details["exported"] = written;
    details["samples_file"] = "sft/train.jsonl";
    return details;
}

Json Pipeline::run_stats() {
    auto samples = [&] {
        std::map<std::string, elicit::Trajectory> traj_by_id;
        for (const Json& row :
             util::read_jsonl_file(out_path("trajectories/trajectories.jsonl"))) {
            elicit::Trajectory t = elicit::trajectory_from_json(row);
            traj_by_id[t.qa_id] = std::move(t);
        }
        std::vector<quality::ScoredSample> out;
        for (const Json& row : util::read_jsonl_file(out_path("scored/scored.jsonl"))) {
            quality::ScoredSample s = quality::scored_from_json(row);
            auto it = traj_by_id.find(s.qa.qa_id);
            if (it != traj_by_id.end()) s.trajectory = it->second;
            out.push_back(std::move(s));
        }
        return out;
    }();

    int accepted = 0;
    double f1_sum = 0.0;
    std::map<std::string, int> by_termination;
    std::vector<quality::ScoredSample> accepted_samples;
    for (const auto& s : samples) {
        ++by_termination[elicit::to_string(s.trajectory.terminated_by)];
        if (s.accepted) {
            ++accepted;
            f1_sum += s.f1;
            accepted_samples.push_back(s);
        }
    }
    std::map<int, int> histogram = quality::tool_call_histogram(accepted_samples);

    Json details = Json::object();
    details["total"] = samples.size();
    details["accepted"] = accepted;
    details["acceptance_rate"] =
        samples.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(samples.size());
    details["mean_accepted_f1"] = accepted > 0 ? f1_sum / accepted : 0.0;
    Json hist = Json::object();
    for (const auto& [calls, count] : histogram) hist[std::to_string(calls)] = count;
    details["tool_call_histogram"] = hist;
    Json term = Json::object();
    for (const char* key : {"answer", "step_limit", "protocol_error"}) {
        term[key] = by_termination.count(key) ? by_termination.at(key) : 0;
    }
    details["by_termination"] = term;

    if (fs::exists(out_path("tags/tags.jsonl"))) {
        std::map<std::string, int> by_category;
        for (const Json& row : util::read_jsonl_file(out_path("tags/tags.jsonl"))) {
            ++by_category[row.at("category").get<std::string>()];
        }
        Json tags = Json::object();
        for (const char* key :
             {"handling_success", "fallback_success", "direct_answer", "failure"}) {
            tags[key] = by_category.count(key) ? by_category.at(key) : 0;
        }
        details["tags_by_category"] = tags;
    }
    return details;
}

Json Pipeline::run_tag() {
    auto samples = load_scored_samples(out_path("scored/scored.jsonl"), out_path("qa/qa.jsonl"),
                                       out_path("trajectories/trajectories.jsonl"));
    std::vector<const quality::ScoredSample*> targets;
    for (const auto& s : samples) {
        if (s.accepted || config_.tag_rejected) targets.push_back(&s);
    }

    auto backend = role_backend("tagger");
    const llm::SamplingParams params = role_sampling("tagger");
    std::vector<quality::BehaviorTag> tags(targets.size());
    parallel_for(targets.size(), worker_count("tagger", targets.size()), [&](std::size_t i) {
        tags[i] = quality::tag_trajectory(*targets[i], *backend, params);
    });

    std::vector<Json> rows;
    std::map<std::string, int> by_category;
    std::map<std::string, std::map<std::string, int>> per_distractor;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Json row = Json::object();
        row["qa_id"] = targets[i]->qa.qa_id;
        const Json tag_json = quality::tag_to_json(tags[i]);
        for (const auto& item : tag_json.items()) {
            row[item.key()] = item.value();
        }
        rows.push_back(std::move(row));
        ++by_category[quality::to_string(tags[i].category)];
        for (const auto& [dim, outcome] : tags[i].per_distractor) {
            ++per_distractor[corpus::to_string(dim)][quality::to_string(outcome)];
        }
    }
    util::write_jsonl_file(out_path("tags/tags.jsonl"), rows);

    Json details = Json::object();
    details["tagged"] = rows.size();
    Json cats = Json::object();
    for (const char* key : {"handling_success", "fallback_success", "direct_answer", "failure"}) {
        cats[key] = by_category.count(key) ? by_category.at(key) : 0;
    }
    details["by_category"] = cats;
    Json dims = Json::object();
    for (const auto& [dim, outcomes] : per_distractor) {
        Json o = Json::object();
        for (const char* key : {"resolved", "misled", "unseen"}) {
            o[key] = outcomes.count(key) ? outcomes.at(key) : 0;
        }
        dims[dim] = o;
    }
    details["per_distractor"] = dims;
    return details;
}

Json Pipeline::run_all() {
    Json stages = Json::array();
    std::string failed_stage;
    std::string error;
    Json stats_details;

    for (Stage stage : kAllStages) {
        try {
            StageReport report = run_stage(stage);
            if (stage == Stage::kStats) stats_details = report.details;
            stages.push_back(report.to_json());
        } catch (const std::exception& e) {
            failed_stage = to_string(stage);
            error = e.what();
            util::log_event("stage_failed", {{"stage", failed_stage}, {"error", error}});
            break;
        }
    }

    Json report = Json::object();
    report["config_hash"] = config_hash_;
    report["ok"] = failed_stage.empty();
    if (!failed_stage.empty()) {
        report["failed_stage"] = failed_stage;
        report["error"] = error;
    }
    if (stats_details.is_object()) {
        report["total"] = stats_details.value("total", 0);
        report["accepted"] = stats_details.value("accepted", 0);
        report["acceptance_rate"] = stats_details.value("acceptance_rate", 0.0);
        report["tool_call_histogram"] = stats_details.value("tool_call_histogram", Json::object());
    }
    report["stages"] = stages;
    util::atomic_write_file(out_path("reports/run.json"), report.dump(2) + "\n");
    return report;
}

}  // namespace ragforge::pipeline
