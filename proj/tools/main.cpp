// Command-line front end: one verb per pipeline stage plus run-all.
// Stage reports go to stdout as JSON; structured progress logs go to stderr.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ragforge/errors.hpp"
#include "ragforge/pipeline.hpp"
#include "ragforge/util.hpp"

namespace {

struct VerbDoc {
    const char* name;
    const char* help;
};

constexpr VerbDoc kVerbs[] = {
    {"build-kb", "Embed the corpus and write the vector index"},
    {"explore", "Grow information trees from the seed entities"},
    {"select-paths", "Pick the highest-yield root-to-leaf paths"},
    {"synth-qa", "Generate multi-hop QA pairs from the selected paths"},
    {"elicit", "Collect solver trajectories with routed retrieval"},
    {"score-filter", "Score trajectories against gold answers and filter"},
    {"export", "Write loss-masked training samples"},
    {"stats", "Summarize acceptance and the tool-call distribution"},
    {"tag", "Label solver behavior on each accepted sample"},
    {"run-all", "Run every stage in order, stopping at the first failure"},
};

}  // namespace

int main(int argc, char** argv) {
    using namespace ragforge;

    CLI::App app{"Offline synthesis pipeline for noise-robust retrieval agents"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> limit;
    std::string backend_spec;
    bool force = false;

    app.add_option("--config", config_path, "pipeline config (JSON)")->required();
    app.add_option("--seed", seed, "override the master RNG seed");
    app.add_option("--limit", limit, "truncate to N seeds / questions (desk-scale runs)");
    app.add_option("--backend", backend_spec,
                   "override every model role: \"live\" or \"replay:<script-dir>\"");
    app.add_flag("--force", force, "re-run stages even when outputs are up to date");

    for (const VerbDoc& verb : kVerbs) {
        app.add_subcommand(verb.name, verb.help)->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);
    const std::string verb = app.get_subcommands().front()->get_name();

    try {
        Json config_json;
        try {
            config_json = Json::parse(util::read_file(config_path));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("config file " + config_path + " is not valid JSON: " +
                                  e.what());
        }
        pipeline::PipelineConfig cfg = pipeline::config_from_json(config_json);
        if (seed) cfg.seed = *seed;
        if (limit) cfg.limit = *limit;
        if (force) cfg.force = true;
        if (!backend_spec.empty()) pipeline::apply_backend_override(cfg, backend_spec);

        pipeline::Pipeline pipe(cfg);
        if (verb == "run-all") {
            Json report = pipe.run_all();
            std::cout << report.dump(2) << "\n";
            return report.value("ok", false) ? 0 : 1;
        }
        pipeline::StageReport report = pipe.run_stage(pipeline::stage_from_string(verb));
        if (report.skipped) {
            std::cerr << "stage " << verb << ": up to date\n";
        }
        std::cout << report.to_json().dump(2) << "\n";
        return 0;
    } catch (const std::exception& e) {
        util::log_event("fatal", {{"verb", verb}, {"error", e.what()}});
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
