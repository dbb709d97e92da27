// Command-line entry point for the planning benchmark harness.
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spiral/errors.hpp"
#include "spiral/experiment.hpp"

namespace {

struct RunFlags {
    std::string config_path;
    std::string dataset;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;
    std::string backend;
    std::string out_dir;
    int budget = -1;
    double alpha = -1.0;
    double c_explore = -1.0;
    int max_depth = -1;
    int workers = -1;
    std::size_t sample_n = 0;
    bool sample_n_set = false;
    bool trace = false;
    bool cascade = false;
    bool timings = false;
    double planner_error_rate = -1.0;
    double simulator_noise_rate = -1.0;
    double critic_fidelity = -1.0;
};

spiral::ExperimentConfig merge(const RunFlags& flags) {
    spiral::ExperimentConfig config;
    if (!flags.config_path.empty())
        config = spiral::load_experiment_config(flags.config_path);
    if (!flags.dataset.empty()) config.dataset_path = flags.dataset;
    if (!flags.methods.empty()) config.methods = flags.methods;
    if (!flags.seeds.empty()) config.seeds = flags.seeds;
    if (!flags.backend.empty()) config.backend = flags.backend;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.budget > 0) config.search.budget = flags.budget;
    if (flags.alpha >= 0.0) config.search.alpha = flags.alpha;
    if (flags.c_explore >= 0.0) config.search.exploration = flags.c_explore;
    if (flags.max_depth > 0) config.search.max_depth = flags.max_depth;
    if (flags.workers > 0) config.workers = flags.workers;
    if (flags.sample_n_set) config.sample_n = flags.sample_n;
    if (flags.trace) config.trace = true;
    if (flags.cascade) config.cascade = true;
    if (flags.timings) config.emit_timings = true;
    if (flags.planner_error_rate >= 0.0)
        config.oracle.planner_error_rate = flags.planner_error_rate;
    if (flags.simulator_noise_rate >= 0.0)
        config.oracle.simulator_noise_rate = flags.simulator_noise_rate;
    if (flags.critic_fidelity >= 0.0) config.oracle.critic_fidelity = flags.critic_fidelity;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grounded reflective tree-search planner and benchmark harness"};
    app.require_subcommand(1);

    RunFlags flags;
    CLI::App* run = app.add_subcommand("run", "Run a benchmark experiment");
    run->add_option("--config", flags.config_path, "Experiment config JSON file");
    run->add_option("--dataset", flags.dataset, "Dataset JSON file");
    run->add_option("--method", flags.methods,
                    "Method: spiral | cot:<k> | mcts:<n> | ablation:<flag> (repeatable)");
    run->add_option("--seeds", flags.seeds, "Run seeds (repeatable)");
    run->add_option("--backend", flags.backend, "Backend: scripted | http");
    run->add_option("--budget", flags.budget, "MCTS iteration budget K");
    run->add_option("--alpha", flags.alpha, "Reward shaping blend in [0, 1]");
    run->add_option("--c-explore", flags.c_explore, "UCT exploration constant");
    run->add_option("--max-depth", flags.max_depth, "Tree depth cap D");
    run->add_option("--out", flags.out_dir, "Output directory");
    run->add_option("--workers", flags.workers, "Parallel task workers");
    auto* sample = run->add_option("--sample-n", flags.sample_n,
                                   "Seeded sample size per run (0 = all tasks)");
    run->add_flag("--trace", flags.trace, "Write per-iteration search traces");
    run->add_flag("--cascade", flags.cascade,
                  "Evaluate methods on the CoT(k=1) residual set");
    run->add_flag("--timings", flags.timings, "Include wall times in records.jsonl");
    run->add_option("--planner-error-rate", flags.planner_error_rate,
                    "Scripted backend decoy probability");
    run->add_option("--simulator-noise-rate", flags.simulator_noise_rate,
                    "Scripted backend observation noise probability");
    run->add_option("--critic-fidelity", flags.critic_fidelity,
                    "Scripted backend critic fidelity in [0, 1]");

    CLI11_PARSE(app, argc, argv);
    flags.sample_n_set = sample->count() > 0;

    try {
        spiral::ExperimentConfig config = merge(flags);
        spiral::ExperimentOutput output = spiral::run_experiment(config);
        std::cout << "records: " << output.records_path << "\n"
                  << "metrics: " << output.metrics_path << "\n"
                  << "runs:    " << output.records.size() << "\n";
    } catch (const spiral::Error& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 0;
}
