#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spiral/dataset.hpp"
#include "spiral/evaluate.hpp"
#include "spiral/http_backend.hpp"
#include "spiral/mcts.hpp"
#include "spiral/metrics.hpp"
#include "spiral/oracle.hpp"

namespace spiral {

/// A parsed --method string: spiral | cot:<k> | mcts:<n> | ablation:<flag>.
struct MethodSpec {
    enum class Family { Spiral, Cot, Mcts, Ablation };
    Family family = Family::Spiral;
    int level = 0;             // k for cot, N for mcts
    std::string ablation_flag; // no_planner | no_simulator | no_critic | uniform_rewards
    std::string label;         // record "method" field

    static MethodSpec parse(const std::string& text);
};

struct SweepConfig {
    std::vector<int> budgets;
    std::vector<double> alphas;
    bool active() const { return !budgets.empty() || !alphas.empty(); }
};

struct ExperimentConfig {
    std::string dataset_path;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds = {42, 101, 1234, 2024, 12345};
    std::string backend = "scripted"; // scripted | http
    std::size_t sample_n = 0;         // 0 = every task
    bool cascade = false;             // evaluate methods on the CoT(k=1) residual
    SearchConfig search;
    OracleConfig oracle; // rng_seed is overridden by each run's seed
    HttpBackendConfig http;
    MatchPolicy match_policy = MatchPolicy::MultisetTopo;
    std::string out_dir = "out";
    int workers = 1;
    bool trace = false;
    bool emit_timings = false;
    SweepConfig sweep;

    void validate() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::ordered_json& document);
ExperimentConfig load_experiment_config(const std::string& path);

/// Seeded shuffle, first n. Throws SampleTooLarge when n exceeds the pool.
std::vector<Task> sample_split(const std::vector<Task>& tasks, std::uint64_t seed,
                               std::size_t n);

/// Tasks whose CoT(k=1) record is a failure, in task order.
std::vector<Task> build_residual(const std::vector<RunRecord>& records,
                                 const std::vector<Task>& tasks);

/// One method on one task; the scripted backend is seeded with the run seed.
RunRecord run_single(const Task& task, const MethodSpec& method, const ExperimentConfig& config,
                     const SearchConfig& search, std::uint64_t seed);

struct ExperimentOutput {
    std::string records_path;
    std::string metrics_path;
    std::vector<RunRecord> records;
};

/// Full protocol: per seed, sample, optionally cascade through CoT(k=1) to a
/// residual set, run every method (and sweep variant), then emit
/// records.jsonl and metrics.json under out_dir. Record order and content
/// are independent of the worker count.
ExperimentOutput run_experiment(const ExperimentConfig& config);

} // namespace spiral
