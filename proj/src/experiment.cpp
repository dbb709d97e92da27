#include "spiral/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "spiral/cot.hpp"
#include "spiral/engine.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"

namespace spiral {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double value) {
    std::ostringstream out;
    out << value;
    return out.str();
}

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& body) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int spawn = std::min<int>(workers, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(spawn));
    for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
    if (failure) std::rethrow_exception(failure);
}

std::string sanitize_for_filename(std::string text) {
    for (char& c : text)
        if (c == '/' || c == ':' || c == '=' || c == ' ') c = '_';
    return text;
}

std::string diagnostic_line(const Diagnostic& diagnostic) {
    std::ostringstream out;
    out << "iter=" << diagnostic.iteration << " " << diagnostic.kind;
    if (!diagnostic.detail.empty()) {
        std::string detail = diagnostic.detail.substr(0, 120);
        for (char& c : detail)
            if (c == '\n') c = ' ';
        out << ": " << detail;
    }
    return out.str();
}

} // namespace

MethodSpec MethodSpec::parse(const std::string& text) {
    MethodSpec spec;
    auto colon = text.find(':');
    std::string head = text.substr(0, colon);
    std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);

    if (head == "spiral") {
        if (!tail.empty()) throw ConfigError("spiral takes no argument: " + text);
        spec.family = Family::Spiral;
        spec.label = "spiral";
        return spec;
    }
    if (head == "cot" || head == "mcts") {
        int level = 0;
        try {
            level = std::stoi(tail);
        } catch (...) {
            throw ConfigError("expected " + head + ":<integer>, got: " + text);
        }
        if (level < 1) throw ConfigError(head + " level must be >= 1: " + text);
        spec.family = head == "cot" ? Family::Cot : Family::Mcts;
        spec.level = level;
        spec.label = head + "_" + std::to_string(level);
        return spec;
    }
    if (head == "ablation") {
        static const std::vector<std::string> known = {"no_planner", "no_simulator",
                                                       "no_critic", "uniform_rewards"};
        if (std::find(known.begin(), known.end(), tail) == known.end())
            throw ConfigError("unknown ablation flag: " + text);
        spec.family = Family::Ablation;
        spec.ablation_flag = tail;
        spec.label = "ablation_" + tail;
        return spec;
    }
    throw ConfigError("unknown method: " + text);
}

void ExperimentConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("experiment needs a dataset path");
    if (methods.empty()) throw ConfigError("experiment needs at least one method");
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
    if (backend != "scripted" && backend != "http")
        throw ConfigError("backend must be scripted or http");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    for (const auto& method : methods) MethodSpec::parse(method);
    oracle.validate();
}

ExperimentConfig parse_experiment_config(const ordered_json& document) {
    if (!document.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig config;
    config.dataset_path = document.value("dataset", std::string());
    if (document.contains("methods"))
        config.methods = document["methods"].get<std::vector<std::string>>();
    if (document.contains("seeds"))
        config.seeds = document["seeds"].get<std::vector<std::uint64_t>>();
    config.backend = document.value("backend", std::string("scripted"));
    config.sample_n = document.value("sample_n", static_cast<std::size_t>(0));
    config.cascade = document.value("cascade", false);
    config.search.budget = document.value("budget", config.search.budget);
    config.search.alpha = document.value("alpha", config.search.alpha);
    config.search.exploration = document.value("c_explore", config.search.exploration);
    config.search.max_depth = document.value("max_depth", config.search.max_depth);
    config.search.terminal_reward =
        document.value("r_terminal", config.search.terminal_reward);
    if (document.contains("match_policy"))
        config.match_policy =
            match_policy_from_string(document["match_policy"].get<std::string>());
    config.out_dir = document.value("out", config.out_dir);
    config.workers = document.value("workers", config.workers);
    config.trace = document.value("trace", config.trace);
    config.emit_timings = document.value("timings", config.emit_timings);
    if (document.contains("oracle")) {
        const auto& oracle = document["oracle"];
        config.oracle.planner_error_rate =
            oracle.value("planner_error_rate", config.oracle.planner_error_rate);
        config.oracle.simulator_noise_rate =
            oracle.value("simulator_noise_rate", config.oracle.simulator_noise_rate);
        config.oracle.critic_fidelity =
            oracle.value("critic_fidelity", config.oracle.critic_fidelity);
    }
    if (document.contains("http")) {
        const auto& http = document["http"];
        config.http.endpoint = http.value("endpoint", config.http.endpoint);
        config.http.model = http.value("model", config.http.model);
        config.http.auth_env = http.value("auth_env", config.http.auth_env);
        config.http.timeout_seconds = http.value("timeout", config.http.timeout_seconds);
        config.http.planner.temperature =
            http.value("planner_temperature", config.http.planner.temperature);
        config.http.planner.max_output =
            http.value("max_output", config.http.planner.max_output);
        config.http.simulator.max_output = config.http.planner.max_output;
        config.http.critic.max_output = config.http.planner.max_output;
    }
    if (document.contains("sweep")) {
        const auto& sweep = document["sweep"];
        if (sweep.contains("budgets"))
            config.sweep.budgets = sweep["budgets"].get<std::vector<int>>();
        if (sweep.contains("alphas"))
            config.sweep.alphas = sweep["alphas"].get<std::vector<double>>();
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream stream(path);
    if (!stream) throw ConfigError("cannot open config file: " + path);
    ordered_json document;
    try {
        stream >> document;
    } catch (const nlohmann::json::exception& error) {
        throw ConfigError(std::string("config is not valid JSON: ") + error.what() +
                          " in " + path);
    }
    return parse_experiment_config(document);
}

std::vector<Task> sample_split(const std::vector<Task>& tasks, std::uint64_t seed,
                               std::size_t n) {
    if (n > tasks.size())
        throw SampleTooLarge("requested " + std::to_string(n) + " of " +
                             std::to_string(tasks.size()) + " tasks");
    std::vector<Task> shuffled = tasks;
    deterministic_shuffle(shuffled, mix_seeds(seed, 0x5a6d7c8e9fULL));
    shuffled.resize(n);
    return shuffled;
}

std::vector<Task> build_residual(const std::vector<RunRecord>& records,
                                 const std::vector<Task>& tasks) {
    std::map<std::string, bool> failed;
    for (const auto& record : records)
        if (!record.success) failed[record.task_id] = true;
    std::vector<Task> residual;
    for (const auto& task : tasks)
        if (failed.count(task.id)) residual.push_back(task);
    return residual;
}

RunRecord run_single(const Task& task, const MethodSpec& method,
                     const ExperimentConfig& config, const SearchConfig& search,
                     std::uint64_t seed) {
    RunRecord record;
    record.task_id = task.id;
    record.method = method.label;
    record.seed = seed;
    record.simple = task.simple();

    std::unique_ptr<AgentBackend> backend;
    if (config.backend == "scripted") {
        OracleConfig oracle = config.oracle;
        oracle.rng_seed = seed;
        backend = std::make_unique<ScriptedOracleBackend>(task, oracle);
    } else {
        backend = std::make_unique<HttpChatBackend>(config.http);
    }

    SearchConfig run_config = search;
    if (config.trace && method.family != MethodSpec::Family::Cot) {
        std::filesystem::path trace = std::filesystem::path(config.out_dir) / "traces" /
                                      (std::to_string(seed) + "_" +
                                       sanitize_for_filename(method.label) + "_" +
                                       sanitize_for_filename(task.id) + ".jsonl");
        run_config.trace_path = trace.string();
    }

    auto started = std::chrono::steady_clock::now();
    PlanResult result;
    bool backend_failed = false;
    try {
        switch (method.family) {
        case MethodSpec::Family::Spiral:
            result = run_search(task, *backend, run_config, seed);
            break;
        case MethodSpec::Family::Cot:
            result = run_cot(task, *backend, method.level, seed);
            break;
        case MethodSpec::Family::Mcts:
            run_config.budget = method.level;
            run_config.standard_rollout = true;
            run_config.use_critic = false;
            run_config.use_simulator = false;
            result = run_standard_mcts(task, *backend, run_config, seed);
            break;
        case MethodSpec::Family::Ablation:
            if (method.ablation_flag == "no_planner") run_config.use_planner_persona = false;
            else if (method.ablation_flag == "no_simulator") run_config.use_simulator = false;
            else if (method.ablation_flag == "no_critic") run_config.use_critic = false;
            else run_config.uniform_rewards = true;
            result = run_ablation(task, *backend, run_config, seed);
            break;
        }
    } catch (const BackendError& error) {
        backend_failed = true;
        record.diagnostics.push_back(std::string("backend_error: ") + error.what());
    }
    auto finished = std::chrono::steady_clock::now();
    record.wall_time_s = std::chrono::duration<double>(finished - started).count();

    if (!backend_failed) {
        for (const auto& action : result.plan)
            record.predicted_plan.push_back(action.canonical());
        record.usage = result.total_usage();
        for (const auto& diagnostic : result.diagnostics)
            record.diagnostics.push_back(diagnostic_line(diagnostic));
        record.success = evaluate_plan(result.plan, task, config.match_policy);
    }
    return record;
}

namespace {

struct MethodVariant {
    MethodSpec spec;
    SearchConfig search;
};

// Sweep lists expand the spiral family into one labeled variant per (K,
// alpha) combination; other methods run once at the base configuration.
std::vector<MethodVariant> expand_variants(const ExperimentConfig& config) {
    std::vector<MethodVariant> variants;
    for (const auto& text : config.methods) {
        MethodSpec spec = MethodSpec::parse(text);
        if (spec.family != MethodSpec::Family::Spiral || !config.sweep.active()) {
            variants.push_back(MethodVariant{spec, config.search});
            continue;
        }
        std::vector<int> budgets =
            config.sweep.budgets.empty() ? std::vector<int>{config.search.budget}
                                         : config.sweep.budgets;
        std::vector<double> alphas =
            config.sweep.alphas.empty() ? std::vector<double>{config.search.alpha}
                                        : config.sweep.alphas;
        for (int budget : budgets) {
            for (double alpha : alphas) {
                MethodVariant variant{spec, config.search};
                variant.search.budget = budget;
                variant.search.alpha = alpha;
                variant.spec.label = "spiral:K=" + std::to_string(budget) +
                                     ":alpha=" + format_double(alpha);
                variants.push_back(std::move(variant));
            }
        }
    }
    return variants;
}

std::vector<RunRecord> run_batch(const std::vector<Task>& tasks, const MethodSpec& spec,
                                 const ExperimentConfig& config, const SearchConfig& search,
                                 std::uint64_t seed) {
    std::vector<RunRecord> records(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        records[i] = run_single(tasks[i], spec, config, search, seed);
    });
    return records;
}

} // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config) {
    config.validate();
    Dataset dataset = load_dataset(config.dataset_path);
    std::size_t n = config.sample_n == 0 ? dataset.tasks.size() : config.sample_n;

    std::filesystem::create_directories(config.out_dir);
    if (config.trace)
        std::filesystem::create_directories(std::filesystem::path(config.out_dir) / "traces");

    std::vector<MethodVariant> variants = expand_variants(config);
    std::vector<RunRecord> all_records;

    for (std::uint64_t seed : config.seeds) {
        std::vector<Task> sampled = sample_split(dataset.tasks, seed, n);
        std::vector<Task> eval_set = sampled;

        if (config.cascade) {
            MethodSpec cot1 = MethodSpec::parse("cot:1");
            std::vector<RunRecord> stage =
                run_batch(sampled, cot1, config, config.search, seed);
            eval_set = build_residual(stage, sampled);
            for (auto& record : stage) all_records.push_back(std::move(record));
        }

        for (const auto& variant : variants) {
            if (config.cascade && variant.spec.family == MethodSpec::Family::Cot &&
                variant.spec.level == 1)
                continue; // already ran as the cascade stage
            std::vector<RunRecord> batch =
                run_batch(eval_set, variant.spec, config, variant.search, seed);
            for (auto& record : batch) all_records.push_back(std::move(record));
        }
    }

    ExperimentOutput output;
    output.records = all_records;
    output.records_path =
        (std::filesystem::path(config.out_dir) / "records.jsonl").string();
    output.metrics_path =
        (std::filesystem::path(config.out_dir) / "metrics.json").string();

    {
        std::ofstream stream(output.records_path, std::ios::binary | std::ios::trunc);
        if (!stream) throw ConfigError("cannot write " + output.records_path);
        for (const auto& record : all_records)
            stream << record_to_json(record, config.emit_timings).dump() << '\n';
    }

    // Aggregate per method label, in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::vector<RunRecord>> grouped;
    for (const auto& record : all_records) {
        if (!grouped.count(record.method)) order.push_back(record.method);
        grouped[record.method].push_back(record);
    }
    ordered_json metrics;
    metrics["dataset"] = config.dataset_path;
    metrics["methods"] = ordered_json::array();
    for (const auto& label : order) {
        ordered_json entry;
        entry["method"] = label;
        ordered_json report = metrics_to_json(compute_metrics(grouped[label]));
        entry.update(report);
        metrics["methods"].push_back(std::move(entry));
    }
    {
        std::ofstream stream(output.metrics_path, std::ios::binary | std::ios::trunc);
        if (!stream) throw ConfigError("cannot write " + output.metrics_path);
        stream << metrics.dump(2) << '\n';
    }
    return output;
}

} // namespace spiral
