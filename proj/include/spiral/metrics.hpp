#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spiral/agents.hpp"

namespace spiral {

/// Outcome of one method on one task under one seed.
struct RunRecord {
    std::string task_id;
    std::string method;
    std::uint64_t seed = 0;
    bool simple = false; // gold plan length 1
    bool success = false;
    std::vector<std::string> predicted_plan; // canonical action lines
    UsageCounters usage;
    double wall_time_s = 0.0;
    std::vector<std::string> diagnostics;
};

/// One line of records.jsonl. Wall time is only included when timings are
/// requested, so default output is byte-stable across reruns.
nlohmann::ordered_json record_to_json(const RunRecord& record, bool include_timing = false);

struct SeedSlice {
    std::uint64_t seed = 0;
    long simple_total = 0, simple_success = 0;
    long complex_total = 0, complex_success = 0;
    double simple_acc = 0.0, complex_acc = 0.0, overall_acc = 0.0; // percent
};

struct MetricsReport {
    long simple_total = 0, simple_success = 0;
    long complex_total = 0, complex_success = 0;
    double simple_acc = 0.0, complex_acc = 0.0, overall_acc = 0.0; // percent
    double mean_tokens_per_task = 0.0;
    double mean_calls_per_task = 0.0;
    double token_efficiency = 0.0; // successes per 10,000 tokens, x100
    double call_efficiency = 0.0;  // successes per call, x100
    std::vector<SeedSlice> per_seed;
    double overall_acc_seed_mean = 0.0;
    double overall_acc_seed_std = 0.0; // population formula
    std::vector<std::string> warnings;
};

/// Aggregates one method's records. Invariant under reordering; throws
/// EmptyRecords on empty input.
MetricsReport compute_metrics(const std::vector<RunRecord>& records);

nlohmann::ordered_json metrics_to_json(const MetricsReport& report);

} // namespace spiral
