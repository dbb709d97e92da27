#include "spiral/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

using ordered_json = nlohmann::ordered_json;

double percent(long hits, long total) {
    return total > 0 ? 100.0 * static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

} // namespace

ordered_json record_to_json(const RunRecord& record, bool include_timing) {
    ordered_json line;
    line["task_id"] = record.task_id;
    line["method"] = record.method;
    line["seed"] = record.seed;
    line["complexity"] = record.simple ? "simple" : "complex";
    line["verdict"] = record.success ? "success" : "failure";
    line["predicted_plan"] = record.predicted_plan;
    line["prompt_tokens"] = record.usage.prompt_tokens;
    line["completion_tokens"] = record.usage.completion_tokens;
    line["calls"] = record.usage.calls;
    line["diagnostics"] = record.diagnostics;
    if (include_timing) line["wall_time_s"] = record.wall_time_s;
    return line;
}

MetricsReport compute_metrics(const std::vector<RunRecord>& records) {
    if (records.empty()) throw EmptyRecords("compute_metrics requires at least one record");

    MetricsReport report;
    long long tokens = 0;
    long long calls = 0;
    std::map<std::uint64_t, SeedSlice> slices;
    for (const auto& record : records) {
        SeedSlice& slice = slices[record.seed];
        slice.seed = record.seed;
        if (record.simple) {
            ++report.simple_total;
            ++slice.simple_total;
            if (record.success) { ++report.simple_success; ++slice.simple_success; }
        } else {
            ++report.complex_total;
            ++slice.complex_total;
            if (record.success) { ++report.complex_success; ++slice.complex_success; }
        }
        tokens += record.usage.total_tokens();
        calls += record.usage.calls;
    }

    long total = report.simple_total + report.complex_total;
    long successes = report.simple_success + report.complex_success;
    report.simple_acc = percent(report.simple_success, report.simple_total);
    report.complex_acc = percent(report.complex_success, report.complex_total);
    report.overall_acc = percent(successes, total);
    report.mean_tokens_per_task = static_cast<double>(tokens) / static_cast<double>(total);
    report.mean_calls_per_task = static_cast<double>(calls) / static_cast<double>(total);

    if (tokens > 0) {
        report.token_efficiency =
            100.0 * static_cast<double>(successes) / (static_cast<double>(tokens) / 10000.0);
    } else {
        report.warnings.push_back("zero tokens recorded; token_efficiency set to 0");
    }
    if (calls > 0) {
        report.call_efficiency =
            100.0 * static_cast<double>(successes) / static_cast<double>(calls);
    } else {
        report.warnings.push_back("zero calls recorded; call_efficiency set to 0");
    }
    if (report.simple_total == 0)
        report.warnings.push_back("no simple tasks; simple_acc set to 0");
    if (report.complex_total == 0)
        report.warnings.push_back("no complex tasks; complex_acc set to 0");

    double sum = 0.0;
    double sum_sq = 0.0;
    for (auto& [seed, slice] : slices) {
        slice.simple_acc = percent(slice.simple_success, slice.simple_total);
        slice.complex_acc = percent(slice.complex_success, slice.complex_total);
        slice.overall_acc = percent(slice.simple_success + slice.complex_success,
                                    slice.simple_total + slice.complex_total);
        sum += slice.overall_acc;
        sum_sq += slice.overall_acc * slice.overall_acc;
        report.per_seed.push_back(slice);
    }
    double n = static_cast<double>(report.per_seed.size());
    report.overall_acc_seed_mean = sum / n;
    double variance = std::max(0.0, sum_sq / n - report.overall_acc_seed_mean *
                                                     report.overall_acc_seed_mean);
    report.overall_acc_seed_std = std::sqrt(variance);
    return report;
}

ordered_json metrics_to_json(const MetricsReport& report) {
    ordered_json out;
    out["simple_total"] = report.simple_total;
    out["simple_success"] = report.simple_success;
    out["complex_total"] = report.complex_total;
    out["complex_success"] = report.complex_success;
    out["simple_acc"] = report.simple_acc;
    out["complex_acc"] = report.complex_acc;
    out["overall_acc"] = report.overall_acc;
    out["mean_tokens_per_task"] = report.mean_tokens_per_task;
    out["mean_calls_per_task"] = report.mean_calls_per_task;
    out["token_efficiency"] = report.token_efficiency;
    out["call_efficiency"] = report.call_efficiency;
    out["overall_acc_seed_mean"] = report.overall_acc_seed_mean;
    out["overall_acc_seed_std"] = report.overall_acc_seed_std;
    out["per_seed"] = ordered_json::array();
    for (const auto& slice : report.per_seed) {
        ordered_json s;
        s["seed"] = slice.seed;
        s["simple_acc"] = slice.simple_acc;
        s["complex_acc"] = slice.complex_acc;
        s["overall_acc"] = slice.overall_acc;
        out["per_seed"].push_back(std::move(s));
    }
    out["warnings"] = report.warnings;
    return out;
}

} // namespace spiral
