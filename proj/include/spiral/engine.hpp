#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spiral/agents.hpp"
#include "spiral/mcts.hpp"

namespace spiral {

struct Diagnostic {
    int iteration = 0;
    std::string kind;
    std::string detail;
};

struct PlanResult {
    std::vector<Action> plan;
    int iterations_used = 0;
    std::array<UsageCounters, 3> usage_by_role{}; // indexed by AgentRole
    std::vector<Diagnostic> diagnostics;
    std::string trace_path; // empty when tracing was off

    const UsageCounters& usage(AgentRole role) const {
        return usage_by_role[static_cast<std::size_t>(role)];
    }
    UsageCounters total_usage() const {
        UsageCounters total;
        for (const auto& u : usage_by_role) total += u;
        return total;
    }
};

/// Runs the grounded reflective tree search for config.budget iterations and
/// returns the extracted best plan. Honors every mode flag. When out_tree is
/// given, the final tree is copied there (tests and tooling).
PlanResult run_search(const Task& task, AgentBackend& backend, const SearchConfig& config,
                      std::uint64_t seed, SearchTree* out_tree = nullptr);

/// Classic-MCTS baseline: same selection and expansion, but the grounded
/// one-step lookahead is replaced by a seeded uniformly-random rollout whose
/// terminal value is the base reward of the final action. No critic calls.
PlanResult run_standard_mcts(const Task& task, AgentBackend& backend,
                             const SearchConfig& config, std::uint64_t seed,
                             SearchTree* out_tree = nullptr);

/// Dispatches to run_search after checking that the flag combination is one
/// of the supported ablations (all defaults, or exactly one of: planner
/// persona off, simulator off, critic off, uniform rewards on).
PlanResult run_ablation(const Task& task, AgentBackend& backend, const SearchConfig& config,
                        std::uint64_t seed, SearchTree* out_tree = nullptr);

} // namespace spiral
