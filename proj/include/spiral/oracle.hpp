#pragma once

#include <cstdint>
#include <mutex>
#include <unordered_map>

#include "spiral/agents.hpp"
#include "spiral/domain.hpp"

namespace spiral {

/// Knobs of the deterministic test double. All probabilities in [0, 1].
struct OracleConfig {
    double planner_error_rate = 0.0;   // chance of emitting a decoy action
    double simulator_noise_rate = 0.0; // chance of corrupting an observation
    double critic_fidelity = 1.0;      // 1 = perfect gold-alignment scoring
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Deterministic stand-in for the three live agents, bound to one task. It
/// re-derives tools and plan history from the prompt text rather than taking
/// structured state, so template regressions surface in every scripted run.
///
/// Randomness comes from a counter-extended hash of (seed, role, prompt):
/// each distinct (role, prompt) pair owns its own stream, so concurrent runs
/// with other prompts cannot reorder it, and two backends with the same
/// config produce identical reply sequences for identical call sequences.
class ScriptedOracleBackend : public AgentBackend {
public:
    ScriptedOracleBackend(Task task, OracleConfig config);

    Completion complete(AgentRole role, const std::string& prompt,
                        const SamplingParams& params) override;

    UsageCounters total_usage() const;

private:
    Task task_;
    OracleConfig config_;

    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, std::uint64_t> stream_counts_;
    UsageCounters total_;

    std::uint64_t next_call_seed(AgentRole role, const std::string& prompt);

    std::string plan_reply(const std::string& prompt, std::uint64_t call_seed);
    std::string cot_reply(std::uint64_t call_seed);
    std::string simulate_reply(const std::string& prompt, std::uint64_t call_seed);
    std::string critic_reply(const std::string& prompt, std::uint64_t call_seed);
};

// Prompt re-parsing helpers, exposed for tests.
namespace oracle_detail {

/// Lines between the marker line and the first terminator line (or the end).
std::string extract_block(const std::string& prompt, const std::string& marker,
                          const std::vector<std::string>& terminators);

struct HistoryStep {
    Action action;
    std::optional<std::string> observed; // raw observation value, quotes kept
};

/// Parses a rendered history block back into steps. "(empty plan)" and
/// unparseable lines yield no steps.
std::vector<HistoryStep> parse_history(const std::string& block);

/// Observation value with one surrounding quote pair removed, if present.
std::string strip_quotes(const std::string& value);

} // namespace oracle_detail

} // namespace spiral
