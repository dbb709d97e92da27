#pragma once

#include <string>

#include "spiral/domain.hpp"

namespace spiral {

enum class AgentRole { Planner, Simulator, Critic };

std::string to_string(AgentRole role);

struct SamplingParams {
    double temperature = 0.0;
    int max_output = 256;
};

/// Role defaults: Planner 0.1, Simulator and Critic 0.0.
SamplingParams default_sampling(AgentRole role);

struct UsageCounters {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long calls = 0;

    long long total_tokens() const noexcept { return prompt_tokens + completion_tokens; }

    UsageCounters& operator+=(const UsageCounters& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        calls += other.calls;
        return *this;
    }

    bool operator==(const UsageCounters& other) const {
        return prompt_tokens == other.prompt_tokens &&
               completion_tokens == other.completion_tokens && calls == other.calls;
    }
};

struct Completion {
    std::string text;
    UsageCounters usage; // usage of this single call
};

/// The tri-agent capability. Implementations must be safe for concurrent
/// complete() calls from distinct task runs; no per-call state is retained.
class AgentBackend {
public:
    virtual ~AgentBackend() = default;
    virtual Completion complete(AgentRole role, const std::string& prompt,
                                const SamplingParams& params) = 0;

    /// Sampling the caller should pass for a role; backends with configured
    /// per-role overrides reflect them here.
    virtual SamplingParams sampling_for(AgentRole role) const { return default_sampling(role); }
};

struct CriticVerdict {
    double score = 0.0; // rho_ref, clamped to [0, 1]
    std::string justification;
};

// Prompt templates, kept byte-identical to the text assets under
// assets/prompts/ (a test diffs them).
namespace prompts {
extern const char* const kPlanner;
extern const char* const kPlannerMinimal; // persona-free ablation variant
extern const char* const kSimulator;
extern const char* const kCritic;
extern const char* const kCotPlan;
} // namespace prompts

/// One "- name(params): description" line per catalog tool.
std::string tools_description(const std::vector<ToolSpec>& catalog);

/// Planner template with tools, optional dependency hints, and the rendered
/// history substituted. graph_hints is empty in evaluation runs.
std::string build_planner_prompt(const Task& task, const PlanState& state,
                                 const std::string& graph_hints = "",
                                 bool persona = true);

/// Simulator template for one canonical api_call line. Finish actions are
/// never simulated.
std::string build_simulator_prompt(const Task& task, const std::string& action_text);

std::string build_critic_prompt(const Task& task, const PlanState& state);

/// Whole-plan prompt for the chain-of-thought baseline.
std::string build_cot_prompt(const Task& task);

/// Extracts the value after "tool_output = " from the first line carrying
/// the observation marker.
Observation parse_observation(const std::string& text);

/// Parses "Score: <x> | Justification: <text>"; the score is clamped to
/// [0, 1].
CriticVerdict parse_critic(const std::string& text);

} // namespace spiral
