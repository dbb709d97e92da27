#include "spiral/cot.hpp"

#include <map>
#include <sstream>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

// Collects parseable action lines; everything after the first finish is
// ignored. An empty result means the sample was unusable.
std::vector<Action> parse_plan_lines(const std::string& reply) {
    std::vector<Action> plan;
    std::istringstream stream(reply);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            Action action = parse_action(line);
            bool finish = action.is_finish();
            plan.push_back(std::move(action));
            if (finish) break;
        } catch (const ParseError&) {
            continue;
        }
    }
    return plan;
}

std::string plan_key(const std::vector<Action>& plan) {
    std::string key;
    for (const auto& action : plan) {
        key += action.canonical();
        key += '\n';
    }
    return key;
}

} // namespace

PlanResult run_cot(const Task& task, AgentBackend& backend, int k, std::uint64_t) {
    if (k < 1) throw ConfigError("CoT consistency level k must be >= 1");

    SamplingParams params = backend.sampling_for(AgentRole::Planner);
    if (k > 1) params.temperature = 0.7;
    std::string prompt = build_cot_prompt(task);

    PlanResult result;
    result.iterations_used = k;

    std::vector<std::vector<Action>> samples;
    for (int i = 0; i < k; ++i) {
        std::string reply;
        for (int attempt = 0;; ++attempt) {
            try {
                Completion completion = backend.complete(AgentRole::Planner, prompt, params);
                result.usage_by_role[static_cast<std::size_t>(AgentRole::Planner)] +=
                    completion.usage;
                reply = completion.text;
                break;
            } catch (const BackendError& error) {
                if (attempt >= 1) throw;
                result.diagnostics.push_back(
                    Diagnostic{i + 1, "backend_retry", error.what()});
            }
        }
        std::vector<Action> plan = parse_plan_lines(reply);
        if (plan.empty())
            result.diagnostics.push_back(Diagnostic{i + 1, "sample_unparseable", reply});
        else
            samples.push_back(std::move(plan));
    }

    if (samples.empty()) {
        result.diagnostics.push_back(Diagnostic{0, "all_samples_unparseable", ""});
        return result; // empty plan, recorded as a failure downstream
    }

    // Majority vote by canonical serialization; first sampled wins ties.
    std::map<std::string, int> votes;
    for (const auto& plan : samples) ++votes[plan_key(plan)];
    const std::vector<Action>* winner = nullptr;
    int best = 0;
    for (const auto& plan : samples) {
        int count = votes[plan_key(plan)];
        if (count > best) {
            best = count;
            winner = &plan;
        }
    }
    result.plan = *winner;
    return result;
}

} // namespace spiral
