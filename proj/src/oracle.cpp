#include "spiral/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "spiral/errors.hpp"
#include "spiral/rng.hpp"

namespace spiral {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            lines.emplace_back(text.substr(pos));
            break;
        }
        lines.emplace_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

UsageCounters synthetic_usage(const std::string& prompt, const std::string& reply) {
    UsageCounters usage;
    usage.prompt_tokens = static_cast<long long>((prompt.size() + 3) / 4);
    usage.completion_tokens = static_cast<long long>((reply.size() + 3) / 4);
    usage.calls = 1;
    return usage;
}

ArgValue placeholder_for(ParamType type) {
    switch (type) {
    case ParamType::String: return ArgValue("value");
    case ParamType::Number: return ArgValue(1);
    case ParamType::Boolean: return ArgValue(true);
    case ParamType::Object: return ArgValue::object();
    }
    return ArgValue("value");
}

std::string format_score(double score) {
    std::ostringstream out;
    out << score;
    return out.str();
}

} // namespace

namespace oracle_detail {

std::string extract_block(const std::string& prompt, const std::string& marker,
                          const std::vector<std::string>& terminators) {
    auto lines = split_lines(prompt);
    std::ostringstream out;
    bool inside = false;
    bool wrote = false;
    for (const auto& line : lines) {
        std::string t = trim(line);
        if (!inside) {
            if (t == marker) inside = true;
            continue;
        }
        bool done = false;
        for (const auto& term : terminators)
            if (t.rfind(term, 0) == 0) { done = true; break; }
        if (done) break;
        if (wrote) out << '\n';
        out << line;
        wrote = true;
    }
    return out.str();
}

std::vector<HistoryStep> parse_history(const std::string& block) {
    std::vector<HistoryStep> steps;
    for (const auto& line : split_lines(block)) {
        std::string t = trim(line);
        if (t.empty() || t == "(empty plan)") continue;
        if (t.rfind("Observation:", 0) == 0) {
            if (!steps.empty() && !steps.back().observed) {
                std::size_t at = t.find("tool_output =");
                if (at != std::string::npos)
                    steps.back().observed = trim(t.substr(at + 13));
            }
            continue;
        }
        try {
            steps.push_back(HistoryStep{parse_action(t), std::nullopt});
        } catch (const ParseError&) {
            // Unparseable history lines carry no planning signal; skip.
        }
    }
    return steps;
}

std::string strip_quotes(const std::string& value) {
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\'')))
        return value.substr(1, value.size() - 2);
    return value;
}

} // namespace oracle_detail

using oracle_detail::HistoryStep;

void OracleConfig::validate() const {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(planner_error_rate) || !in_unit(simulator_noise_rate) ||
        !in_unit(critic_fidelity))
        throw ConfigError("oracle probabilities must lie in [0, 1]");
}

ScriptedOracleBackend::ScriptedOracleBackend(Task task, OracleConfig config)
    : task_(std::move(task)), config_(config) {
    config_.validate();
}

std::uint64_t ScriptedOracleBackend::next_call_seed(AgentRole role, const std::string& prompt) {
    // The bound task id joins the stream key: planner prompts carry no task
    // text, so without it every task sharing a catalog would draw identical
    // decoy sequences at the same tree positions.
    std::uint64_t key = fnv1a64(prompt, fnv1a64(to_string(role)) ^ fnv1a64(task_.id));
    std::uint64_t count = 0;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        count = stream_counts_[key]++;
    }
    return mix_seeds(mix_seeds(config_.rng_seed, key), count);
}

Completion ScriptedOracleBackend::complete(AgentRole role, const std::string& prompt,
                                           const SamplingParams&) {
    std::uint64_t call_seed = next_call_seed(role, prompt);
    std::string reply;
    switch (role) {
    case AgentRole::Planner:
        reply = (prompt.find("Respond with ONLY the plan lines:") != std::string::npos)
                    ? cot_reply(call_seed)
                    : plan_reply(prompt, call_seed);
        break;
    case AgentRole::Simulator:
        reply = simulate_reply(prompt, call_seed);
        break;
    case AgentRole::Critic:
        reply = critic_reply(prompt, call_seed);
        break;
    }
    Completion completion{reply, synthetic_usage(prompt, reply)};
    {
        std::lock_guard<std::mutex> lock(mutex_);
        total_ += completion.usage;
    }
    return completion;
}

UsageCounters ScriptedOracleBackend::total_usage() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return total_;
}

namespace {

// Index of the earlier gold step whose pinned output equals this argument
// value, or -1. String equality is deliberate: datasets use distinctive
// output tokens for data-flow arguments.
int reference_index(const std::vector<GoldStep>& gold, int upto, const ArgValue& value) {
    if (!value.is_string()) return -1;
    const std::string text = value.get<std::string>();
    for (int i = 0; i < upto; ++i)
        if (gold[static_cast<std::size_t>(i)].output == text) return i;
    return -1;
}

// Gold step k with data-flow arguments replaced by what was actually
// observed in the history (planner rule: reuse tool_output values exactly).
Action substituted_gold_action(const Task& task, int k,
                               const std::vector<HistoryStep>& history) {
    const GoldStep& step = task.gold_plan[static_cast<std::size_t>(k)];
    ArgValue args = ArgValue::object();
    for (const auto& [key, value] : step.args.items()) {
        int ref = reference_index(task.gold_plan, k, value);
        if (ref >= 0 && ref < static_cast<int>(history.size()) &&
            history[static_cast<std::size_t>(ref)].observed) {
            args[key] = oracle_detail::strip_quotes(
                *history[static_cast<std::size_t>(ref)].observed);
        } else {
            args[key] = value;
        }
    }
    return Action::api_call(step.tool, std::move(args));
}

// Longest run of leading history steps that continue the gold plan, given
// the observations the planner actually saw.
int consistent_prefix(const Task& task, const std::vector<HistoryStep>& history) {
    int m = 0;
    int limit = static_cast<int>(std::min(history.size(), task.gold_plan.size()));
    while (m < limit) {
        const HistoryStep& step = history[static_cast<std::size_t>(m)];
        if (step.action.is_finish()) break;
        Action expected = substituted_gold_action(task, m, history);
        if (!(step.action == expected)) break;
        ++m;
    }
    return m;
}

// Leading steps matching the gold plan exactly as written, used by the
// critic: a noisy or missing observation threaded into an argument breaks
// the match even when the planner believed it.
int strict_prefix(const Task& task, const std::vector<HistoryStep>& history) {
    int m = 0;
    int limit = static_cast<int>(std::min(history.size(), task.gold_plan.size()));
    while (m < limit) {
        const HistoryStep& step = history[static_cast<std::size_t>(m)];
        const GoldStep& gold = task.gold_plan[static_cast<std::size_t>(m)];
        if (step.action.is_finish() || step.action.tool != gold.tool) break;
        Action as_written = Action::api_call(gold.tool, gold.args);
        if (!(step.action == as_written)) break;
        ++m;
    }
    return m;
}

Action decoy_action(const Task& task, int next_gold, SplitMix64& rng) {
    std::set<std::string> gold_tools;
    for (const auto& step : task.gold_plan) gold_tools.insert(step.tool);

    std::vector<const ToolSpec*> outside;
    for (const auto& tool : task.catalog)
        if (!gold_tools.count(tool.name)) outside.push_back(&tool);

    if (!outside.empty()) {
        // API-substitution decoy: a plausible catalog tool the task never needs.
        const ToolSpec* tool = outside[static_cast<std::size_t>(
            rng.next_below(outside.size()))];
        ArgValue args = ArgValue::object();
        for (const auto& param : tool->params)
            if (param.required) args[param.name] = placeholder_for(param.type);
        return Action::api_call(tool->name, std::move(args));
    }

    // Catalog exhausted by the gold plan: corrupt the next gold step instead
    // (parameter-hallucination decoy).
    const GoldStep& step =
        task.gold_plan[static_cast<std::size_t>(std::min<int>(
            next_gold, static_cast<int>(task.gold_plan.size()) - 1))];
    ArgValue args = step.args;
    if (!args.empty()) {
        std::size_t victim = static_cast<std::size_t>(rng.next_below(args.size()));
        auto it = args.begin();
        std::advance(it, static_cast<long>(victim));
        if (rng.next_unit() < 0.5) {
            args.erase(it.key());
        } else if (it.value().is_string()) {
            it.value() = "wrong_" + it.value().get<std::string>();
        } else {
            it.value() = "wrong_value";
        }
    } else {
        args["unexpected"] = "value";
    }
    return Action::api_call(step.tool, std::move(args));
}

} // namespace

std::string ScriptedOracleBackend::plan_reply(const std::string& prompt,
                                              std::uint64_t call_seed) {
    std::string block = oracle_detail::extract_block(
        prompt, "### Current Plan:", {"Respond with ONLY"});
    auto history = oracle_detail::parse_history(block);

    SplitMix64 rng(call_seed);
    int m = consistent_prefix(task_, history);
    bool decoy = rng.next_unit() < config_.planner_error_rate;

    if (decoy) return decoy_action(task_, m, rng).canonical();
    if (m >= static_cast<int>(task_.gold_plan.size()))
        return Action::finish("All steps completed.").canonical();
    return substituted_gold_action(task_, m, history).canonical();
}

std::string ScriptedOracleBackend::cot_reply(std::uint64_t call_seed) {
    SplitMix64 rng(call_seed);
    std::ostringstream out;
    for (int k = 0; k < static_cast<int>(task_.gold_plan.size()); ++k) {
        const GoldStep& step = task_.gold_plan[static_cast<std::size_t>(k)];
        if (rng.next_unit() < config_.planner_error_rate) {
            out << decoy_action(task_, k, rng).canonical() << '\n';
        } else {
            out << Action::api_call(step.tool, step.args).canonical() << '\n';
        }
    }
    out << Action::finish("All steps completed.").canonical() << '\n';
    return out.str();
}

std::string ScriptedOracleBackend::simulate_reply(const std::string& prompt,
                                                  std::uint64_t call_seed) {
    std::string block = oracle_detail::extract_block(
        prompt, "### Tool Call to Simulate:", {"### Your Single-Line Response:"});
    std::string call_text = trim(block);
    if (!call_text.empty() && call_text.front() == '`')
        call_text = trim(call_text.substr(1, call_text.size() - 2));

    std::string output;
    try {
        Action call = parse_action(call_text);
        const GoldStep* match = nullptr;
        for (const auto& step : task_.gold_plan) {
            if (step.tool != call.tool) continue;
            match = &step;
            if (Action::api_call(step.tool, step.args) == call) break; // exact wins
        }
        output = match ? match->output : "sim_" + call.tool + "_result";
    } catch (const ParseError&) {
        output = "sim_unknown_result";
    }

    SplitMix64 rng(call_seed);
    if (rng.next_unit() < config_.simulator_noise_rate) {
        std::ostringstream hex;
        hex << std::hex << (rng.next() & 0xffffu);
        output = "noise_" + hex.str();
    }
    return "Observation: tool_output = \"" + output + "\"";
}

std::string ScriptedOracleBackend::critic_reply(const std::string& prompt,
                                                std::uint64_t call_seed) {
    std::string block = oracle_detail::extract_block(
        prompt, "### Current Plan Trajectory", {"### Instruction"});
    auto history = oracle_detail::parse_history(block);

    int matched = strict_prefix(task_, history);
    long calls = static_cast<long>(std::count_if(
        history.begin(), history.end(),
        [](const HistoryStep& s) { return !s.action.is_finish(); }));
    long denom = std::max<long>(static_cast<long>(task_.gold_plan.size()),
                                std::max<long>(calls, 1));
    double fraction = static_cast<double>(matched) / static_cast<double>(denom);

    SplitMix64 rng(call_seed);
    double score = config_.critic_fidelity * fraction +
                   (1.0 - config_.critic_fidelity) * rng.next_unit();
    std::ostringstream out;
    out << "Score: " << format_score(score) << " | Justification: matched " << matched
        << " of " << task_.gold_plan.size() << " gold steps";
    return out.str();
}

} // namespace spiral
