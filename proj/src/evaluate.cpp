#include "spiral/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

std::string fold(std::string text) {
    std::size_t a = 0;
    std::size_t b = text.size();
    while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
    text = text.substr(a, b - a);
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return text;
}

std::string trim_only(std::string text) {
    std::size_t a = 0;
    std::size_t b = text.size();
    while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
    return text.substr(a, b - a);
}

std::string value_to_string(const ArgValue& value);

// Keys case-folded, values rendered to strings, order-insensitive.
std::map<std::string, std::string> normalize_args(const ArgValue& args) {
    std::map<std::string, std::string> normalized;
    for (const auto& [key, value] : args.items())
        normalized[fold(key)] = value_to_string(value);
    return normalized;
}

std::string value_to_string(const ArgValue& value) {
    if (value.is_string()) return trim_only(value.get<std::string>());
    if (value.is_object()) {
        std::string out = "{";
        for (const auto& [k, v] : normalize_args(value)) out += k + "=" + v + ";";
        return out + "}";
    }
    return value.dump();
}

bool args_match(const ArgValue& predicted, const ArgValue& gold) {
    return normalize_args(predicted) == normalize_args(gold);
}

// Splits a plan into its tool calls and checks the single trailing finish.
std::optional<std::vector<Action>> well_formed_calls(const std::vector<Action>& predicted) {
    if (predicted.empty() || !predicted.back().is_finish()) return std::nullopt;
    std::vector<Action> calls(predicted.begin(), predicted.end() - 1);
    for (const auto& action : calls)
        if (action.is_finish()) return std::nullopt;
    return calls;
}

} // namespace

MatchPolicy match_policy_from_string(const std::string& text) {
    if (text == "multiset_topo") return MatchPolicy::MultisetTopo;
    if (text == "exact_sequence") return MatchPolicy::ExactSequence;
    throw ConfigError("unknown match policy: " + text);
}

bool evaluate_plan(const std::vector<Action>& predicted, const Task& task,
                   MatchPolicy policy) {
    auto calls = well_formed_calls(predicted);
    if (!calls || calls->size() != task.gold_plan.size()) return false;

    if (policy == MatchPolicy::ExactSequence) {
        for (std::size_t i = 0; i < calls->size(); ++i) {
            const GoldStep& gold = task.gold_plan[i];
            if ((*calls)[i].tool != gold.tool || !args_match((*calls)[i].args, gold.args))
                return false;
        }
        return true;
    }

    // Assign each predicted call the earliest unused matching gold step.
    std::vector<bool> used(task.gold_plan.size(), false);
    std::vector<int> position(task.gold_plan.size(), -1);
    for (std::size_t p = 0; p < calls->size(); ++p) {
        bool assigned = false;
        for (std::size_t g = 0; g < task.gold_plan.size(); ++g) {
            if (used[g] || task.gold_plan[g].tool != (*calls)[p].tool) continue;
            if (!args_match((*calls)[p].args, task.gold_plan[g].args)) continue;
            used[g] = true;
            position[g] = static_cast<int>(p);
            assigned = true;
            break;
        }
        if (!assigned) return false;
    }

    // Predicted order must be a topological order of the gold DAG.
    for (const auto& [from, to] : task.gold_edges)
        if (position[static_cast<std::size_t>(from)] >=
            position[static_cast<std::size_t>(to)])
            return false;
    return true;
}

} // namespace spiral
