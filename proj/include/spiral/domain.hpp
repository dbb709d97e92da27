#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "spiral/errors.hpp"

namespace spiral {

using ArgValue = nlohmann::ordered_json;

enum class ParamType { String, Number, Boolean, Object };

ParamType param_type_from_string(const std::string& text);
std::string to_string(ParamType type);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::String;
    bool required = true;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;

    const ParamSpec* find_param(const std::string& param_name) const;
};

enum class ActionKind { ApiCall, Finish };

/// A parsed planner output: either a tool call with literal arguments or a
/// terminal finish with a reason. Exactly one side is populated.
struct Action {
    ActionKind kind = ActionKind::ApiCall;
    std::string tool;   // ApiCall only
    ArgValue args;      // ApiCall only; JSON object, insertion-ordered
    std::string reason; // Finish only

    static Action api_call(std::string tool, ArgValue args);
    static Action finish(std::string reason);

    bool is_finish() const noexcept { return kind == ActionKind::Finish; }

    /// Canonical single-line rendering: double quotes, args in insertion
    /// order, so parse(canonical()) round-trips bit-stably.
    std::string canonical() const;

    bool operator==(const Action& other) const;
    bool operator!=(const Action& other) const { return !(*this == other); }
};

/// One line of simulated tool output. Never contains a newline.
struct Observation {
    std::string value;

    explicit Observation(std::string v);
    Observation() = default;

    bool operator==(const Observation& other) const { return value == other.value; }
};

struct PlanStep {
    Action action;
    std::optional<Observation> observation; // absent only for finish

    bool operator==(const PlanStep& other) const;
};

/// The action-observation chain. Immutable value object: append_step returns
/// a new state and never mutates its input.
class PlanState {
public:
    PlanState() = default;

    const std::vector<PlanStep>& steps() const noexcept { return steps_; }
    bool empty() const noexcept { return steps_.empty(); }
    std::size_t size() const noexcept { return steps_.size(); }

    /// True once the chain ends in a finish action; no further appends.
    bool terminal() const noexcept;

    bool operator==(const PlanState& other) const { return steps_ == other.steps_; }

private:
    friend PlanState append_step(const PlanState&, const Action&,
                                 const std::optional<Observation>&);
    std::vector<PlanStep> steps_;
};

struct GoldStep {
    std::string tool;
    ArgValue args;
    // Simulated tool output for this step. Datasets may pin it explicitly;
    // otherwise a stable default is derived at load time.
    std::string output;
};

struct Task {
    std::string id;
    std::string instruction;
    std::vector<ToolSpec> catalog;
    std::vector<GoldStep> gold_plan;
    std::vector<std::pair<int, int>> gold_edges; // (from, to): from before to

    bool simple() const noexcept { return gold_plan.size() == 1; }
    const ToolSpec* find_tool(const std::string& name) const;
};

/// Parses one planner reply into an Action. Code fences and any preamble
/// before the first api_call/finish are stripped; both quote styles are
/// accepted. Argument literals are strings, numbers, booleans, and one level
/// of nested object; anything deeper (or arrays) is a ParseError.
Action parse_action(const std::string& text);

/// Returns a new state with the step appended. Throws AlreadyTerminal when
/// the state already ends in finish, and DomainError when the observation is
/// missing for a tool call (or present for a finish).
PlanState append_step(const PlanState& state, const Action& action,
                      const std::optional<Observation>& obs);

/// Two lines per tool-call step (action, then "Observation: tool_output = "
/// plus the value), one line for a finish; "(empty plan)" for no steps.
std::string render_history(const PlanState& state);

} // namespace spiral
