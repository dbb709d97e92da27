#include "spiral/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "spiral/errors.hpp"

namespace spiral {

namespace prompts {

const char* const kPlanner =
    "You are an expert assistant that only responds with code.\n"
    "Your task is to create a plan to solve the user's request by generating a sequence of tool calls.\n"
    "\n"
    "### Rules:\n"
    "1. Generate ONLY the single next `api_call(...)` or the final `finish(...)` call.\n"
    "2. If a previous step produced an observation `tool_output = <value>`, you MUST use that exact `<value>` in the arguments of the next tool.\n"
    "3. When the user's request is fully satisfied, you MUST call `finish(reason=\"<final answer and summary>\")`.\n"
    "\n"
    "### Tools:\n"
    "{tools_description}\n"
    "{graph_description}\n"
    "\n"
    "### Finish Action:\n"
    "`finish(reason=\"<explanation>\")`: Call this ONLY when the task is complete.\n"
    "\n"
    "### Current Plan:\n"
    "{current_plan_history}\n"
    "\n"
    "Respond with ONLY the next line of code:\n";

const char* const kPlannerMinimal =
    "Output the next api_call or finish line for this task:\n"
    "\n"
    "### Tools:\n"
    "{tools_description}\n"
    "\n"
    "### Current Plan:\n"
    "{current_plan_history}\n";

const char* const kSimulator =
    "You are a simulated API tool. Your role is to provide a realistic, one-line observation for the given tool call, based on the user's overall goal.\n"
    "\n"
    "### Rules:\n"
    "1. Your entire response MUST be a single line starting with `Observation: tool_output = `.\n"
    "2. The value part should be a plausible result. For tools that create files, the value should be a new filename string (e.g., \"edited_image.png\"). For analysis tools, it should be a short, descriptive string (e.g., \"a red sports car\").\n"
    "3. The observation must be grounded in the user's request.\n"
    "\n"
    "### User's Goal:\n"
    "\"{user_request}\"\n"
    "\n"
    "### Tool Call to Simulate:\n"
    "`{api_call_str}`\n"
    "\n"
    "### Your Single-Line Response:\n";

const char* const kCritic =
    "As a Critic, evaluate the following plan's likelihood of success.\n"
    "\n"
    "### Task\n"
    "User Request: {user_request}\n"
    "\n"
    "### Current Plan Trajectory\n"
    "{trajectory}\n"
    "\n"
    "### Instruction\n"
    "Evaluate the plan. Is it coherent? Is it making progress? Is it likely to succeed?\n"
    "Respond with ONLY a single line: `Score: <float_0.0_to_1.0> | Justification: <brief_explanation>`\n";

const char* const kCotPlan =
    "You are an expert assistant that only responds with code.\n"
    "Your task is to solve the user's request by writing the complete sequence of tool calls.\n"
    "\n"
    "### Rules:\n"
    "1. Write one `api_call(...)` per line, in execution order.\n"
    "2. End the plan with `finish(reason=\"<final answer and summary>\")` on its own line.\n"
    "\n"
    "### Tools:\n"
    "{tools_description}\n"
    "\n"
    "### User's Request:\n"
    "\"{user_request}\"\n"
    "\n"
    "Respond with ONLY the plan lines:\n";

} // namespace prompts

namespace {

std::string replace_all(std::string text, const std::string& needle,
                        const std::string& replacement) {
    std::size_t at = 0;
    while ((at = text.find(needle, at)) != std::string::npos) {
        text.replace(at, needle.size(), replacement);
        at += replacement.size();
    }
    return text;
}

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

} // namespace

std::string to_string(AgentRole role) {
    switch (role) {
    case AgentRole::Planner: return "planner";
    case AgentRole::Simulator: return "simulator";
    case AgentRole::Critic: return "critic";
    }
    return "planner";
}

SamplingParams default_sampling(AgentRole role) {
    SamplingParams params;
    params.temperature = (role == AgentRole::Planner) ? 0.1 : 0.0;
    return params;
}

std::string tools_description(const std::vector<ToolSpec>& catalog) {
    std::ostringstream out;
    bool first = true;
    for (const auto& tool : catalog) {
        if (!first) out << '\n';
        first = false;
        out << "- " << tool.name << "(";
        for (std::size_t i = 0; i < tool.params.size(); ++i) {
            if (i) out << ", ";
            out << tool.params[i].name << ": " << to_string(tool.params[i].type);
            if (!tool.params[i].required) out << "?";
        }
        out << "): " << tool.description;
    }
    return out.str();
}

std::string build_planner_prompt(const Task& task, const PlanState& state,
                                 const std::string& graph_hints, bool persona) {
    if (state.terminal())
        throw DomainError("planner prompt requested for a terminal state");
    std::string text = persona ? prompts::kPlanner : prompts::kPlannerMinimal;
    text = replace_all(std::move(text), "{tools_description}", tools_description(task.catalog));
    text = replace_all(std::move(text), "{graph_description}", graph_hints);
    text = replace_all(std::move(text), "{current_plan_history}", render_history(state));
    return text;
}

std::string build_simulator_prompt(const Task& task, const std::string& action_text) {
    if (trim(action_text).rfind("finish", 0) == 0)
        throw RejectFinish("finish actions are never simulated");
    std::string text = prompts::kSimulator;
    text = replace_all(std::move(text), "{user_request}", task.instruction);
    text = replace_all(std::move(text), "{api_call_str}", action_text);
    return text;
}

std::string build_critic_prompt(const Task& task, const PlanState& state) {
    if (state.empty())
        throw EmptyTrajectory("critic prompt requires a non-empty trajectory");
    std::string text = prompts::kCritic;
    text = replace_all(std::move(text), "{user_request}", task.instruction);
    text = replace_all(std::move(text), "{trajectory}", render_history(state));
    return text;
}

std::string build_cot_prompt(const Task& task) {
    std::string text = prompts::kCotPlan;
    text = replace_all(std::move(text), "{tools_description}", tools_description(task.catalog));
    text = replace_all(std::move(text), "{user_request}", task.instruction);
    return text;
}

Observation parse_observation(const std::string& text) {
    static const std::string kMarker = "tool_output =";
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (eol == std::string::npos ? text.size() : eol) - pos);
        std::string t = trim(line);
        if (t.rfind("Observation:", 0) == 0) {
            std::size_t at = t.find(kMarker);
            if (at != std::string::npos)
                return Observation(trim(t.substr(at + kMarker.size())));
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    throw ParseError("no 'Observation: tool_output =' line", text);
}

CriticVerdict parse_critic(const std::string& text) {
    std::size_t at = text.find("Score:");
    if (at == std::string::npos)
        throw ParseError("no 'Score:' field", text);
    std::size_t start = at + 6;
    std::size_t stop = text.find_first_of("|\n", start);
    std::string token = trim(text.substr(start, stop == std::string::npos ? std::string::npos
                                                                          : stop - start));
    char* end = nullptr;
    double score = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || !std::isfinite(score))
        throw ParseError("'Score:' field is not a real number", text);

    CriticVerdict verdict;
    verdict.score = std::min(1.0, std::max(0.0, score));
    std::size_t just = text.find("Justification:");
    if (just != std::string::npos) {
        std::string rest = text.substr(just + 14);
        std::size_t eol = rest.find('\n');
        verdict.justification = trim(eol == std::string::npos ? rest : rest.substr(0, eol));
    }
    return verdict;
}

} // namespace spiral
