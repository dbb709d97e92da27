#include "spiral/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string at(const std::string& base, const std::string& field) {
    return base.empty() ? field : base + "." + field;
}

std::string index(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

const ordered_json& require(const ordered_json& node, const std::string& field,
                            const std::string& path) {
    auto it = node.find(field);
    if (it == node.end()) throw SchemaError("missing field", at(path, field));
    return *it;
}

std::string require_string(const ordered_json& node, const std::string& field,
                           const std::string& path, bool non_empty = true) {
    const ordered_json& value = require(node, field, path);
    if (!value.is_string()) throw SchemaError("expected a string", at(path, field));
    std::string text = value.get<std::string>();
    if (non_empty && text.empty()) throw SchemaError("must not be empty", at(path, field));
    return text;
}

void validate_literal(const ordered_json& value, const std::string& path, int depth) {
    if (value.is_string() || value.is_number() || value.is_boolean()) return;
    if (value.is_object()) {
        if (depth >= 1) throw SchemaError("object nesting deeper than one level", path);
        for (const auto& [key, inner] : value.items())
            validate_literal(inner, at(path, key), depth + 1);
        return;
    }
    throw SchemaError("argument literals must be strings, numbers, booleans, or one-level objects",
                      path);
}

void check_dag(const std::vector<std::pair<int, int>>& edges, std::size_t node_count,
               const std::string& path) {
    std::vector<std::vector<int>> out(node_count);
    std::vector<int> indegree(node_count, 0);
    for (const auto& [from, to] : edges) {
        out[static_cast<std::size_t>(from)].push_back(to);
        ++indegree[static_cast<std::size_t>(to)];
    }
    std::vector<int> ready;
    for (std::size_t i = 0; i < node_count; ++i)
        if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
    std::size_t seen = 0;
    while (!ready.empty()) {
        int node = ready.back();
        ready.pop_back();
        ++seen;
        for (int next : out[static_cast<std::size_t>(node)])
            if (--indegree[static_cast<std::size_t>(next)] == 0) ready.push_back(next);
    }
    if (seen != node_count) throw SchemaError("gold_edges contain a cycle", path);
}

ToolSpec parse_tool(const ordered_json& node, const std::string& path) {
    if (!node.is_object()) throw SchemaError("expected an object", path);
    ToolSpec tool;
    tool.name = require_string(node, "name", path);
    tool.description = require_string(node, "description", path, /*non_empty=*/false);
    const ordered_json& params = require(node, "params", path);
    if (!params.is_array()) throw SchemaError("expected an array", at(path, "params"));
    std::set<std::string> seen;
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::string param_path = index(at(path, "params"), i);
        const ordered_json& p = params[i];
        if (!p.is_object()) throw SchemaError("expected an object", param_path);
        ParamSpec spec;
        spec.name = require_string(p, "name", param_path);
        if (!seen.insert(spec.name).second)
            throw SchemaError("duplicate param name", at(param_path, "name"));
        std::string type = require_string(p, "type", param_path);
        try {
            spec.type = param_type_from_string(type);
        } catch (const DomainError&) {
            throw SchemaError("type must be one of string|number|boolean|object",
                              at(param_path, "type"));
        }
        const ordered_json& req = require(p, "required", param_path);
        if (!req.is_boolean()) throw SchemaError("expected a boolean", at(param_path, "required"));
        spec.required = req.get<bool>();
        tool.params.push_back(std::move(spec));
    }
    return tool;
}

} // namespace

Dataset parse_dataset(const ordered_json& document) {
    if (!document.is_object()) throw SchemaError("expected a JSON object", "");
    Dataset dataset;

    const ordered_json& tools = require(document, "tools", "");
    if (!tools.is_array()) throw SchemaError("expected an array", "tools");
    std::set<std::string> tool_names;
    for (std::size_t i = 0; i < tools.size(); ++i) {
        ToolSpec tool = parse_tool(tools[i], index("tools", i));
        if (!tool_names.insert(tool.name).second)
            throw SchemaError("duplicate tool name", at(index("tools", i), "name"));
        dataset.tools.push_back(std::move(tool));
    }

    const ordered_json& tasks = require(document, "tasks", "");
    if (!tasks.is_array()) throw SchemaError("expected an array", "tasks");
    std::set<std::string> task_ids;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        std::string path = index("tasks", i);
        const ordered_json& node = tasks[i];
        if (!node.is_object()) throw SchemaError("expected an object", path);

        Task task;
        task.id = require_string(node, "id", path);
        if (!task_ids.insert(task.id).second)
            throw SchemaError("duplicate task id", at(path, "id"));
        task.instruction = require_string(node, "instruction", path);
        task.catalog = dataset.tools;

        const ordered_json& plan = require(node, "gold_plan", path);
        if (!plan.is_array() || plan.empty())
            throw SchemaError("expected a non-empty array", at(path, "gold_plan"));
        for (std::size_t s = 0; s < plan.size(); ++s) {
            std::string step_path = index(at(path, "gold_plan"), s);
            const ordered_json& step = plan[s];
            if (!step.is_object()) throw SchemaError("expected an object", step_path);
            GoldStep gold;
            gold.tool = require_string(step, "tool", step_path);
            if (!tool_names.count(gold.tool))
                throw SchemaError("gold step names a tool missing from the catalog",
                                  at(step_path, "tool"));
            const ordered_json& args = require(step, "args", step_path);
            if (!args.is_object()) throw SchemaError("expected an object", at(step_path, "args"));
            for (const auto& [key, value] : args.items())
                validate_literal(value, at(at(step_path, "args"), key), 0);
            gold.args = args;
            if (step.contains("output")) {
                if (!step["output"].is_string())
                    throw SchemaError("expected a string", at(step_path, "output"));
                gold.output = step["output"].get<std::string>();
            } else {
                gold.output = "step" + std::to_string(s + 1) + "_output";
            }
            task.gold_plan.push_back(std::move(gold));
        }

        if (node.contains("gold_edges")) {
            const ordered_json& edges = node["gold_edges"];
            if (!edges.is_array()) throw SchemaError("expected an array", at(path, "gold_edges"));
            for (std::size_t e = 0; e < edges.size(); ++e) {
                std::string edge_path = index(at(path, "gold_edges"), e);
                const ordered_json& pair = edges[e];
                if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
                    !pair[1].is_number_integer())
                    throw SchemaError("expected an [from, to] index pair", edge_path);
                int from = pair[0].get<int>();
                int to = pair[1].get<int>();
                int n = static_cast<int>(task.gold_plan.size());
                if (from < 0 || from >= n || to < 0 || to >= n || from == to)
                    throw SchemaError("edge indices out of range", edge_path);
                task.gold_edges.emplace_back(from, to);
            }
            check_dag(task.gold_edges, task.gold_plan.size(), at(path, "gold_edges"));
        }

        dataset.tasks.push_back(std::move(task));
    }
    return dataset;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream stream(path);
    if (!stream) throw SchemaError("cannot open dataset file: " + path, "");
    ordered_json document;
    try {
        stream >> document;
    } catch (const nlohmann::json::exception& error) {
        throw SchemaError(std::string("invalid JSON: ") + error.what(), "");
    }
    return parse_dataset(document);
}

nlohmann::ordered_json dataset_to_json(const Dataset& dataset) {
    ordered_json document;
    document["tools"] = ordered_json::array();
    for (const auto& tool : dataset.tools) {
        ordered_json t;
        t["name"] = tool.name;
        t["description"] = tool.description;
        t["params"] = ordered_json::array();
        for (const auto& param : tool.params) {
            ordered_json p;
            p["name"] = param.name;
            p["type"] = to_string(param.type);
            p["required"] = param.required;
            t["params"].push_back(std::move(p));
        }
        document["tools"].push_back(std::move(t));
    }
    document["tasks"] = ordered_json::array();
    for (const auto& task : dataset.tasks) {
        ordered_json t;
        t["id"] = task.id;
        t["instruction"] = task.instruction;
        t["gold_plan"] = ordered_json::array();
        for (const auto& step : task.gold_plan) {
            ordered_json s;
            s["tool"] = step.tool;
            s["args"] = step.args;
            s["output"] = step.output;
            t["gold_plan"].push_back(std::move(s));
        }
        t["gold_edges"] = ordered_json::array();
        for (const auto& [from, to] : task.gold_edges)
            t["gold_edges"].push_back(ordered_json::array({from, to}));
        document["tasks"].push_back(std::move(t));
    }
    return document;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream stream(path, std::ios::binary | std::ios::trunc);
    if (!stream) throw SchemaError("cannot write dataset file: " + path, "");
    stream << dataset_to_json(dataset).dump(2) << '\n';
}

} // namespace spiral
