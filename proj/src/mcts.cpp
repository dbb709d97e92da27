#include "spiral/mcts.hpp"

#include <cmath>
#include <limits>

#include "spiral/errors.hpp"

namespace spiral {

SearchTree::SearchTree(PlanState root_state) {
    SearchNode root;
    root.id = 0;
    root.state = std::move(root_state);
    nodes_.push_back(std::move(root));
}

NodeId SearchTree::add_child(NodeId parent, PlanState state, Action incoming, bool terminal) {
    SearchNode child;
    child.id = static_cast<NodeId>(nodes_.size());
    child.parent = parent;
    child.state = std::move(state);
    child.incoming_action = std::move(incoming);
    child.terminal = terminal;
    child.depth = node(parent).depth + 1;
    node(parent).children.push_back(child.id);
    nodes_.push_back(std::move(child));
    return nodes_.back().id;
}

void SearchConfig::validate() const {
    if (budget < 1) throw ConfigError("budget K must be >= 1");
    if (max_depth < 1) throw ConfigError("max_depth D must be >= 1");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
    if (exploration < 0.0) throw ConfigError("exploration constant must be >= 0");
    if (standard_rollout && use_critic)
        throw ConfigError("standard_rollout excludes use_critic");
}

double uct_score(const SearchNode& child, const SearchNode& parent, double exploration) {
    if (child.visits == 0) return std::numeric_limits<double>::infinity();
    double mean = child.value / static_cast<double>(child.visits);
    double bonus = exploration * std::sqrt(std::log(static_cast<double>(parent.visits)) /
                                           static_cast<double>(child.visits));
    return mean + bonus;
}

NodeId select_leaf(const SearchTree& tree, double exploration) {
    NodeId current = 0;
    while (!tree.node(current).children.empty()) {
        const SearchNode& parent = tree.node(current);
        NodeId best = parent.children.front();
        double best_score = uct_score(tree.node(best), parent, exploration);
        for (std::size_t i = 1; i < parent.children.size(); ++i) {
            NodeId candidate = parent.children[i];
            double score = uct_score(tree.node(candidate), parent, exploration);
            if (score > best_score) { // first-created wins ties
                best = candidate;
                best_score = score;
            }
        }
        current = best;
    }
    return current;
}

double shape_reward(double r_base, double rho_ref, double alpha) {
    if (r_base < 0.0 || r_base > 1.0) throw DomainError("r_base must lie in [0, 1]");
    if (rho_ref < 0.0 || rho_ref > 1.0) throw DomainError("rho_ref must lie in [0, 1]");
    if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must lie in [0, 1]");
    return alpha * r_base + (1.0 - alpha) * rho_ref;
}

namespace {

bool value_matches_type(const ArgValue& value, ParamType type) {
    switch (type) {
    case ParamType::String: return value.is_string();
    case ParamType::Number: return value.is_number();
    case ParamType::Boolean: return value.is_boolean();
    case ParamType::Object: return value.is_object();
    }
    return false;
}

} // namespace

double base_reward(const Action& action, const std::vector<ToolSpec>& catalog) {
    if (action.is_finish()) return 1.0;

    const ToolSpec* tool = nullptr;
    for (const auto& candidate : catalog)
        if (candidate.name == action.tool) { tool = &candidate; break; }
    if (tool == nullptr) return 0.0;

    for (const auto& param : tool->params) {
        if (!param.required) continue;
        auto it = action.args.find(param.name);
        if (it == action.args.end() || !value_matches_type(*it, param.type)) return 0.5;
    }
    for (const auto& [key, value] : action.args.items()) {
        const ParamSpec* param = tool->find_param(key);
        if (param == nullptr || !value_matches_type(value, param->type)) return 0.5;
    }
    return 1.0;
}

void backpropagate(SearchTree& tree, NodeId node_id, double reward) {
    std::optional<NodeId> current = node_id;
    while (current) {
        SearchNode& n = tree.node(*current);
        n.visits += 1;
        n.value += reward;
        current = n.parent;
    }
}

std::vector<Action> extract_best_plan(const SearchTree& tree) {
    std::vector<Action> plan;
    NodeId current = 0;
    while (!tree.node(current).terminal) {
        const SearchNode& parent = tree.node(current);
        const SearchNode* best = nullptr;
        for (NodeId child_id : parent.children) {
            const SearchNode& child = tree.node(child_id);
            if (child.visits == 0) continue;
            if (best == nullptr) { best = &child; continue; }
            double mean = child.mean_value();
            double best_mean = best->mean_value();
            if (mean > best_mean || (mean == best_mean && child.visits > best->visits)) {
                best = &child; // remaining ties: first-created, already held
            }
        }
        if (best == nullptr) break;
        plan.push_back(*best->incoming_action);
        current = best->id;
    }
    return plan;
}

} // namespace spiral
