#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spiral/domain.hpp"

namespace spiral {

using NodeId = int;

/// One node of the search tree. Nodes live in the tree's arena and link to
/// each other by index, so snapshots serialize trivially.
struct SearchNode {
    NodeId id = 0;
    std::optional<NodeId> parent;
    PlanState state;
    std::optional<Action> incoming_action; // absent only at the root
    double value = 0.0;                    // v: accumulated reward sum
    long visits = 0;                       // c
    std::vector<NodeId> children;          // creation order
    bool terminal = false;
    int depth = 0;

    // Set at expansion, reused when the planner re-proposes this child and
    // when a finish node is re-selected.
    double stored_reward = 0.0;
    double stored_base = 0.0;
    double stored_rho = 0.0;
    // True once the planner repeated an existing proposal here; the search
    // walk then descends instead of consulting the planner again.
    bool exhausted = false;

    double mean_value() const { return visits > 0 ? value / static_cast<double>(visits) : 0.0; }
};

class SearchTree {
public:
    explicit SearchTree(PlanState root_state = PlanState());

    const SearchNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    SearchNode& node(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)); }
    const SearchNode& root() const { return nodes_.front(); }
    SearchNode& root() { return nodes_.front(); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<SearchNode>& nodes() const { return nodes_; }

    NodeId add_child(NodeId parent, PlanState state, Action incoming, bool terminal);

private:
    std::vector<SearchNode> nodes_;
};

struct SearchConfig {
    int budget = 50;              // K, MCTS iterations
    double exploration = 1.5;     // C of the UCT score
    double alpha = 0.5;           // reward shaping blend
    int max_depth = 10;           // D
    double terminal_reward = 0.0; // propagated at dead ends

    bool use_simulator = true;
    bool use_critic = true;
    bool use_planner_persona = true;
    bool uniform_rewards = false;
    bool standard_rollout = false;

    // Injects gold dependency hints into the planner prompt. Debug only;
    // never enabled by the harness during evaluation.
    bool debug_graph_hints = false;

    // Replaces the default three-level validity rubric when set.
    std::function<double(const Action&, const std::vector<ToolSpec>&)> base_reward_fn;

    std::string trace_path; // empty disables trace emission

    /// Throws ConfigError on invalid values or mode combinations.
    void validate() const;
};

/// UCT score of a child under its parent: v/c + C*sqrt(ln(c_p)/c). Unvisited
/// children score +infinity so they are always tried first.
double uct_score(const SearchNode& child, const SearchNode& parent, double exploration);

/// Walks from the root picking the argmax-UCT child at each level
/// (first-created wins ties) until a node with no children is reached.
NodeId select_leaf(const SearchTree& tree, double exploration);

/// alpha*r_base + (1-alpha)*rho_ref. All inputs must lie in [0, 1].
double shape_reward(double r_base, double rho_ref, double alpha);

/// Validity heuristic: 1.0 for finish or a catalog tool call with every
/// required parameter of the declared type; 0.5 for a known tool with
/// missing, unknown, or mistyped parameters; 0.0 for an unknown tool.
double base_reward(const Action& action, const std::vector<ToolSpec>& catalog);

/// Adds the reward to the value and bumps the visit count of the node and
/// every ancestor up to the root.
void backpropagate(SearchTree& tree, NodeId node, double reward);

/// Greedy descent by mean value v/c over visited children (ties: higher
/// visit count, then first-created), stopping at a terminal node or when no
/// visited child remains. Returns the incoming actions along the path.
std::vector<Action> extract_best_plan(const SearchTree& tree);

} // namespace spiral
