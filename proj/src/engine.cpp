#include "spiral/engine.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spiral/errors.hpp"
#include "spiral/rng.hpp"

namespace spiral {

namespace {

using ordered_json = nlohmann::ordered_json;

class TraceWriter {
public:
    explicit TraceWriter(const std::string& path) {
        if (!path.empty()) {
            stream_.open(path, std::ios::binary | std::ios::trunc);
            if (!stream_) throw ConfigError("cannot open trace file: " + path);
            enabled_ = true;
        }
    }

    void row(int iter, NodeId selected, const std::optional<std::string>& action,
             std::optional<double> r_base, std::optional<double> rho, double reward) {
        if (!enabled_) return;
        ordered_json line;
        line["iter"] = iter;
        line["selected_node"] = selected;
        line["action"] = action ? ordered_json(*action) : ordered_json(nullptr);
        line["r_base"] = r_base ? ordered_json(*r_base) : ordered_json(nullptr);
        line["rho_ref"] = rho ? ordered_json(*rho) : ordered_json(nullptr);
        line["R_t"] = reward;
        stream_ << line.dump() << '\n';
    }

private:
    std::ofstream stream_;
    bool enabled_ = false;
};

class SearchRun {
public:
    SearchRun(const Task& task, AgentBackend& backend, const SearchConfig& config,
              std::uint64_t seed)
        : task_(task), backend_(backend), config_(config), rollout_rng_(seed),
          tree_(PlanState()), trace_(config.trace_path) {}

    PlanResult run(SearchTree* out_tree) {
        for (int iter = 1; iter <= config_.budget; ++iter) iterate(iter);
        PlanResult result;
        result.plan = extract_best_plan(tree_);
        result.iterations_used = config_.budget;
        result.usage_by_role = usage_;
        result.diagnostics = std::move(diagnostics_);
        result.trace_path = config_.trace_path;
        if (out_tree) *out_tree = tree_;
        return result;
    }

private:
    const Task& task_;
    AgentBackend& backend_;
    const SearchConfig& config_;
    SplitMix64 rollout_rng_;
    SearchTree tree_;
    TraceWriter trace_;
    std::array<UsageCounters, 3> usage_{};
    std::vector<Diagnostic> diagnostics_;

    void note(int iter, const std::string& kind, const std::string& detail) {
        diagnostics_.push_back(Diagnostic{iter, kind, detail});
    }

    // One backend call; a transport failure is retried once, then surfaced.
    std::string call(int iter, AgentRole role, const std::string& prompt) {
        SamplingParams params = backend_.sampling_for(role);
        for (int attempt = 0;; ++attempt) {
            try {
                Completion completion = backend_.complete(role, prompt, params);
                usage_[static_cast<std::size_t>(role)] += completion.usage;
                return completion.text;
            } catch (const BackendError& error) {
                if (attempt >= 1) throw;
                note(iter, "backend_retry", to_string(role) + ": " + error.what());
            }
        }
    }

    NodeId best_child_by_uct(NodeId parent_id) const {
        const SearchNode& parent = tree_.node(parent_id);
        NodeId best = parent.children.front();
        double best_score = uct_score(tree_.node(best), parent, config_.exploration);
        for (std::size_t i = 1; i < parent.children.size(); ++i) {
            NodeId candidate = parent.children[i];
            double score = uct_score(tree_.node(candidate), parent, config_.exploration);
            if (score > best_score) {
                best = candidate;
                best_score = score;
            }
        }
        return best;
    }

    // UCT walk that stops at terminal nodes, childless nodes, and nodes the
    // planner has not yet repeated itself at (those get re-consulted, which
    // is how the tree grows siblings).
    NodeId select_frontier() const {
        NodeId current = 0;
        while (true) {
            const SearchNode& node = tree_.node(current);
            if (node.terminal || node.children.empty() || !node.exhausted) return current;
            current = best_child_by_uct(current);
        }
    }

    std::string graph_hints() const {
        if (!config_.debug_graph_hints || task_.gold_edges.empty()) return "";
        std::ostringstream out;
        out << "Dependency hints:";
        for (const auto& [from, to] : task_.gold_edges)
            out << "\n- complete \"" << task_.gold_plan[static_cast<std::size_t>(from)].tool
                << "\" before \"" << task_.gold_plan[static_cast<std::size_t>(to)].tool
                << "\"";
        return out.str();
    }

    std::optional<Action> propose_action(int iter, const PlanState& state) {
        std::string prompt =
            build_planner_prompt(task_, state, graph_hints(), config_.use_planner_persona);
        for (int attempt = 0;; ++attempt) {
            std::string reply = call(iter, AgentRole::Planner, prompt);
            try {
                return parse_action(reply);
            } catch (const ParseError& error) {
                if (attempt >= 1) {
                    note(iter, "planner_parse_deadend", error.raw());
                    return std::nullopt;
                }
                note(iter, "planner_parse_retry", error.raw());
            }
        }
    }

    Observation ground_action(int iter, const std::string& action_text) {
        if (config_.standard_rollout || !config_.use_simulator)
            return Observation("\"ok\"");
        std::string prompt = build_simulator_prompt(task_, action_text);
        for (int attempt = 0;; ++attempt) {
            std::string reply = call(iter, AgentRole::Simulator, prompt);
            try {
                return parse_observation(reply);
            } catch (const ParseError& error) {
                if (attempt >= 1) {
                    note(iter, "simulator_parse_fallback", error.raw());
                    return Observation("<unparsed>");
                }
                note(iter, "simulator_parse_retry", error.raw());
            }
        }
    }

    double reflect(int iter, const PlanState& state) {
        if (!config_.use_critic) return 0.5;
        std::string prompt = build_critic_prompt(task_, state);
        for (int attempt = 0;; ++attempt) {
            std::string reply = call(iter, AgentRole::Critic, prompt);
            try {
                return parse_critic(reply).score;
            } catch (const ParseError& error) {
                if (attempt >= 1) {
                    note(iter, "critic_parse_fallback", error.raw());
                    return 0.0;
                }
                note(iter, "critic_parse_retry", error.raw());
            }
        }
    }

    Action random_valid_action() {
        std::uint64_t pick = rollout_rng_.next_below(task_.catalog.size() + 1);
        if (pick == task_.catalog.size()) return Action::finish("rollout finish");
        const ToolSpec& tool = task_.catalog[static_cast<std::size_t>(pick)];
        ArgValue args = ArgValue::object();
        for (const auto& param : tool.params) {
            if (!param.required) continue;
            switch (param.type) {
            case ParamType::String: args[param.name] = "value"; break;
            case ParamType::Number: args[param.name] = 1; break;
            case ParamType::Boolean: args[param.name] = true; break;
            case ParamType::Object: args[param.name] = ArgValue::object(); break;
            }
        }
        return Action::api_call(tool.name, std::move(args));
    }

    // Random continuation to depth D or finish; value is the base reward of
    // the final action reached.
    double rollout_value(const Action& expanded, int depth) {
        Action last = expanded;
        while (!last.is_finish() && depth < config_.max_depth) {
            last = random_valid_action();
            ++depth;
        }
        return base_reward(last, task_.catalog);
    }

    void iterate(int iter) {
        NodeId selected = select_frontier();
        SearchNode& node = tree_.node(selected);

        if (node.terminal) {
            // Completed plans keep reinforcing their shaped reward; only
            // depth-capped dead ends propagate the terminal floor. Uniform
            // mode pins every backprop to the constant.
            double reward = node.state.terminal() ? node.stored_reward
                                                  : config_.terminal_reward;
            if (config_.uniform_rewards) reward = 0.5;
            backpropagate(tree_, selected, reward);
            trace_.row(iter, selected, std::nullopt, std::nullopt, std::nullopt, reward);
            return;
        }

        std::optional<Action> proposal = propose_action(iter, node.state);
        if (!proposal) {
            double reward = config_.uniform_rewards ? 0.5 : config_.terminal_reward;
            backpropagate(tree_, selected, reward);
            trace_.row(iter, selected, std::nullopt, std::nullopt, std::nullopt, reward);
            return;
        }
        std::string canonical = proposal->canonical();

        // Re-proposal of an existing child: revisit it instead of duplicating,
        // and stop consulting the planner at this node.
        for (NodeId child_id : tree_.node(selected).children) {
            const SearchNode& child = tree_.node(child_id);
            if (child.incoming_action->canonical() == canonical) {
                tree_.node(selected).exhausted = true;
                backpropagate(tree_, child_id, child.stored_reward);
                trace_.row(iter, selected, canonical, child.stored_base,
                           config_.standard_rollout
                               ? std::optional<double>()
                               : std::optional<double>(child.stored_rho),
                           child.stored_reward);
                return;
            }
        }

        bool finish = proposal->is_finish();
        PlanState child_state;
        if (finish) {
            child_state = append_step(tree_.node(selected).state, *proposal, std::nullopt);
        } else {
            Observation obs = ground_action(iter, canonical);
            child_state = append_step(tree_.node(selected).state, *proposal, obs);
        }
        bool terminal = finish || tree_.node(selected).depth + 1 >= config_.max_depth;
        NodeId child_id = tree_.add_child(selected, child_state, *proposal, terminal);

        double r_base = config_.base_reward_fn
                            ? config_.base_reward_fn(*proposal, task_.catalog)
                            : base_reward(*proposal, task_.catalog);
        double reward = 0.0;
        std::optional<double> rho;
        if (config_.standard_rollout) {
            reward = rollout_value(*proposal, tree_.node(child_id).depth);
        } else {
            double rho_ref = reflect(iter, child_state);
            rho = rho_ref;
            reward = config_.uniform_rewards ? 0.5
                                             : shape_reward(r_base, rho_ref, config_.alpha);
        }

        SearchNode& child = tree_.node(child_id);
        child.stored_reward = reward;
        child.stored_base = r_base;
        child.stored_rho = rho.value_or(0.0);

        backpropagate(tree_, child_id, reward);
        trace_.row(iter, selected, canonical, r_base, rho, reward);
    }
};

} // namespace

PlanResult run_search(const Task& task, AgentBackend& backend, const SearchConfig& config,
                      std::uint64_t seed, SearchTree* out_tree) {
    config.validate();
    SearchRun run(task, backend, config, seed);
    return run.run(out_tree);
}

PlanResult run_standard_mcts(const Task& task, AgentBackend& backend,
                             const SearchConfig& config, std::uint64_t seed,
                             SearchTree* out_tree) {
    if (!config.standard_rollout)
        throw ConfigError("run_standard_mcts requires standard_rollout mode");
    return run_search(task, backend, config, seed, out_tree);
}

PlanResult run_ablation(const Task& task, AgentBackend& backend, const SearchConfig& config,
                        std::uint64_t seed, SearchTree* out_tree) {
    if (config.standard_rollout)
        throw ConfigError("standard MCTS is not an ablation mode; use run_standard_mcts");
    int deviations = (config.use_planner_persona ? 0 : 1) + (config.use_simulator ? 0 : 1) +
                     (config.use_critic ? 0 : 1) + (config.uniform_rewards ? 1 : 0);
    if (deviations > 1)
        throw ConfigError("unsupported ablation: toggle exactly one mode flag");
    return run_search(task, backend, config, seed, out_tree);
}

} // namespace spiral
