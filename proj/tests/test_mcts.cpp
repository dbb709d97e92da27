#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "spiral/mcts.hpp"
#include "spiral/errors.hpp"
#include "spiral/rng.hpp"

using namespace spiral;

namespace {

SearchNode make_node(double value, long visits) {
    SearchNode node;
    node.value = value;
    node.visits = visits;
    return node;
}

Action step_action(int i) {
    ArgValue args = ArgValue::object();
    args["i"] = i;
    return Action::api_call("tool_" + std::to_string(i), args);
}

// Random tree with bounded depth/branching and random stats, for the
// brute-force comparisons. Visited flags are randomized too.
SearchTree random_tree(SplitMix64& rng, int max_depth, int max_branch) {
    SearchTree tree;
    struct Frontier { NodeId id; int depth; };
    std::vector<Frontier> frontier{{0, 0}};
    int counter = 0;
    while (!frontier.empty()) {
        Frontier current = frontier.back();
        frontier.pop_back();
        if (current.depth >= max_depth) continue;
        auto branches = rng.next_below(static_cast<std::uint64_t>(max_branch) + 1);
        for (std::uint64_t b = 0; b < branches; ++b) {
            bool terminal = rng.next_below(6) == 0;
            NodeId child =
                tree.add_child(current.id, PlanState(), step_action(counter++), terminal);
            long visits = static_cast<long>(rng.next_below(4)); // 0..3
            tree.node(child).visits = visits;
            tree.node(child).value =
                visits == 0 ? 0.0 : rng.next_unit() * static_cast<double>(visits);
            if (!terminal) frontier.push_back({child, current.depth + 1});
        }
    }
    // Parent visits must dominate children for UCT to be well-defined.
    for (std::size_t i = tree.size(); i-- > 0;) {
        long sum = 1;
        for (NodeId c : tree.node(static_cast<NodeId>(i)).children)
            sum += tree.node(c).visits;
        tree.node(static_cast<NodeId>(i)).visits =
            std::max(tree.node(static_cast<NodeId>(i)).visits, sum);
    }
    return tree;
}

// Independent re-derivation of the greedy-by-mean descent, written against
// the rule text rather than sharing the implementation's loop.
std::vector<Action> oracle_best_plan(const SearchTree& tree) {
    std::vector<Action> plan;
    NodeId at = 0;
    while (true) {
        const SearchNode& node = tree.node(at);
        if (node.terminal) break;
        NodeId pick = -1;
        double pick_mean = -1.0;
        long pick_visits = -1;
        for (NodeId child_id : node.children) {
            const SearchNode& child = tree.node(child_id);
            if (child.visits < 1) continue;
            double mean = child.value / static_cast<double>(child.visits);
            bool better = mean > pick_mean ||
                          (mean == pick_mean && child.visits > pick_visits);
            if (pick == -1 || better) {
                pick = child_id;
                pick_mean = mean;
                pick_visits = child.visits;
            }
        }
        if (pick == -1) break;
        plan.push_back(*tree.node(pick).incoming_action);
        at = pick;
    }
    return plan;
}

} // namespace

TEST_CASE("uct_score matches the direct formula") {
    SearchNode parent = make_node(0.0, 10);
    SearchNode child = make_node(3.0, 2);
    double expected = 3.0 / 2.0 + 1.5 * std::sqrt(std::log(10.0) / 2.0);
    CHECK(uct_score(child, parent, 1.5) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(uct_score(child, parent, 1.5) == doctest::Approx(3.1094745).epsilon(1e-6));
}

TEST_CASE("uct_score sentinel and collapse cases") {
    SearchNode parent = make_node(0.0, 5);
    CHECK(uct_score(make_node(0.0, 0), parent, 1.5) ==
          std::numeric_limits<double>::infinity());
    CHECK(uct_score(make_node(4.0, 2), parent, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("uct_score is monotone in value and visits") {
    SearchNode parent = make_node(0.0, 50);
    double previous = uct_score(make_node(0.5, 4), parent, 1.5);
    for (double v = 1.0; v < 6.0; v += 0.5) {
        double score = uct_score(make_node(v, 4), parent, 1.5);
        CHECK(score > previous);
        previous = score;
    }
    // Exploration term shrinks as the child gets visited more.
    for (long c = 1; c < 30; ++c) {
        double a = uct_score(make_node(0.0, c), parent, 1.5);
        double b = uct_score(make_node(0.0, c + 1), parent, 1.5);
        CHECK(a > b);
    }
}

TEST_CASE("select_leaf walks to the argmax frontier") {
    SearchTree tree;
    tree.root().visits = 2;
    NodeId left = tree.add_child(0, PlanState(), step_action(0), false);
    NodeId right = tree.add_child(0, PlanState(), step_action(1), false);
    tree.node(left).visits = 1;
    tree.node(left).value = 1.0;

    SUBCASE("single-node tree returns the root") {
        SearchTree solo;
        CHECK(select_leaf(solo, 1.5) == 0);
    }
    SUBCASE("unvisited child wins via the infinity sentinel") {
        CHECK(select_leaf(tree, 1.5) == right);
    }
    SUBCASE("visited child wins once the sibling is worse") {
        tree.node(right).visits = 3;
        tree.node(right).value = 0.1;
        CHECK(select_leaf(tree, 1.5) == left);
    }
}

TEST_CASE("select_leaf matches a brute-force UCT walk on random trees") {
    SplitMix64 rng(424242);
    for (int round = 0; round < 300; ++round) {
        SearchTree tree = random_tree(rng, 3, 3);
        // Oracle: recompute the walk with independent argmax code.
        NodeId at = 0;
        while (!tree.node(at).children.empty()) {
            const SearchNode& parent = tree.node(at);
            NodeId best = -1;
            double best_score = -std::numeric_limits<double>::infinity();
            for (NodeId child_id : parent.children) {
                const SearchNode& child = tree.node(child_id);
                double score;
                if (child.visits == 0) {
                    score = std::numeric_limits<double>::infinity();
                } else {
                    score = child.value / static_cast<double>(child.visits) +
                            1.5 * std::sqrt(std::log(static_cast<double>(parent.visits)) /
                                            static_cast<double>(child.visits));
                }
                if (best == -1 || score > best_score) {
                    best = child_id;
                    best_score = score;
                }
            }
            at = best;
        }
        CHECK(select_leaf(tree, 1.5) == at);
    }
}

TEST_CASE("shape_reward arithmetic and collapses") {
    CHECK(shape_reward(1.0, 0.8, 0.5) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(shape_reward(0.3, 0.9, 1.0) == doctest::Approx(0.3)); // heuristic only
    CHECK(shape_reward(0.3, 0.9, 0.0) == doctest::Approx(0.9)); // critic only
    CHECK_THROWS_AS(shape_reward(1.2, 0.5, 0.5), DomainError);
    CHECK_THROWS_AS(shape_reward(0.5, -0.1, 0.5), DomainError);
    CHECK_THROWS_AS(shape_reward(0.5, 0.5, 1.5), DomainError);

    SplitMix64 rng(99);
    for (int i = 0; i < 200; ++i) {
        double r = rng.next_unit();
        double rho = rng.next_unit();
        double alpha = rng.next_unit();
        double shaped = shape_reward(r, rho, alpha);
        CHECK(shaped >= 0.0);
        CHECK(shaped <= 1.0);
    }

    // Linear in each argument: equal input steps move the output equally.
    for (int i = 0; i < 50; ++i) {
        double alpha = rng.next_unit();
        double step = rng.next_unit() * 0.2;
        double a = shape_reward(0.1, 0.3, alpha);
        double b = shape_reward(0.1 + step, 0.3, alpha);
        double c = shape_reward(0.1 + 2 * step, 0.3, alpha);
        CHECK((c - b) == doctest::Approx(b - a).epsilon(1e-12));
        double d = shape_reward(0.1, 0.3 + step, alpha);
        double e = shape_reward(0.1, 0.3 + 2 * step, alpha);
        CHECK((e - d) == doctest::Approx(d - shape_reward(0.1, 0.3, alpha)).epsilon(1e-12));
    }
}

TEST_CASE("base_reward three-level rubric") {
    std::vector<ToolSpec> catalog{
        ToolSpec{"send_email",
                 "sends an email",
                 {ParamSpec{"to", ParamType::String, true},
                  ParamSpec{"subject", ParamType::String, true},
                  ParamSpec{"cc", ParamType::String, false}}},
    };

    ArgValue good = ArgValue::object();
    good["to"] = "a@b.c";
    good["subject"] = "hi";
    CHECK(base_reward(Action::api_call("send_email", good), catalog) == 1.0);
    CHECK(base_reward(Action::finish("done"), catalog) == 1.0);
    CHECK(base_reward(Action::api_call("unknown_tool", good), catalog) == 0.0);

    ArgValue missing = ArgValue::object();
    missing["to"] = "a@b.c";
    CHECK(base_reward(Action::api_call("send_email", missing), catalog) == 0.5);

    ArgValue mistyped = good;
    mistyped["subject"] = 42;
    CHECK(base_reward(Action::api_call("send_email", mistyped), catalog) == 0.5);

    ArgValue extra = good;
    extra["unknown_param"] = "x";
    CHECK(base_reward(Action::api_call("send_email", extra), catalog) == 0.5);
}

TEST_CASE("backpropagate updates the whole chain") {
    SearchTree tree;
    NodeId a = tree.add_child(0, PlanState(), step_action(0), false);
    NodeId b = tree.add_child(a, PlanState(), step_action(1), false);

    backpropagate(tree, b, 0.9);
    CHECK(tree.node(b).visits == 1);
    CHECK(tree.node(b).value == doctest::Approx(0.9));
    CHECK(tree.node(a).visits == 1);
    CHECK(tree.root().visits == 1);
    CHECK(tree.root().value == doctest::Approx(0.9));

    backpropagate(tree, b, 0.5);
    backpropagate(tree, b, 0.5);
    CHECK(tree.node(b).visits == 3);
    CHECK(tree.root().value == doctest::Approx(1.9));
}

TEST_CASE("backpropagate replay-log oracle") {
    // Each node's value must equal the sum of rewards that passed through it.
    SplitMix64 rng(7);
    SearchTree tree;
    NodeId a = tree.add_child(0, PlanState(), step_action(0), false);
    NodeId b = tree.add_child(0, PlanState(), step_action(1), false);
    NodeId c = tree.add_child(a, PlanState(), step_action(2), false);
    std::vector<NodeId> targets{a, b, c, 0};

    double sums[4] = {0, 0, 0, 0};
    long counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < 500; ++i) {
        NodeId target = targets[rng.next_below(targets.size())];
        double reward = rng.next_unit();
        backpropagate(tree, target, reward);
        NodeId walk = target;
        while (true) {
            sums[walk] += reward;
            counts[walk] += 1;
            auto parent = tree.node(walk).parent;
            if (!parent) break;
            walk = *parent;
        }
    }
    for (NodeId id : {0, a, b, c}) {
        CHECK(tree.node(id).value == doctest::Approx(sums[id]).epsilon(1e-9));
        CHECK(tree.node(id).visits == counts[id]);
    }
}

TEST_CASE("extract_best_plan picks the better mean and full chains") {
    SearchTree tree;
    NodeId good = tree.add_child(0, PlanState(), step_action(0), false);
    NodeId bad = tree.add_child(0, PlanState(), step_action(1), false);
    tree.node(good).visits = 10;
    tree.node(good).value = 9.0; // mean 0.9
    tree.node(bad).visits = 10;
    tree.node(bad).value = 4.0; // mean 0.4
    tree.root().visits = 21;

    auto plan = extract_best_plan(tree);
    REQUIRE(plan.size() == 1);
    CHECK(plan[0] == step_action(0));

    SearchTree empty;
    CHECK(extract_best_plan(empty).empty());
}

TEST_CASE("extract_best_plan matches the exhaustive oracle on ~3000 trees") {
    SplitMix64 rng(20261234);
    int compared = 0;
    for (int round = 0; round < 3000; ++round) {
        SearchTree tree = random_tree(rng, 3, 3);
        auto expected = oracle_best_plan(tree);
        auto actual = extract_best_plan(tree);
        REQUIRE(actual.size() == expected.size());
        for (std::size_t i = 0; i < actual.size(); ++i) CHECK(actual[i] == expected[i]);
        ++compared;
    }
    CHECK(compared == 3000);
}

TEST_CASE("search config validation") {
    SearchConfig config;
    CHECK_NOTHROW(config.validate());
    config.budget = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = SearchConfig{};
    config.alpha = 1.5;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = SearchConfig{};
    config.standard_rollout = true; // critic still on
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.use_critic = false;
    CHECK_NOTHROW(config.validate());
}
