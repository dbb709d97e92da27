#pragma once

#include <vector>

#include "spiral/domain.hpp"

namespace spiral {

/// How a predicted plan is judged against the gold plan.
///   MultisetTopo: the predicted tool calls must cover the gold multiset,
///   respect the dependency DAG, match arguments under normalization
///   (trimmed values, case-folded keys), and end with finish.
///   ExactSequence: gold order exactly, same argument normalization.
enum class MatchPolicy { MultisetTopo, ExactSequence };

MatchPolicy match_policy_from_string(const std::string& text);

bool evaluate_plan(const std::vector<Action>& predicted, const Task& task,
                   MatchPolicy policy = MatchPolicy::MultisetTopo);

} // namespace spiral
