#pragma once

#include <cstdint>

#include "spiral/engine.hpp"

namespace spiral {

/// Chain-of-thought baseline with self-consistency: k independent whole-plan
/// generations (temperature 0.7 when k > 1), majority vote over canonical
/// serializations, ties broken by the first sampled plan. When no sample
/// parses, the plan is empty and a diagnostic is recorded.
PlanResult run_cot(const Task& task, AgentBackend& backend, int k, std::uint64_t seed);

} // namespace spiral
