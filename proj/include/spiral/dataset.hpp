#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spiral/domain.hpp"

namespace spiral {

struct Dataset {
    std::vector<ToolSpec> tools;
    std::vector<Task> tasks; // each carries a copy of the shared catalog
};

/// Parses and validates a dataset document. Throws SchemaError with the
/// offending field path on any violation (unknown gold tool, cyclic edges,
/// bad literal types, duplicate ids, ...). Argument key order is preserved.
Dataset parse_dataset(const nlohmann::ordered_json& document);

Dataset load_dataset(const std::string& path);

/// Inverse of parse_dataset, for the save/load round-trip check.
nlohmann::ordered_json dataset_to_json(const Dataset& dataset);

void save_dataset(const Dataset& dataset, const std::string& path);

} // namespace spiral
