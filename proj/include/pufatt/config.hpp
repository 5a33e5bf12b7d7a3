#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pufatt/attack.hpp"

namespace pufatt {

// Raised for malformed or inconsistent configuration input; the CLI maps it
// to the usage exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SweepSettings {
    std::vector<std::size_t> sizes;
    std::vector<double> weight_grid;
    std::string sweep_head = "reliability";
    std::vector<std::pair<int, int>> granularity_pairs;
    std::vector<double> uniformity_targets;
    double min_success_fraction = 0.6;
};

struct ParsedConfig {
    ExperimentConfig experiment;
    SweepSettings sweep;
    std::string response_mode = "auto";
};

// Flat `key = value` file; unknown keys are errors. Loss weights default to
// the per-family presets unless given explicitly.
ParsedConfig parse_config_file(const std::string& path);
ParsedConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

}  // namespace pufatt
