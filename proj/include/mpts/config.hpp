#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mpts/experiment.hpp"

namespace mpts {

/// Parse a JSON experiment description. Unknown keys, wrong types and
/// invariant violations raise ConfigError with the JSON path of the offender.
ExperimentConfig parse_config_text(std::string_view json_text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Fully resolved configuration (every default spelled out) as pretty JSON.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace mpts
