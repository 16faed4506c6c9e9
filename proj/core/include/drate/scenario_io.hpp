#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "drate/estimators.hpp"
#include "drate/simulation.hpp"

namespace drate {

/// Reads a scenario; missing keys keep their defaults and unknown keys
/// raise ConfigError. The result is not yet validated.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

/// {"propensity_index": {"c": 1.0}, "regression_multivariate": {"h": 0.4}, ...}
KernelSettings kernels_from_json(const nlohmann::json& j);
nlohmann::json kernels_to_json(const KernelSettings& k);

std::vector<EstimatorId> estimators_from_json(const nlohmann::json& j);

/// Input of the `estimate` command.
struct EstimateConfig {
  std::filesystem::path data;
  DatasetSchema schema;
  /// Empty selects every estimator the options allow (all nine when
  /// directions are given, else 1-4).
  std::vector<EstimatorId> estimators;
  EstimationOptions options;
};

/// Relative data paths are resolved against `base_dir`.
EstimateConfig estimate_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});

void to_json(nlohmann::json& j, const EstimateResult& result);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace drate
