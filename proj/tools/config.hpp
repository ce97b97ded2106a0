#pragma once

// Declarative run configuration (one JSON file per run). Every object is
// checked against its list of known keys before anything is computed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "resnet_lab/experiments.hpp"

namespace resnet_lab::cli {

struct ModelConfig {
  int L = 16;
  int M = 8;
  int N_t = 16;
  double init_scale = 1.0;
  std::filesystem::path init;  // optional grid / ensemble CSV
};

struct DepthVerdict {
  double slope_min = -1.5;
  double slope_max = -0.7;
  double min_r_squared = 0.9;
};

struct WidthVerdict {
  double slope_target = -0.5;
  double slope_tolerance = 0.2;
  double min_r_squared = 0.7;
};

struct RunConfig {
  nlohmann::json raw;  // after flag overrides; hashed into the manifest
  std::filesystem::path base_dir;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;

  std::optional<Problem> problem;  // present iff family/g/dataset all given
  std::string missing_problem_key;
  FlowConfig flow;
  ModelConfig model;
  DepthSweepConfig depth;
  DepthVerdict depth_verdict;
  WidthSweepConfig width;
  WidthVerdict width_verdict;
  ZeroLossConfig zero_loss;
  GradcheckConfig gradcheck;

  /// The problem, or ConfigError naming the first missing key.
  const Problem& require_problem() const;
};

/// Parses and validates. `out` and `seed` override the top-level keys when set.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::optional<std::string>& out,
                          const std::optional<std::uint64_t>& seed);

/// Defaults only (commands that may run without a file).
RunConfig default_run_config(const std::optional<std::string>& out,
                             const std::optional<std::uint64_t>& seed);

nlohmann::json manifest(const RunConfig& cfg, const std::string& command);

}  // namespace resnet_lab::cli
