#pragma once

// Experiment configuration: strict JSON schema with every default resolved.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmarl/cournot.hpp"
#include "cmarl/function_approx.hpp"
#include "cmarl/network.hpp"
#include "cmarl/trainer.hpp"

namespace cmarl {

struct EnvironmentSpec {
  enum class Kind { kCournot, kTabular };
  Kind kind = Kind::kCournot;
  CournotConfig cournot;
  /// Game file for the tabular kind, resolved against the config file's directory.
  std::filesystem::path path;
  /// Cournot only: evaluate lazily instead of materializing the transition tensor.
  bool lazy = true;
  bool normalize_costs = false;
  std::size_t cell_budget = kDefaultCellBudget;
};

struct TopologySpec {
  TopologyKind kind = TopologyKind::kComplete;
  std::vector<Topology::Edge> edges;  // custom only
  double radius = 0.5;                // random-geometric only
  std::optional<std::uint64_t> seed;  // random-geometric only; defaults to the run seed
  bool time_varying = false;
};

struct TrainerSpec {
  std::uint64_t horizon = 200'000;
  std::vector<double> lambda_max;  // resolved to one entry per constraint
  double theta_max = 50.0;
  std::uint64_t metrics_every = 100;
  std::uint64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::size_t initial_state = 0;
  AdvantageState advantage_state = AdvantageState::kCurrent;
  std::optional<EarlyStopRule> early_stop;
};

struct OracleSpec {
  std::size_t pair_budget = 1000;
  std::size_t policy_resolution = 11;
  std::size_t lambda_resolution = 21;
  std::size_t kemeny_resolution = 6;
  std::uint64_t simulation_steps = 100'000;
  std::optional<std::vector<double>> slater_margins;
};

struct ExperimentConfig {
  EnvironmentSpec environment;
  std::uint64_t seed = 0;
  FeatureSpec features;
  TopologySpec topology;
  StepSchedule schedule;
  TrainerSpec trainer;
  std::optional<std::filesystem::path> output_dir;
  OracleSpec oracle;

  std::size_t num_agents() const;
  std::size_t num_constraints() const;
};

/// Validates against the schema and resolves defaults. Relative paths are taken from
/// `base_dir`. Throws ConfigError naming the offending key and its location.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
/// Reads and parses a config file. Missing file -> IoError, bad JSON -> ConfigError.
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Cournot block alone (keys mirror CournotConfig fields); `where` prefixes error paths.
CournotConfig parse_cournot_config(const nlohmann::json& doc, const std::string& where = "");

/// Fully resolved form; parsing it again yields an identical config.
nlohmann::json config_to_json(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace cmarl
