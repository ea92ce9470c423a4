#pragma once

// Config-driven entry points: training runs with their output directory, config
// validation and the exact-oracle report.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "cmarl/config.hpp"
#include "cmarl/trainer.hpp"

namespace cmarl {

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kResolvedConfigFile = "config.resolved.json";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kFaultCheckpointFile = "fault_checkpoint.json";
inline constexpr const char* kLockFile = ".lock";

std::shared_ptr<const Environment> build_environment(const EnvironmentSpec& spec);
MixingProcess build_mixing(const TopologySpec& spec, std::size_t num_agents, std::uint64_t run_seed);
TrainConfig build_train_config(const ExperimentConfig& config);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

struct RunOptions {
  /// Overrides the config's output_dir.
  std::optional<std::filesystem::path> output_dir;
  /// Checkpoint to resume from.
  std::optional<std::filesystem::path> resume;
  bool charts = true;
  /// Called with every metrics record as it is written.
  std::function<void(const MetricsRecord&)> progress;
};

struct RunSummary {
  std::filesystem::path output_dir;
  std::string config_sha256;
  std::uint64_t steps = 0;
  bool stopped_early = false;
  MetricsRecord final_metrics;
};

/// Trains from a config file and fills the output directory with the resolved config,
/// metrics.csv, lambdas.csv, checkpoints, charts and manifest.json. A lock file guards the
/// directory against concurrent runs. On a NumericalFault the faulted state is dumped to
/// fault_checkpoint.json, the manifest records the fault and the exception propagates.
RunSummary run_experiment(const std::filesystem::path& config_path, const RunOptions& options = {});

/// Schedule (timescale) checks, mixing-matrix checks and environment validation.
/// Throws only for unreadable or schema-invalid configs; findings go into the report.
nlohmann::json validate_experiment(const std::filesystem::path& config_path);

/// Exact oracle suite on the configured game. Games above the pair budget yield a report
/// that says so instead of throwing.
nlohmann::json oracle_report(const ExperimentConfig& config);
nlohmann::json oracle_report(const std::filesystem::path& config_path);

/// Raw bytes of the config file and the parsed config, so the hash matches what was parsed.
struct LoadedConfig {
  std::string bytes;
  ExperimentConfig config;
};
LoadedConfig load_config(const std::filesystem::path& path);

}  // namespace cmarl
