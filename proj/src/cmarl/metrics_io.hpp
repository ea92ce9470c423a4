#pragma once

// Metrics CSV files: the fixed-schema summary file and the per-agent multiplier file.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cmarl/trainer.hpp"

namespace cmarl {

inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kLambdasFile = "lambdas.csv";

/// step,J,G_gap_1..K,lambda_mean_1..K,lambda_disagreement,critic_disagreement,alpha,beta,gamma
std::vector<std::string> metrics_columns(std::size_t num_constraints);
/// step,lambda_<n>_<k> for agents n = 1..N and constraints k = 1..K.
std::vector<std::string> lambda_columns(std::size_t num_agents, std::size_t num_constraints);

/// Shortest text that reads back to the same double ("%.17g"); non-finite values as nan/inf.
std::string format_double(double x);

/// Writes both CSV files. Fresh writers truncate; resuming writers keep rows up to and
/// including `resume_step` and append after them.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& dir, std::size_t num_agents, std::size_t num_constraints);
  MetricsWriter(const std::filesystem::path& dir, std::size_t num_agents, std::size_t num_constraints,
                std::uint64_t resume_step);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const MetricsRecord& record);
  void flush();

 private:
  void open(const std::filesystem::path& dir, const std::uint64_t* resume_step);

  std::size_t n_, k_;
  std::FILE* metrics_ = nullptr;
  std::FILE* lambdas_ = nullptr;
};

/// A numeric CSV file with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of `name`, or npos.
  std::size_t find(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

/// Throws IoError when unreadable and ConfigError on ragged or non-numeric rows.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace cmarl
