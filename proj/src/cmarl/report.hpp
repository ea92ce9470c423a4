#pragma once

// Static SVG line charts drawn from a run's metrics files.

#include <filesystem>
#include <string>
#include <vector>

namespace cmarl {

inline constexpr const char* kLambdaChart = "lambda.svg";
inline constexpr const char* kCostChart = "costs.svg";

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Draws a horizontal reference line at y = 0.
  bool zero_line = false;
};

/// Self-contained SVG document. Charts without data still get axes.
std::string render_svg(const LineChart& chart);

struct ChartFiles {
  std::filesystem::path lambda;
  std::filesystem::path costs;
};

/// Reads metrics.csv (and lambdas.csv when present) from `dir` and writes lambda.svg and
/// costs.svg next to them. Throws ConfigError naming any missing columns.
ChartFiles emit_report(const std::filesystem::path& dir);

}  // namespace cmarl
