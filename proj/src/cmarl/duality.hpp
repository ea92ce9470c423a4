#pragma once

// Brute-force primal and dual values over grids of product policies and multipliers.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cmarl/cmg.hpp"

namespace cmarl {

struct DualityOptions {
  std::size_t policy_resolution = 11;
  std::size_t lambda_resolution = 21;
  /// Upper end of the multiplier grid per constraint.
  std::vector<double> lambda_max;
  /// Slater margins delta_k; when present the multiplier bound (1 + gap) / delta_k is reported.
  std::optional<std::vector<double>> slater_margins;
  double feasibility_tolerance = 1e-9;
  std::size_t max_policies = 2'000'000;
};

struct DualityEstimate {
  bool feasible = false;
  double primal = 0.0;  // P*: min J over grid policies with G <= b + tol
  double dual = 0.0;    // D*: max over the lambda grid of min over policies of L
  double gap = 0.0;     // P* - D*
  std::vector<double> best_lambda;
  std::vector<double> lambda_bound;  // (1 + gap) / delta_k when margins are given
  std::size_t policies = 0;
  std::string note;
};

/// Throws BudgetError when the policy grid exceeds `max_policies`. An infeasible grid is
/// reported through `feasible = false` and `note`, not an exception.
DualityEstimate brute_force_duality(const Environment& env, const DualityOptions& options);

}  // namespace cmarl
