#pragma once

// Constrained cooperative Cournot game with stochastic market state.
//
// State s is a demand-slope value on a grid inside (0, 1); each agent picks a production
// level a_n on a grid in [0, 1]. Market price x = N - s * sum(a). Agent n pays
// c_n = -(x - h) * a_n and incurs constraint cost g_n = m_n * x (one constraint).
// The next state index is Binomial(|S| - 1, p) with p falling as total production rises.

#include <cstddef>
#include <span>
#include <vector>

#include "cmarl/cmg.hpp"

namespace cmarl {

struct CournotConfig {
  std::size_t num_agents = 5;
  double unit_price = 1.0;
  std::vector<double> constraint_weights{0.1, 0.3, 0.5, 0.1, 0.0};
  double bound = 0.75;
  std::size_t num_states = 10;
  double state_min = 0.1;
  double state_max = 0.9;
  std::size_t num_actions = 10;
  double action_min = 0.0;
  double action_max = 1.0;
  double transition_sharpness = 1.0;
  /// Adds state_modulation * (s - midpoint of the state grid) to the binomial success
  /// probability. Zero keeps the next state dependent on total production only.
  double state_modulation = 0.0;
  double cost_noise = 0.0;

  /// Throws ConfigError on an invalid configuration.
  void check() const;
  std::vector<double> state_grid() const;
  std::vector<double> action_grid() const;
};

/// Binomial success probability is clipped to this range so no state becomes absorbing.
inline constexpr double kMinSuccessProbability = 0.05;
inline constexpr double kMaxSuccessProbability = 0.95;

/// Default cell budget for materializing transition tensors (|S| * |A| * |S| doubles).
inline constexpr std::size_t kDefaultCellBudget = 20'000'000;

/// x(s, a) = N - s * sum_n a_n.
double market_price(const CournotConfig& config, double state, std::span<const double> production);

struct CournotStageCosts {
  std::vector<double> cost;        // c_n = -(x - h) a_n
  std::vector<double> constraint;  // g_n = m_n x
};

CournotStageCosts stage_costs(const CournotConfig& config, double state, std::span<const double> production);

/// Binomial success probability for the next-state draw.
double success_probability(const CournotConfig& config, double state, double total_production);

/// P(. | s_index, a) over state indices; `actions` are per-agent grid indices.
std::vector<double> transition_distribution(const CournotConfig& config, std::size_t state_index,
                                            std::span<const std::size_t> actions);

/// Binomial(trials, p) probability mass function.
std::vector<double> binomial_pmf(std::size_t trials, double p);

/// Lazily evaluated game: costs are computed on demand and transition rows come from a
/// small cache keyed by (state, sum of action indices). Suitable for the full 10 x 10^5 grid.
class CournotGame final : public Environment {
 public:
  explicit CournotGame(CournotConfig config);

  const CournotConfig& config() const { return config_; }
  const GameShape& shape() const override { return shape_; }
  std::span<const double> bounds() const override { return bounds_; }
  double cost_noise() const override { return config_.cost_noise; }
  void transition_row(std::size_t state, std::size_t joint, std::span<double> out) const override;
  double cost(std::size_t agent, std::size_t state, std::size_t joint) const override;
  double constraint_cost(std::size_t agent, std::size_t k, std::size_t state, std::size_t joint) const override;
  void stage_means(std::size_t state, std::size_t joint, std::span<double> costs,
                   std::span<double> constraints) const override;

  double state_value(std::size_t state) const { return states_[state]; }
  double action_value(std::size_t action) const { return actions_[action]; }

 private:
  double total_production(std::size_t joint) const;
  std::size_t index_sum(std::size_t joint) const;

  CournotConfig config_;
  GameShape shape_;
  std::vector<double> bounds_;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::size_t max_index_sum_ = 0;
  std::vector<double> row_cache_;  // [(s * (max_index_sum + 1) + sum) * |S| + s']
};

/// Fully materialized Cournot game. Throws BudgetError above `cell_budget` transition cells.
TabularCMG build_tabular(const CournotConfig& config, std::size_t cell_budget = kDefaultCellBudget);

}  // namespace cmarl
