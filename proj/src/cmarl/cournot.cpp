#include "cmarl/cournot.hpp"

#include <algorithm>
#include <cmath>

#include "cmarl/errors.hpp"

namespace cmarl {

namespace {

std::vector<double> even_grid(double lo, double hi, std::size_t count) {
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return grid;
}

}  // namespace

void CournotConfig::check() const {
  if (num_agents == 0) throw ConfigError("cournot.num_agents must be positive");
  if (constraint_weights.size() != num_agents) {
    throw ConfigError("cournot.constraint_weights has " + std::to_string(constraint_weights.size()) +
                      " entries for " + std::to_string(num_agents) + " agents");
  }
  for (double m : constraint_weights) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("cournot.constraint_weights must be finite and >= 0");
  }
  if (num_states < 2) throw ConfigError("cournot.num_states must be at least 2");
  if (num_actions < 2) throw ConfigError("cournot.num_actions must be at least 2");
  if (!(state_min > 0.0 && state_max < 1.0 && state_min < state_max)) {
    throw ConfigError("cournot state grid must satisfy 0 < state_min < state_max < 1");
  }
  if (!(action_min < action_max)) throw ConfigError("cournot action grid must satisfy action_min < action_max");
  if (!(action_min >= 0.0 && action_max <= 1.0)) throw ConfigError("cournot production levels must lie in [0, 1]");
  if (!std::isfinite(unit_price) || !std::isfinite(bound)) throw ConfigError("cournot unit_price and bound must be finite");
  if (!(transition_sharpness >= 0.0) || !std::isfinite(transition_sharpness)) {
    throw ConfigError("cournot.transition_sharpness must be finite and >= 0");
  }
  if (!std::isfinite(state_modulation)) throw ConfigError("cournot.state_modulation must be finite");
  if (!(cost_noise >= 0.0) || !std::isfinite(cost_noise)) throw ConfigError("cournot.cost_noise must be finite and >= 0");
}

std::vector<double> CournotConfig::state_grid() const { return even_grid(state_min, state_max, num_states); }
std::vector<double> CournotConfig::action_grid() const { return even_grid(action_min, action_max, num_actions); }

double market_price(const CournotConfig& config, double state, std::span<const double> production) {
  double total = 0.0;
  for (double a : production) total += a;
  return static_cast<double>(config.num_agents) - state * total;
}

CournotStageCosts stage_costs(const CournotConfig& config, double state, std::span<const double> production) {
  const double x = market_price(config, state, production);
  CournotStageCosts out;
  out.cost.resize(production.size());
  out.constraint.resize(production.size());
  for (std::size_t n = 0; n < production.size(); ++n) {
    out.cost[n] = -(x - config.unit_price) * production[n];
    out.constraint[n] = config.constraint_weights[n] * x;
  }
  return out;
}

double success_probability(const CournotConfig& config, double state, double total_production) {
  const double mid = 0.5 * (config.state_min + config.state_max);
  double p = 1.0 - config.transition_sharpness * total_production / static_cast<double>(config.num_agents) +
             config.state_modulation * (state - mid);
  return std::clamp(p, kMinSuccessProbability, kMaxSuccessProbability);
}

std::vector<double> binomial_pmf(std::size_t trials, double p) {
  std::vector<double> pmf(trials + 1);
  const double q = 1.0 - p;
  double coeff = 1.0;
  for (std::size_t k = 0; k <= trials; ++k) {
    if (k > 0) coeff = coeff * static_cast<double>(trials - k + 1) / static_cast<double>(k);
    pmf[k] = coeff * std::pow(p, static_cast<double>(k)) * std::pow(q, static_cast<double>(trials - k));
  }
  return pmf;
}

std::vector<double> transition_distribution(const CournotConfig& config, std::size_t state_index,
                                            std::span<const std::size_t> actions) {
  config.check();
  if (state_index >= config.num_states) throw IndexError("state index out of range");
  if (actions.size() != config.num_agents) throw IndexError("joint action length differs from num_agents");
  std::size_t sum = 0;
  for (auto a : actions) {
    if (a >= config.num_actions) throw IndexError("action index out of range");
    sum += a;
  }
  const double step = (config.action_max - config.action_min) / static_cast<double>(config.num_actions - 1);
  const double total = static_cast<double>(config.num_agents) * config.action_min + static_cast<double>(sum) * step;
  const double s = config.state_grid()[state_index];
  return binomial_pmf(config.num_states - 1, success_probability(config, s, total));
}

// ---------------------------------------------------------------------------

CournotGame::CournotGame(CournotConfig config) : config_(std::move(config)) {
  config_.check();
  shape_.num_agents = config_.num_agents;
  shape_.num_states = config_.num_states;
  shape_.num_constraints = 1;
  shape_.actions_per_agent.assign(config_.num_agents, config_.num_actions);
  set_codec(shape_);
  bounds_ = {config_.bound};
  states_ = config_.state_grid();
  actions_ = config_.action_grid();

  max_index_sum_ = config_.num_agents * (config_.num_actions - 1);
  const std::size_t S = config_.num_states;
  const double step = (config_.action_max - config_.action_min) / static_cast<double>(config_.num_actions - 1);
  row_cache_.resize(S * (max_index_sum_ + 1) * S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t sum = 0; sum <= max_index_sum_; ++sum) {
      const double total =
          static_cast<double>(config_.num_agents) * config_.action_min + static_cast<double>(sum) * step;
      auto pmf = binomial_pmf(S - 1, success_probability(config_, states_[s], total));
      std::copy(pmf.begin(), pmf.end(), row_cache_.begin() + static_cast<std::ptrdiff_t>((s * (max_index_sum_ + 1) + sum) * S));
    }
  }
}

std::size_t CournotGame::index_sum(std::size_t joint) const {
  std::size_t sum = 0;
  for (std::size_t n = 0; n < shape_.num_agents; ++n) sum += codec().action_of(joint, n);
  return sum;
}

double CournotGame::total_production(std::size_t joint) const {
  double total = 0.0;
  for (std::size_t n = 0; n < shape_.num_agents; ++n) total += actions_[codec().action_of(joint, n)];
  return total;
}

void CournotGame::transition_row(std::size_t state, std::size_t joint, std::span<double> out) const {
  const std::size_t S = shape_.num_states;
  auto first = row_cache_.begin() + static_cast<std::ptrdiff_t>((state * (max_index_sum_ + 1) + index_sum(joint)) * S);
  std::copy(first, first + static_cast<std::ptrdiff_t>(S), out.begin());
}

double CournotGame::cost(std::size_t agent, std::size_t state, std::size_t joint) const {
  const double x = static_cast<double>(shape_.num_agents) - states_[state] * total_production(joint);
  return -(x - config_.unit_price) * actions_[codec().action_of(joint, agent)];
}

double CournotGame::constraint_cost(std::size_t agent, std::size_t /*k*/, std::size_t state, std::size_t joint) const {
  const double x = static_cast<double>(shape_.num_agents) - states_[state] * total_production(joint);
  return config_.constraint_weights[agent] * x;
}

void CournotGame::stage_means(std::size_t state, std::size_t joint, std::span<double> costs,
                              std::span<double> constraints) const {
  const double x = static_cast<double>(shape_.num_agents) - states_[state] * total_production(joint);
  for (std::size_t n = 0; n < shape_.num_agents; ++n) {
    costs[n] = -(x - config_.unit_price) * actions_[codec().action_of(joint, n)];
    constraints[n] = config_.constraint_weights[n] * x;
  }
}

TabularCMG build_tabular(const CournotConfig& config, std::size_t cell_budget) {
  config.check();
  // Budget check before building the lazy game's caches.
  const std::size_t joint = static_cast<std::size_t>(std::pow(static_cast<double>(config.num_actions),
                                                              static_cast<double>(config.num_agents)));
  const double cells = static_cast<double>(config.num_states) * static_cast<double>(joint) *
                       static_cast<double>(config.num_states);
  if (cells > static_cast<double>(cell_budget)) {
    throw BudgetError("Cournot transition table needs " + std::to_string(static_cast<unsigned long long>(cells)) +
                      " cells, above the cell budget of " + std::to_string(cell_budget) +
                      "; use the lazy environment or raise the budget");
  }
  CournotGame game(config);
  return TabularCMG::materialize(game, cell_budget);
}

}  // namespace cmarl
