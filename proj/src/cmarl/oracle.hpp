#pragma once

// Exact computations on small tabular games: stationary distributions, objective and
// constraint values, differential Q, exact policy gradients, Kemeny constants and the
// perturbation bounds built on them.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmarl/cmg.hpp"
#include "cmarl/function_approx.hpp"
#include "cmarl/random.hpp"

namespace cmarl {

/// Largest |S| * |A| the oracle accepts by default.
inline constexpr std::size_t kOraclePairBudget = 1000;

/// Throws BudgetError when the game has more state / joint-action pairs than `pair_budget`.
void check_oracle_size(const Environment& env, std::size_t pair_budget = kOraclePairBudget);

/// Explicit per-agent conditionals pi_n(a_n | s); the joint policy is their product.
class PolicyTable {
 public:
  /// `tables[n][s * |A_n| + a_n]`. Rows must be probability vectors (1e-10); with
  /// `require_positive` every entry must also be strictly positive.
  PolicyTable(GameShape shape, std::vector<std::vector<double>> tables, bool require_positive = false);

  static PolicyTable uniform(const GameShape& shape);
  static PolicyTable from_softmax(const GameShape& shape, std::span<const SoftmaxPolicy> policies);
  /// Independent Dirichlet(1) rows.
  static PolicyTable random(const GameShape& shape, Rng& rng);

  const GameShape& shape() const { return shape_; }
  double prob(std::size_t agent, std::size_t state, std::size_t action) const {
    return tables_[agent][state * shape_.actions_per_agent[agent] + action];
  }
  std::span<const double> agent_row(std::size_t agent, std::size_t state) const;
  const std::vector<std::vector<double>>& tables() const { return tables_; }

  /// pi(a | s) for every joint action.
  void joint_row(std::size_t state, std::span<double> out) const;
  /// |S| x |A| matrix of joint probabilities.
  Eigen::MatrixXd joint_matrix() const;

 private:
  GameShape shape_;
  JointActionCodec codec_;
  std::vector<std::vector<double>> tables_;
};

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s, a).
Eigen::MatrixXd induced_chain(const Environment& env, const PolicyTable& policy);

/// Checks irreducibility and aperiodicity (AnalysisError naming the offending states or the
/// period), solves d^T P = d^T with sum 1 and verifies the residual is below 1e-10.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

struct ExactEval {
  Eigen::VectorXd d;          // stationary distribution over states
  Eigen::MatrixXd occupation; // d(s) pi(a|s), |S| x |A|
  double J = 0.0;
  std::vector<double> G;      // length K
  double lagrangian = 0.0;    // J + lambda . (G - b)
};

/// Uses agent-averaged costs c_bar = (1/N) sum_n c_n and g_bar_k likewise.
ExactEval exact_values(const Environment& env, const PolicyTable& policy, std::span<const double> lambda);

/// Per-agent exact constraint values G_{n,k} = sum d(s,a) g_{n,k}(s,a), N x K agent-major.
std::vector<double> exact_agent_constraints(const Environment& env, const PolicyTable& policy);

/// Average local Lagrangian cost L_bar(s,a) = (1/N) sum_n [c_n + lambda_n . (g_n - b)] as |S| x |A|.
/// `lambda_hat` is N x K agent-major.
Eigen::MatrixXd local_lagrangian_table(const Environment& env, std::span<const double> lambda_hat);

/// sum_{s,a} d(s,a) L_bar(s,a).
double decomposed_lagrangian(const Environment& env, const PolicyTable& policy, std::span<const double> lambda_hat);

struct DifferentialQ {
  Eigen::MatrixXd q;           // |S| x |A|
  Eigen::VectorXd h;           // sum_a pi(a|s) Q(s,a)
  double value = 0.0;          // decomposed Lagrangian
  double residual = 0.0;       // max |Bellman residual|
  double normalization = 0.0;  // sum d(s,a) Q(s,a)
};

/// Solves the average-cost Poisson equation for L_bar, normalized so sum d(s,a) Q = 0.
/// Throws AnalysisError when the residual exceeds 1e-8.
DifferentialQ differential_q(const Environment& env, const PolicyTable& policy, std::span<const double> lambda_hat);

/// Per-agent gradient of the decomposed Lagrangian with respect to theta_n:
/// sum_{s,a} d(s,a) psi_n(s, a_n) A_n(s, a).
std::vector<std::vector<double>> exact_policy_gradient(const Environment& env, std::span<const SoftmaxPolicy> policies,
                                                       std::span<const double> lambda_hat);

/// Decomposed Lagrangian evaluated at the softmax policies.
double decomposed_lagrangian(const Environment& env, std::span<const SoftmaxPolicy> policies,
                             std::span<const double> lambda_hat);

struct KemenyResult {
  double kappa = 0.0;   // sum_j d_j m_ij with m_jj = 0
  double spread = 0.0;  // max_i |kappa_i - kappa|
  Eigen::MatrixXd mean_first_passage;
  static constexpr const char* kConvention = "m_jj = 0 (no return-time term)";
};

/// Mean first-passage times from m_ij = 1 + sum_{k != j} P_ik m_kj, then kappa = sum_j d_j m_ij.
/// Throws AnalysisError when kappa_i varies with i by more than 1e-8 * max(1, kappa).
KemenyResult kemeny_constant(const Eigen::MatrixXd& P);

/// max_s sum_a |pi(a|s) - pi'(a|s)| over joint actions.
double policy_distance(const PolicyTable& a, const PolicyTable& b);
/// Same distance restricted to one agent's conditionals.
double agent_policy_distance(const PolicyTable& a, const PolicyTable& b, std::size_t agent);

/// Grid of product policies: every agent-state row ranges over distributions whose entries
/// are multiples of 1/(resolution - 1).
class PolicyGrid {
 public:
  PolicyGrid(GameShape shape, std::size_t resolution);

  /// Number of product policies; saturates at SIZE_MAX.
  std::size_t size() const { return size_; }
  /// Calls `visit` for each policy in a fixed order.
  template <typename Visit>
  void for_each(Visit&& visit) const;

  const std::vector<std::vector<double>>& row_choices(std::size_t agent) const { return choices_[agent]; }

 private:
  GameShape shape_;
  std::size_t resolution_;
  std::vector<std::vector<std::vector<double>>> choices_;  // per agent: list of rows
  std::size_t size_ = 1;
};

/// Largest Kemeny constant over a policy grid, raising BudgetError above `max_policies`.
double max_kemeny_over_grid(const Environment& env, std::size_t resolution, std::size_t max_policies = 2'000'000);

struct BoundReport {
  double epsilon = 0.0;
  double kappa_star = 0.0;      // raw convention (m_jj = 0)
  bool kappa_proxy = true;      // true when kappa_star is not a grid enumeration
  double state_l1 = 0.0;        // ||d^pi - d^pi'||_1
  double state_bound = 0.0;     // kappa_star * epsilon
  double occupation_l1 = 0.0;
  double occupation_bound = 0.0;  // (kappa_star + 1) * epsilon
  double lagrangian_diff = 0.0;   // L(pi, lambda) - L(pi', lambda')
  double lagrangian_bound = 0.0;  // ||lambda - lambda'||_1 + (1 + K ||lambda'||_1) occupation_l1
  double state_slack() const { return state_bound - state_l1; }
  double occupation_slack() const { return occupation_bound - occupation_l1; }
  double lagrangian_slack() const { return lagrangian_bound - lagrangian_diff; }
};

/// Stationary and occupation-measure perturbation bounds and the Lagrangian difference bound.
/// kappa_star is max(enumerated, kappa^pi, kappa^pi') when `enumerated_kappa` is given,
/// else max(kappa^pi, kappa^pi') flagged as a proxy. In the raw convention the stationary
/// bound constant is kappa_star and the occupation-measure constant is kappa_star + 1.
BoundReport verify_distance_bounds(const Environment& env, const PolicyTable& pi, const PolicyTable& pi_prime,
                                   std::span<const double> lambda, std::span<const double> lambda_prime,
                                   std::optional<double> enumerated_kappa = std::nullopt);

/// Runs the constraint-estimate recursion G_hat += alpha_t (g - G_hat) along a simulated
/// trajectory of `policy` and returns the N x K estimates. alpha_t = 1 / (t + 1)^p_alpha.
std::vector<double> simulate_dual_critic(const Environment& env, const PolicyTable& policy, std::size_t steps,
                                         double p_alpha, std::uint64_t seed, std::size_t initial_state = 0);

/// Time average of (1/N) sum_n c_n along a simulated trajectory.
double simulate_average_cost(const Environment& env, const PolicyTable& policy, std::size_t steps,
                             std::uint64_t seed, std::size_t initial_state = 0);

// ---------------------------------------------------------------------------

template <typename Visit>
void PolicyGrid::for_each(Visit&& visit) const {
  const std::size_t N = shape_.num_agents, S = shape_.num_states;
  // One odometer digit per (agent, state) row.
  std::vector<std::size_t> digit(N * S, 0);
  std::vector<std::vector<double>> tables(N);
  for (std::size_t n = 0; n < N; ++n) tables[n].resize(S * shape_.actions_per_agent[n]);
  auto fill = [&](std::size_t slot) {
    const std::size_t n = slot / S, s = slot % S, m = shape_.actions_per_agent[n];
    const auto& row = choices_[n][digit[slot]];
    std::copy(row.begin(), row.end(), tables[n].begin() + static_cast<std::ptrdiff_t>(s * m));
  };
  for (std::size_t slot = 0; slot < N * S; ++slot) fill(slot);
  while (true) {
    visit(PolicyTable(shape_, tables));
    std::size_t slot = 0;
    while (slot < N * S) {
      const std::size_t n = slot / S;
      if (++digit[slot] < choices_[n].size()) {
        fill(slot);
        break;
      }
      digit[slot] = 0;
      fill(slot);
      ++slot;
    }
    if (slot == N * S) return;
  }
}

}  // namespace cmarl
