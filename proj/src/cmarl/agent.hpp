#pragma once

// Per-agent local update rules: Lagrangian cost, critic TD step, actor step, dual-critic
// and multiplier steps. Every function is pure.

#include <cstddef>
#include <span>
#include <vector>

#include "cmarl/cmg.hpp"
#include "cmarl/function_approx.hpp"

namespace cmarl {

/// One agent's local state. The actor and critic parameters live in `policy` and `critic`.
struct AgentState {
  SoftmaxPolicy policy;
  LinearCritic critic;
  double avg_cost = 0.0;           // running Lagrangian average L_hat
  std::vector<double> g_hat;       // constraint estimates, length K
  std::vector<double> lambda_hat;  // local multipliers, length K

  std::span<const double> theta() const { return policy.theta(); }
  std::span<const double> w() const { return critic.weights(); }
};

/// l = c + lambda . (g - b)
double local_lagrangian_cost(double cost, std::span<const double> g, std::span<const double> lambda,
                             std::span<const double> bounds);

struct CriticStep {
  double avg_cost;                 // L_hat + alpha (l - L_hat)
  std::vector<double> w_tilde;     // pre-gossip weights
  double td_error;
};

/// delta = l - L_hat + phi_next . w - phi_cur . w, with the pre-update L_hat;
/// w_tilde = w + alpha delta phi_cur.
CriticStep critic_update(std::span<const double> w, double avg_cost, double l, std::span<const double> phi_cur,
                         std::span<const double> phi_next, double alpha);

/// A_n = Q(s, a) - sum_{a_n'} pi_n(a_n' | policy_state) Q(s, (a_n', a_-n)).
/// `policy_state` is normally `state`; it differs only under the next-state advantage variant.
double advantage(const LinearCritic& critic, const SoftmaxPolicy& policy, const JointActionCodec& codec,
                 std::size_t agent, std::size_t state, std::size_t joint, std::size_t policy_state);

struct ActorStep {
  std::vector<double> theta;
  double advantage;
};

/// theta' = clip(theta - beta A_n psi_n, +-theta_max) with psi_n = score(state, a_n).
ActorStep actor_update(const LinearCritic& critic, const SoftmaxPolicy& policy, const JointActionCodec& codec,
                       std::size_t agent, std::size_t state, std::size_t joint, double beta,
                       std::size_t policy_state);

/// G_hat + alpha (g - G_hat), componentwise.
std::vector<double> dual_critic_update(std::span<const double> g_hat, std::span<const double> g, double alpha);

/// clip(mixed_lambda + gamma (g_hat - b), 0, lambda_max), componentwise.
std::vector<double> dual_update(std::span<const double> mixed_lambda, std::span<const double> g_hat, double gamma,
                                std::span<const double> bounds, std::span<const double> lambda_max);

}  // namespace cmarl
