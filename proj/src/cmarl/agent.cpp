#include "cmarl/agent.hpp"

#include <algorithm>

#include "cmarl/errors.hpp"

namespace cmarl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InvalidArgument(std::string(what) + " dimensions differ");
}

}  // namespace

double local_lagrangian_cost(double cost, std::span<const double> g, std::span<const double> lambda,
                             std::span<const double> bounds) {
  require_same(g.size(), lambda.size(), "constraint and multiplier");
  require_same(g.size(), bounds.size(), "constraint and bound");
  double l = cost;
  for (std::size_t k = 0; k < g.size(); ++k) l += lambda[k] * (g[k] - bounds[k]);
  return l;
}

CriticStep critic_update(std::span<const double> w, double avg_cost, double l, std::span<const double> phi_cur,
                         std::span<const double> phi_next, double alpha) {
  require_same(w.size(), phi_cur.size(), "critic weight and feature");
  require_same(w.size(), phi_next.size(), "critic weight and feature");
  CriticStep out;
  out.td_error = l - avg_cost + dot(phi_next, w) - dot(phi_cur, w);
  out.avg_cost = avg_cost + alpha * (l - avg_cost);
  out.w_tilde.resize(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) out.w_tilde[j] = w[j] + alpha * out.td_error * phi_cur[j];
  return out;
}

double advantage(const LinearCritic& critic, const SoftmaxPolicy& policy, const JointActionCodec& codec,
                 std::size_t agent, std::size_t state, std::size_t joint, std::size_t policy_state) {
  const std::size_t m = policy.num_actions();
  std::vector<double> p(m);
  policy.probs(policy_state, p);
  double baseline = 0.0;
  for (std::size_t a = 0; a < m; ++a) baseline += p[a] * critic.q_value(state, codec.with_action(joint, agent, a));
  return critic.q_value(state, joint) - baseline;
}

ActorStep actor_update(const LinearCritic& critic, const SoftmaxPolicy& policy, const JointActionCodec& codec,
                       std::size_t agent, std::size_t state, std::size_t joint, double beta,
                       std::size_t policy_state) {
  ActorStep out;
  out.advantage = advantage(critic, policy, codec, agent, state, joint, policy_state);
  const auto psi = policy.score(state, codec.action_of(joint, agent));
  const auto theta = policy.theta();
  const double bound = policy.theta_max();
  out.theta.resize(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    out.theta[j] = std::clamp(theta[j] - beta * out.advantage * psi[j], -bound, bound);
  }
  return out;
}

std::vector<double> dual_critic_update(std::span<const double> g_hat, std::span<const double> g, double alpha) {
  require_same(g_hat.size(), g.size(), "constraint estimate");
  std::vector<double> out(g_hat.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = g_hat[k] + alpha * (g[k] - g_hat[k]);
  return out;
}

std::vector<double> dual_update(std::span<const double> mixed_lambda, std::span<const double> g_hat, double gamma,
                                std::span<const double> bounds, std::span<const double> lambda_max) {
  require_same(mixed_lambda.size(), g_hat.size(), "multiplier and constraint estimate");
  require_same(g_hat.size(), bounds.size(), "constraint estimate and bound");
  require_same(bounds.size(), lambda_max.size(), "bound and multiplier box");
  std::vector<double> out(mixed_lambda.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::clamp(mixed_lambda[k] + gamma * (g_hat[k] - bounds[k]), 0.0, lambda_max[k]);
  }
  return out;
}

}  // namespace cmarl
