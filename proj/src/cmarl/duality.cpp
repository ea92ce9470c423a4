#include "cmarl/duality.hpp"

#include <algorithm>
#include <limits>

#include "cmarl/errors.hpp"
#include "cmarl/oracle.hpp"

namespace cmarl {

DualityEstimate brute_force_duality(const Environment& env, const DualityOptions& opt) {
  const GameShape& sh = env.shape();
  const std::size_t K = sh.num_constraints;
  check_oracle_size(env);
  if (opt.lambda_max.size() != K) throw ConfigError("lambda_max needs one entry per constraint");
  if (opt.lambda_resolution < 2) throw ConfigError("lambda grid resolution must be at least 2");
  if (opt.slater_margins) {
    if (opt.slater_margins->size() != K) throw ConfigError("slater margins need one entry per constraint");
    for (double d : *opt.slater_margins) {
      if (!(d > 0.0)) throw ConfigError("slater margins must be positive");
    }
  }
  PolicyGrid grid(sh, opt.policy_resolution);
  if (grid.size() > opt.max_policies) {
    throw BudgetError("policy grid has " + std::to_string(grid.size()) + " policies, above the limit of " +
                      std::to_string(opt.max_policies) + "; lower the resolution");
  }

  // J and G of every grid policy; the lambda grid is then scanned over these values.
  std::vector<double> J, G;
  const std::vector<double> zero(K, 0.0);
  grid.for_each([&](const PolicyTable& p) {
    const ExactEval e = exact_values(env, p, zero);
    J.push_back(e.J);
    G.insert(G.end(), e.G.begin(), e.G.end());
  });
  const auto b = env.bounds();

  DualityEstimate out;
  out.policies = J.size();
  out.primal = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < J.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < K; ++k) ok = ok && G[i * K + k] <= b[k] + opt.feasibility_tolerance;
    if (ok) {
      out.feasible = true;
      out.primal = std::min(out.primal, J[i]);
    }
  }

  // Odometer over the K-dimensional multiplier grid.
  std::vector<std::size_t> digit(K, 0);
  std::vector<double> lambda(K, 0.0);
  out.dual = -std::numeric_limits<double>::infinity();
  while (true) {
    for (std::size_t k = 0; k < K; ++k) {
      lambda[k] = opt.lambda_max[k] * static_cast<double>(digit[k]) / static_cast<double>(opt.lambda_resolution - 1);
    }
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < J.size(); ++i) {
      double l = J[i];
      for (std::size_t k = 0; k < K; ++k) l += lambda[k] * (G[i * K + k] - b[k]);
      inner = std::min(inner, l);
    }
    if (inner > out.dual) {
      out.dual = inner;
      out.best_lambda = lambda;
    }
    std::size_t k = 0;
    while (k < K && ++digit[k] == opt.lambda_resolution) digit[k++] = 0;
    if (k == K) break;
  }

  if (!out.feasible) {
    out.note = "no grid policy satisfies the constraints at resolution " + std::to_string(opt.policy_resolution) +
               "; try a finer policy grid";
    out.primal = std::numeric_limits<double>::infinity();
    out.gap = std::numeric_limits<double>::infinity();
    return out;
  }
  out.gap = out.primal - out.dual;
  if (opt.slater_margins) {
    for (std::size_t k = 0; k < K; ++k) out.lambda_bound.push_back((1.0 + out.gap) / (*opt.slater_margins)[k]);
  }
  return out;
}

}  // namespace cmarl
