#include "cmarl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "cmarl/errors.hpp"

namespace cmarl {

namespace {

std::string list_states(const std::vector<std::size_t>& states) {
  std::string out = "{";
  for (std::size_t i = 0; i < states.size(); ++i) out += (i ? ", " : "") + std::to_string(states[i]);
  return out + "}";
}

// States reachable from `start` along positive entries of P (or of P^T when `reverse`).
std::vector<bool> reachable(const Eigen::MatrixXd& P, std::size_t start, bool reverse) {
  const auto n = static_cast<std::size_t>(P.rows());
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{start};
  seen[start] = true;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v = 0; v < n; ++v) {
      const double p = reverse ? P(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u))
                               : P(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
      if (p > 0.0 && !seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
  return seen;
}

void check_ergodic(const Eigen::MatrixXd& P) {
  const auto n = static_cast<std::size_t>(P.rows());
  std::vector<std::size_t> missing;
  const auto forward = reachable(P, 0, false);
  for (std::size_t s = 0; s < n; ++s) {
    if (!forward[s]) missing.push_back(s);
  }
  if (!missing.empty()) {
    throw AnalysisError("chain is reducible: states " + list_states(missing) + " are unreachable from state 0");
  }
  const auto backward = reachable(P, 0, true);
  for (std::size_t s = 0; s < n; ++s) {
    if (!backward[s]) missing.push_back(s);
  }
  if (!missing.empty()) {
    throw AnalysisError("chain is reducible: state 0 is unreachable from states " + list_states(missing));
  }
  // Period = gcd over edges u -> v of (level[u] + 1 - level[v]) for BFS levels from state 0.
  std::vector<long> level(n, -1);
  std::deque<std::size_t> queue{0};
  level[0] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v = 0; v < n; ++v) {
      if (P(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  long period = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (P(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0) {
        period = std::gcd(period, std::labs(level[u] + 1 - level[v]));
      }
    }
  }
  if (period > 1) throw AnalysisError("chain is periodic with period " + std::to_string(period));
}

void check_row_stochastic(const Eigen::MatrixXd& P) {
  if (P.rows() != P.cols() || P.rows() == 0) throw InvalidArgument("transition matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if ((P.row(i).array() < 0.0).any() || !P.row(i).allFinite()) {
      throw InvalidArgument("transition matrix row " + std::to_string(i) + " has a negative or non-finite entry");
    }
    if (std::abs(P.row(i).sum() - 1.0) > 1e-9) {
      throw InvalidArgument("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

double l1(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().sum(); }

}  // namespace

void check_oracle_size(const Environment& env, std::size_t pair_budget) {
  const std::size_t pairs = env.shape().num_pairs();
  if (pairs > pair_budget) {
    throw BudgetError("exact analysis needs " + std::to_string(pairs) + " state-action pairs, above the budget of " +
                      std::to_string(pair_budget));
  }
}

// ---------------------------------------------------------------------------
// PolicyTable

PolicyTable::PolicyTable(GameShape shape, std::vector<std::vector<double>> tables, bool require_positive)
    : shape_(std::move(shape)), codec_(shape_.actions_per_agent), tables_(std::move(tables)) {
  shape_.check();
  if (tables_.size() != shape_.num_agents) throw InvalidArgument("policy table needs one table per agent");
  for (std::size_t n = 0; n < shape_.num_agents; ++n) {
    const std::size_t m = shape_.actions_per_agent[n];
    if (tables_[n].size() != shape_.num_states * m) {
      throw InvalidArgument("policy table of agent " + std::to_string(n) + " has the wrong size");
    }
    for (std::size_t s = 0; s < shape_.num_states; ++s) {
      double total = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        const double p = tables_[n][s * m + a];
        if (!(p >= 0.0) || (require_positive && !(p > 0.0))) {
          throw InvalidArgument("policy of agent " + std::to_string(n) + " has an invalid entry at state " +
                                std::to_string(s));
        }
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-10) {
        throw InvalidArgument("policy row of agent " + std::to_string(n) + " at state " + std::to_string(s) +
                              " sums to " + std::to_string(total));
      }
    }
  }
}

PolicyTable PolicyTable::uniform(const GameShape& shape) {
  std::vector<std::vector<double>> t(shape.num_agents);
  for (std::size_t n = 0; n < shape.num_agents; ++n) {
    const std::size_t m = shape.actions_per_agent[n];
    t[n].assign(shape.num_states * m, 1.0 / static_cast<double>(m));
  }
  return PolicyTable(shape, std::move(t));
}

PolicyTable PolicyTable::from_softmax(const GameShape& shape, std::span<const SoftmaxPolicy> policies) {
  if (policies.size() != shape.num_agents) throw InvalidArgument("need one softmax policy per agent");
  std::vector<std::vector<double>> t(shape.num_agents);
  for (std::size_t n = 0; n < shape.num_agents; ++n) {
    const std::size_t m = shape.actions_per_agent[n];
    if (policies[n].num_actions() != m || policies[n].num_states() != shape.num_states) {
      throw InvalidArgument("softmax policy of agent " + std::to_string(n) + " does not match the game shape");
    }
    t[n].resize(shape.num_states * m);
    for (std::size_t s = 0; s < shape.num_states; ++s) {
      policies[n].probs(s, std::span<double>(t[n].data() + s * m, m));
    }
  }
  return PolicyTable(shape, std::move(t));
}

PolicyTable PolicyTable::random(const GameShape& shape, Rng& rng) {
  std::vector<std::vector<double>> t(shape.num_agents);
  for (std::size_t n = 0; n < shape.num_agents; ++n) {
    const std::size_t m = shape.actions_per_agent[n];
    t[n].resize(shape.num_states * m);
    for (std::size_t s = 0; s < shape.num_states; ++s) {
      double total = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        const double e = -std::log(1.0 - rng.uniform01());
        t[n][s * m + a] = e;
        total += e;
      }
      for (std::size_t a = 0; a < m; ++a) t[n][s * m + a] /= total;
    }
  }
  return PolicyTable(shape, std::move(t));
}

std::span<const double> PolicyTable::agent_row(std::size_t agent, std::size_t state) const {
  const std::size_t m = shape_.actions_per_agent[agent];
  return std::span<const double>(tables_[agent]).subspan(state * m, m);
}

void PolicyTable::joint_row(std::size_t state, std::span<double> out) const {
  std::vector<std::size_t> action(shape_.num_agents);
  for (std::size_t a = 0; a < codec_.size(); ++a) {
    codec_.decode(a, action);
    double p = 1.0;
    for (std::size_t n = 0; n < shape_.num_agents; ++n) p *= prob(n, state, action[n]);
    out[a] = p;
  }
}

Eigen::MatrixXd PolicyTable::joint_matrix() const {
  const std::size_t S = shape_.num_states, A = codec_.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A));
  std::vector<double> row(A);
  for (std::size_t s = 0; s < S; ++s) {
    joint_row(s, row);
    for (std::size_t a = 0; a < A; ++a) m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = row[a];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Chains

Eigen::MatrixXd induced_chain(const Environment& env, const PolicyTable& policy) {
  const GameShape& sh = env.shape();
  const std::size_t S = sh.num_states, A = sh.num_joint_actions();
  const Eigen::MatrixXd pi = policy.joint_matrix();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  std::vector<double> row(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double p = pi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      if (p == 0.0) continue;
      env.transition_row(s, a, row);
      for (std::size_t t = 0; t < S; ++t) P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += p * row[t];
    }
  }
  return P;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
  check_row_stochastic(P);
  check_ergodic(P);
  const Eigen::Index n = P.rows();
  // (I - P)^T d = 0 with the last equation replaced by sum(d) = 1.
  Eigen::MatrixXd A = (Eigen::MatrixXd::Identity(n, n) - P).transpose();
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd d = lu.solve(rhs);
  d += lu.solve(rhs - A * d);  // one refinement step
  const double residual = (d.transpose() * P - d.transpose()).cwiseAbs().maxCoeff();
  if (!(residual < 1e-10)) {
    throw AnalysisError("stationary distribution residual " + std::to_string(residual) + " exceeds 1e-10");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Values

ExactEval exact_values(const Environment& env, const PolicyTable& policy, std::span<const double> lambda) {
  const GameShape& sh = env.shape();
  const std::size_t S = sh.num_states, A = sh.num_joint_actions(), N = sh.num_agents, K = sh.num_constraints;
  if (lambda.size() != K) throw InvalidArgument("lambda must have one entry per constraint");
  ExactEval out;
  out.d = stationary_distribution(induced_chain(env, policy));
  out.occupation = out.d.asDiagonal() * policy.joint_matrix();
  out.G.assign(K, 0.0);
  std::vector<double> costs(N), cons(N * K);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double w = out.occupation(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      env.stage_means(s, a, costs, cons);
      double c = 0.0;
      for (double v : costs) c += v;
      out.J += w * (c / static_cast<double>(N));
      for (std::size_t k = 0; k < K; ++k) {
        double g = 0.0;
        for (std::size_t n = 0; n < N; ++n) g += cons[n * K + k];
        out.G[k] += w * (g / static_cast<double>(N));
      }
    }
  }
  auto b = env.bounds();
  out.lagrangian = out.J;
  for (std::size_t k = 0; k < K; ++k) out.lagrangian += lambda[k] * (out.G[k] - b[k]);
  return out;
}

std::vector<double> exact_agent_constraints(const Environment& env, const PolicyTable& policy) {
  const GameShape& sh = env.shape();
  const std::size_t S = sh.num_states, A = sh.num_joint_actions(), N = sh.num_agents, K = sh.num_constraints;
  const Eigen::VectorXd d = stationary_distribution(induced_chain(env, policy));
  const Eigen::MatrixXd occ = d.asDiagonal() * policy.joint_matrix();
  std::vector<double> out(N * K, 0.0);
  std::vector<double> costs(N), cons(N * K);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      env.stage_means(s, a, costs, cons);
      const double w = occ(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      for (std::size_t i = 0; i < N * K; ++i) out[i] += w * cons[i];
    }
  }
  return out;
}

Eigen::MatrixXd local_lagrangian_table(const Environment& env, std::span<const double> lambda_hat) {
  const GameShape& sh = env.shape();
  const std::size_t S = sh.num_states, A = sh.num_joint_actions(), N = sh.num_agents, K = sh.num_constraints;
  if (lambda_hat.size() != N * K) throw InvalidArgument("lambda_hat must hold N x K multipliers");
  auto b = env.bounds();
  Eigen::MatrixXd L(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A));
  std::vector<double> costs(N), cons(N * K);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      env.stage_means(s, a, costs, cons);
      double total = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        double l = costs[n];
        for (std::size_t k = 0; k < K; ++k) l += lambda_hat[n * K + k] * (cons[n * K + k] - b[k]);
        total += l;
      }
      L(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = total / static_cast<double>(N);
    }
  }
  return L;
}

double decomposed_lagrangian(const Environment& env, const PolicyTable& policy, std::span<const double> lambda_hat) {
  const Eigen::VectorXd d = stationary_distribution(induced_chain(env, policy));
  const Eigen::MatrixXd occ = d.asDiagonal() * policy.joint_matrix();
  return occ.cwiseProduct(local_lagrangian_table(env, lambda_hat)).sum();
}

DifferentialQ differential_q(const Environment& env, const PolicyTable& policy, std::span<const double> lambda_hat) {
  const GameShape& sh = env.shape();
  const std::size_t S = sh.num_states, A = sh.num_joint_actions();
  const auto s_ = static_cast<Eigen::Index>(S);
  const Eigen::MatrixXd P = induced_chain(env, policy);
  const Eigen::VectorXd d = stationary_distribution(P);
  const Eigen::MatrixXd pi = policy.joint_matrix();
  const Eigen::MatrixXd L = local_lagrangian_table(env, lambda_hat);

  DifferentialQ out;
  const Eigen::VectorXd r = pi.cwiseProduct(L).rowwise().sum();
  out.value = d.dot(r);
  // (I - P + 1 d^T) h = r - value 1 has a unique solution with d^T h = 0.
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(s_, s_) - P + Eigen::VectorXd::Ones(s_) * d.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) throw AnalysisError("Poisson system is singular (chain is not ergodic)");
  const Eigen::VectorXd rhs = r - out.value * Eigen::VectorXd::Ones(s_);
  out.h = lu.solve(rhs);
  out.h += lu.solve(rhs - M * out.h);

  out.q.resize(s_, static_cast<Eigen::Index>(A));
  std::vector<double> row(S);
  std::vector<Eigen::VectorXd> rows(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      env.transition_row(s, a, row);
      Eigen::Map<const Eigen::VectorXd> p(row.data(), s_);
      rows[s * A + a] = p;
      out.q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          L(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) - out.value + p.dot(out.h);
    }
  }
  // Bellman residual with h recomputed from Q itself.
  const Eigen::VectorXd hq = pi.cwiseProduct(out.q).rowwise().sum();
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const auto si = static_cast<Eigen::Index>(s), ai = static_cast<Eigen::Index>(a);
      const double target = L(si, ai) - out.value + rows[s * A + a].dot(hq);
      out.residual = std::max(out.residual, std::abs(out.q(si, ai) - target));
    }
  }
  out.normalization = (d.asDiagonal() * pi).cwiseProduct(out.q).sum();
  if (!(out.residual < 1e-8)) {
    throw AnalysisError("Poisson equation residual " + std::to_string(out.residual) + " exceeds 1e-8");
  }
  return out;
}

std::vector<std::vector<double>> exact_policy_gradient(const Environment& env, std::span<const SoftmaxPolicy> policies,
                                                       std::span<const double> lambda_hat) {
  const GameShape& sh = env.shape();
  const std::size_t S = sh.num_states, A = sh.num_joint_actions(), N = sh.num_agents;
  const PolicyTable table = PolicyTable::from_softmax(sh, policies);
  const DifferentialQ dq = differential_q(env, table, lambda_hat);
  const Eigen::VectorXd d = stationary_distribution(induced_chain(env, table));
  const Eigen::MatrixXd pi = table.joint_matrix();
  const JointActionCodec& codec = env.codec();

  std::vector<std::vector<double>> grads(N);
  for (std::size_t n = 0; n < N; ++n) {
    const SoftmaxPolicy& pol = policies[n];
    const std::size_t m = pol.num_actions(), dim = pol.dim();
    grads[n].assign(dim, 0.0);
    std::vector<std::vector<double>> scores(S * m);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < m; ++a) scores[s * m + a] = pol.score(s, a);
    }
    for (std::size_t s = 0; s < S; ++s) {
      const auto si = static_cast<Eigen::Index>(s);
      for (std::size_t a = 0; a < A; ++a) {
        const double w = d(si) * pi(si, static_cast<Eigen::Index>(a));
        if (w == 0.0) continue;
        double baseline = 0.0;
        for (std::size_t b = 0; b < m; ++b) {
          baseline += table.prob(n, s, b) * dq.q(si, static_cast<Eigen::Index>(codec.with_action(a, n, b)));
        }
        const double adv = dq.q(si, static_cast<Eigen::Index>(a)) - baseline;
        const auto& psi = scores[s * m + codec.action_of(a, n)];
        for (std::size_t j = 0; j < dim; ++j) grads[n][j] += w * psi[j] * adv;
      }
    }
  }
  return grads;
}

double decomposed_lagrangian(const Environment& env, std::span<const SoftmaxPolicy> policies,
                             std::span<const double> lambda_hat) {
  return decomposed_lagrangian(env, PolicyTable::from_softmax(env.shape(), policies), lambda_hat);
}

// ---------------------------------------------------------------------------
// Kemeny constant and perturbation bounds

KemenyResult kemeny_constant(const Eigen::MatrixXd& P) {
  const Eigen::VectorXd d = stationary_distribution(P);
  const Eigen::Index n = P.rows();
  KemenyResult out;
  out.mean_first_passage = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    // (I - P with column j removed) m_.j = 1, then m_jj = 0.
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - P;
    A.col(j).setZero();
    A.row(j).setZero();
    A(j, j) = 1.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
    rhs(j) = 0.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd m = lu.solve(rhs);
    m += lu.solve(rhs - A * m);
    out.mean_first_passage.col(j) = m;
  }
  const Eigen::VectorXd per_row = out.mean_first_passage * d;
  out.kappa = per_row.mean();
  out.spread = (per_row.array() - out.kappa).abs().maxCoeff();
  if (!std::isfinite(out.kappa) || out.spread > 1e-8 * std::max(1.0, std::abs(out.kappa))) {
    throw AnalysisError("Kemeny sum depends on the starting state (spread " + std::to_string(out.spread) +
                        "); the chain is too ill-conditioned");
  }
  return out;
}

double policy_distance(const PolicyTable& a, const PolicyTable& b) {
  const Eigen::MatrixXd diff = (a.joint_matrix() - b.joint_matrix()).cwiseAbs();
  return diff.rowwise().sum().maxCoeff();
}

double agent_policy_distance(const PolicyTable& a, const PolicyTable& b, std::size_t agent) {
  double best = 0.0;
  for (std::size_t s = 0; s < a.shape().num_states; ++s) {
    auto ra = a.agent_row(agent, s);
    auto rb = b.agent_row(agent, s);
    double total = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) total += std::abs(ra[i] - rb[i]);
    best = std::max(best, total);
  }
  return best;
}

PolicyGrid::PolicyGrid(GameShape shape, std::size_t resolution) : shape_(std::move(shape)), resolution_(resolution) {
  shape_.check();
  if (resolution_ < 2) throw InvalidArgument("policy grid resolution must be at least 2");
  const std::size_t steps = resolution_ - 1;
  choices_.resize(shape_.num_agents);
  for (std::size_t n = 0; n < shape_.num_agents; ++n) {
    const std::size_t m = shape_.actions_per_agent[n];
    // Every composition of `steps` into m non-negative parts, in lexicographic order.
    std::vector<std::size_t> parts(m, 0);
    auto emit = [&](auto&& self, std::size_t i, std::size_t left) -> void {
      if (i + 1 == m) {
        parts[i] = left;
        std::vector<double> row(m);
        for (std::size_t j = 0; j < m; ++j) row[j] = static_cast<double>(parts[j]) / static_cast<double>(steps);
        choices_[n].push_back(std::move(row));
        return;
      }
      for (std::size_t v = 0; v <= left; ++v) {
        parts[i] = v;
        self(self, i + 1, left - v);
      }
    };
    emit(emit, 0, steps);
  }
  for (std::size_t n = 0; n < shape_.num_agents; ++n) {
    for (std::size_t s = 0; s < shape_.num_states; ++s) {
      const std::size_t c = choices_[n].size();
      if (size_ > std::numeric_limits<std::size_t>::max() / c) {
        size_ = std::numeric_limits<std::size_t>::max();
        return;
      }
      size_ *= c;
    }
  }
}

double max_kemeny_over_grid(const Environment& env, std::size_t resolution, std::size_t max_policies) {
  PolicyGrid grid(env.shape(), resolution);
  if (grid.size() > max_policies) {
    throw BudgetError("policy grid has " + std::to_string(grid.size()) + " policies, above the limit of " +
                      std::to_string(max_policies));
  }
  double best = 0.0;
  grid.for_each([&](const PolicyTable& p) { best = std::max(best, kemeny_constant(induced_chain(env, p)).kappa); });
  return best;
}

BoundReport verify_distance_bounds(const Environment& env, const PolicyTable& pi, const PolicyTable& pi_prime,
                                   std::span<const double> lambda, std::span<const double> lambda_prime,
                                   std::optional<double> enumerated_kappa) {
  const std::size_t K = env.shape().num_constraints;
  if (lambda.size() != K || lambda_prime.size() != K) throw InvalidArgument("multipliers need K entries");
  BoundReport r;
  const Eigen::MatrixXd P = induced_chain(env, pi), Pp = induced_chain(env, pi_prime);
  r.kappa_star = std::max(kemeny_constant(P).kappa, kemeny_constant(Pp).kappa);
  r.kappa_proxy = !enumerated_kappa.has_value();
  if (enumerated_kappa) r.kappa_star = std::max(r.kappa_star, *enumerated_kappa);
  r.epsilon = policy_distance(pi, pi_prime);

  const ExactEval e = exact_values(env, pi, lambda);
  const ExactEval ep = exact_values(env, pi_prime, lambda_prime);
  r.state_l1 = (e.d - ep.d).cwiseAbs().sum();
  r.state_bound = r.kappa_star * r.epsilon;
  r.occupation_l1 = l1(e.occupation, ep.occupation);
  r.occupation_bound = (r.kappa_star + 1.0) * r.epsilon;
  r.lagrangian_diff = e.lagrangian - ep.lagrangian;
  double dl = 0.0, lp = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    dl += std::abs(lambda[k] - lambda_prime[k]);
    lp += std::abs(lambda_prime[k]);
  }
  r.lagrangian_bound = dl + (1.0 + static_cast<double>(K) * lp) * r.occupation_l1;
  return r;
}

// ---------------------------------------------------------------------------
// Simulation helpers

namespace {

std::size_t sample_joint(const PolicyTable& policy, const JointActionCodec& codec, std::size_t state, Rng& rng,
                         std::vector<std::size_t>& scratch) {
  for (std::size_t n = 0; n < scratch.size(); ++n) scratch[n] = sample_from_pmf(policy.agent_row(n, state), rng.uniform01());
  return codec.encode(scratch);
}

}  // namespace

std::vector<double> simulate_dual_critic(const Environment& env, const PolicyTable& policy, std::size_t steps,
                                         double p_alpha, std::uint64_t seed, std::size_t initial_state) {
  const GameShape& sh = env.shape();
  const std::size_t NK = sh.num_agents * sh.num_constraints;
  Rng rng(seed);
  std::vector<std::size_t> scratch(sh.num_agents);
  std::vector<double> g_hat(NK, 0.0);
  StageOutcome out;
  std::size_t s = initial_state;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t a = sample_joint(policy, env.codec(), s, rng, scratch);
    step(env, s, a, rng, out);
    const double alpha = 1.0 / std::pow(static_cast<double>(t + 1), p_alpha);
    for (std::size_t i = 0; i < NK; ++i) g_hat[i] += alpha * (out.constraints[i] - g_hat[i]);
    s = out.next_state;
  }
  return g_hat;
}

double simulate_average_cost(const Environment& env, const PolicyTable& policy, std::size_t steps, std::uint64_t seed,
                             std::size_t initial_state) {
  const GameShape& sh = env.shape();
  Rng rng(seed);
  std::vector<std::size_t> scratch(sh.num_agents);
  StageOutcome out;
  std::size_t s = initial_state;
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t a = sample_joint(policy, env.codec(), s, rng, scratch);
    step(env, s, a, rng, out);
    double c = 0.0;
    for (double v : out.costs) c += v;
    total += c / static_cast<double>(sh.num_agents);
    s = out.next_state;
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

}  // namespace cmarl
