#include "cmarl/cmg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cmarl/errors.hpp"

namespace cmarl {

std::size_t GameShape::num_joint_actions() const {
  std::size_t total = 1;
  for (auto n : actions_per_agent) total *= n;
  return total;
}

void GameShape::check() const {
  if (num_agents == 0) throw InvalidArgument("game needs at least one agent");
  if (num_states == 0) throw InvalidArgument("game needs at least one state");
  if (actions_per_agent.size() != num_agents) {
    throw InvalidArgument("actions_per_agent has " + std::to_string(actions_per_agent.size()) +
                          " entries for " + std::to_string(num_agents) + " agents");
  }
  for (std::size_t n = 0; n < num_agents; ++n) {
    if (actions_per_agent[n] == 0) {
      throw InvalidArgument("agent " + std::to_string(n) + " has an empty action set");
    }
  }
}

JointActionCodec::JointActionCodec(std::vector<std::size_t> radices) : radices_(std::move(radices)) {
  strides_.assign(radices_.size(), 1);
  total_ = 1;
  for (std::size_t i = radices_.size(); i-- > 0;) {
    strides_[i] = total_;
    total_ *= radices_[i];
  }
}

std::size_t JointActionCodec::encode(std::span<const std::size_t> action) const {
  if (action.size() != radices_.size()) {
    throw IndexError("joint action has " + std::to_string(action.size()) + " components, expected " +
                     std::to_string(radices_.size()));
  }
  std::size_t index = 0;
  for (std::size_t n = 0; n < radices_.size(); ++n) {
    if (action[n] >= radices_[n]) {
      throw IndexError("action " + std::to_string(action[n]) + " of agent " + std::to_string(n) +
                       " out of range [0, " + std::to_string(radices_[n]) + ")");
    }
    index += action[n] * strides_[n];
  }
  return index;
}

void JointActionCodec::decode(std::size_t index, std::span<std::size_t> out) const {
  if (index >= total_) throw IndexError("joint action index " + std::to_string(index) + " out of range");
  for (std::size_t n = 0; n < radices_.size(); ++n) {
    out[n] = index / strides_[n];
    index %= strides_[n];
  }
}

JointAction JointActionCodec::decode(std::size_t index) const {
  JointAction out(radices_.size());
  decode(index, out);
  return out;
}

std::size_t JointActionCodec::action_of(std::size_t joint, std::size_t agent) const {
  return (joint / strides_[agent]) % radices_[agent];
}

std::size_t JointActionCodec::with_action(std::size_t joint, std::size_t agent, std::size_t own_action) const {
  const std::size_t current = action_of(joint, agent);
  return joint - current * strides_[agent] + own_action * strides_[agent];
}

void Environment::stage_means(std::size_t state, std::size_t joint, std::span<double> costs,
                              std::span<double> constraints) const {
  const auto& sh = shape();
  for (std::size_t n = 0; n < sh.num_agents; ++n) {
    costs[n] = cost(n, state, joint);
    for (std::size_t k = 0; k < sh.num_constraints; ++k) {
      constraints[n * sh.num_constraints + k] = constraint_cost(n, k, state, joint);
    }
  }
}

// ---------------------------------------------------------------------------
// TabularCMG

TabularCMG::TabularCMG(GameShape shape, std::vector<double> transition, std::vector<double> cost,
                       std::vector<double> constraint_cost, std::vector<double> bounds, double cost_noise)
    : shape_(std::move(shape)),
      transition_(std::move(transition)),
      cost_(std::move(cost)),
      constraint_cost_(std::move(constraint_cost)),
      bounds_(std::move(bounds)),
      cost_noise_(cost_noise) {
  shape_.check();
  set_codec(shape_);
  const std::size_t pairs = shape_.num_pairs();
  auto expect = [](const char* what, std::size_t got, std::size_t want) {
    if (got != want) {
      throw InvalidArgument(std::string(what) + " table has " + std::to_string(got) + " entries, expected " +
                            std::to_string(want));
    }
  };
  expect("transition", transition_.size(), pairs * shape_.num_states);
  expect("cost", cost_.size(), shape_.num_agents * pairs);
  expect("constraint_cost", constraint_cost_.size(), shape_.num_agents * shape_.num_constraints * pairs);
  expect("bounds", bounds_.size(), shape_.num_constraints);
  if (!(cost_noise_ >= 0.0) || !std::isfinite(cost_noise_)) {
    throw InvalidArgument("cost_noise must be finite and >= 0");
  }
}

TabularCMG TabularCMG::materialize(const Environment& env, std::size_t cell_budget) {
  const GameShape& sh = env.shape();
  const std::size_t pairs = sh.num_pairs();
  const std::size_t cells = pairs * sh.num_states;
  if (cells > cell_budget) {
    std::ostringstream msg;
    msg << "transition table needs " << cells << " cells (" << sh.num_states << " states x "
        << sh.num_joint_actions() << " joint actions x " << sh.num_states
        << " next states), above the cell budget of " << cell_budget
        << "; use lazy mode or raise the budget";
    throw BudgetError(msg.str());
  }
  const std::size_t num_joint = sh.num_joint_actions();
  const std::size_t K = sh.num_constraints;
  std::vector<double> transition(cells);
  std::vector<double> cost(sh.num_agents * pairs);
  std::vector<double> constraint(sh.num_agents * K * pairs);
  std::vector<double> c(sh.num_agents), g(sh.num_agents * K);
  for (std::size_t s = 0; s < sh.num_states; ++s) {
    for (std::size_t a = 0; a < num_joint; ++a) {
      const std::size_t pair = s * num_joint + a;
      env.transition_row(s, a, std::span<double>(transition).subspan(pair * sh.num_states, sh.num_states));
      env.stage_means(s, a, c, g);
      for (std::size_t n = 0; n < sh.num_agents; ++n) {
        cost[n * pairs + pair] = c[n];
        for (std::size_t k = 0; k < K; ++k) constraint[(n * K + k) * pairs + pair] = g[n * K + k];
      }
    }
  }
  auto b = env.bounds();
  return TabularCMG(sh, std::move(transition), std::move(cost), std::move(constraint),
                    std::vector<double>(b.begin(), b.end()), env.cost_noise());
}

std::span<const double> TabularCMG::row(std::size_t state, std::size_t joint) const {
  const std::size_t pair = state * codec().size() + joint;
  return std::span<const double>(transition_).subspan(pair * shape_.num_states, shape_.num_states);
}

void TabularCMG::transition_row(std::size_t state, std::size_t joint, std::span<double> out) const {
  auto r = row(state, joint);
  std::copy(r.begin(), r.end(), out.begin());
}

double TabularCMG::cost(std::size_t agent, std::size_t state, std::size_t joint) const {
  return cost_[(agent * shape_.num_states + state) * codec().size() + joint];
}

double TabularCMG::constraint_cost(std::size_t agent, std::size_t k, std::size_t state,
                                   std::size_t joint) const {
  return constraint_cost_[((agent * shape_.num_constraints + k) * shape_.num_states + state) * codec().size() +
                          joint];
}

// ---------------------------------------------------------------------------
// AffineCostEnvironment

namespace {
double safe_scale(double lo, double hi) { return hi > lo ? 1.0 / (hi - lo) : 1.0; }
}  // namespace

AffineCostEnvironment::AffineCostEnvironment(std::shared_ptr<const Environment> inner, double cost_lo,
                                             double cost_hi, std::vector<double> constraint_lo,
                                             std::vector<double> constraint_hi)
    : inner_(std::move(inner)), cost_lo_(cost_lo), cost_scale_(safe_scale(cost_lo, cost_hi)) {
  const std::size_t K = inner_->shape().num_constraints;
  if (constraint_lo.size() != K || constraint_hi.size() != K) {
    throw InvalidArgument("constraint range vectors must have one entry per constraint");
  }
  set_codec(inner_->shape());
  constraint_lo_ = constraint_lo;
  constraint_scale_.resize(K);
  bounds_.resize(K);
  auto b = inner_->bounds();
  for (std::size_t k = 0; k < K; ++k) {
    constraint_scale_[k] = safe_scale(constraint_lo[k], constraint_hi[k]);
    bounds_[k] = (b[k] - constraint_lo_[k]) * constraint_scale_[k];
  }
}

double AffineCostEnvironment::cost_noise() const { return inner_->cost_noise() * cost_scale_; }

double AffineCostEnvironment::cost(std::size_t agent, std::size_t state, std::size_t joint) const {
  return (inner_->cost(agent, state, joint) - cost_lo_) * cost_scale_;
}

double AffineCostEnvironment::constraint_cost(std::size_t agent, std::size_t k, std::size_t state,
                                              std::size_t joint) const {
  return (inner_->constraint_cost(agent, k, state, joint) - constraint_lo_[k]) * constraint_scale_[k];
}

std::shared_ptr<const Environment> normalize_costs(std::shared_ptr<const Environment> env) {
  const GameShape& sh = env->shape();
  const std::size_t K = sh.num_constraints;
  const std::size_t num_joint = sh.num_joint_actions();
  double c_lo = std::numeric_limits<double>::infinity(), c_hi = -c_lo;
  std::vector<double> g_lo(K, c_lo), g_hi(K, c_hi);
  std::vector<double> c(sh.num_agents), g(sh.num_agents * K);
  for (std::size_t s = 0; s < sh.num_states; ++s) {
    for (std::size_t a = 0; a < num_joint; ++a) {
      env->stage_means(s, a, c, g);
      for (std::size_t n = 0; n < sh.num_agents; ++n) {
        c_lo = std::min(c_lo, c[n]);
        c_hi = std::max(c_hi, c[n]);
        for (std::size_t k = 0; k < K; ++k) {
          g_lo[k] = std::min(g_lo[k], g[n * K + k]);
          g_hi[k] = std::max(g_hi[k], g[n * K + k]);
        }
      }
    }
  }
  return std::make_shared<AffineCostEnvironment>(std::move(env), c_lo, c_hi, std::move(g_lo), std::move(g_hi));
}

// ---------------------------------------------------------------------------
// Validation

const char* to_string(ValidationIssue::Kind kind) {
  switch (kind) {
    case ValidationIssue::Kind::kShape: return "shape";
    case ValidationIssue::Kind::kRowSum: return "row_sum";
    case ValidationIssue::Kind::kNegativeProbability: return "negative_probability";
    case ValidationIssue::Kind::kNonFinite: return "non_finite";
    case ValidationIssue::Kind::kReducible: return "reducible";
  }
  return "unknown";
}

bool ValidationReport::ok() const {
  return std::none_of(issues.begin(), issues.end(), [](const auto& i) { return i.fatal; });
}

bool ValidationReport::has(ValidationIssue::Kind kind) const { return count(kind) > 0; }

std::size_t ValidationReport::count(ValidationIssue::Kind kind) const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(), [kind](const auto& i) { return i.kind == kind; }));
}

namespace {

// Forward reachability from `start` over adjacency lists.
std::vector<char> reachable(const std::vector<std::vector<std::size_t>>& adj, std::size_t start) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

std::string list_states(const std::vector<char>& mask, bool value) {
  std::string out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (static_cast<bool>(mask[i]) == value) {
      if (!out.empty()) out += ",";
      out += std::to_string(i);
    }
  }
  return out;
}

}  // namespace

ValidationReport validate(const Environment& env, std::size_t max_reported) {
  ValidationReport report;
  const GameShape& sh = env.shape();
  try {
    sh.check();
  } catch (const Error& e) {
    report.issues.push_back({ValidationIssue::Kind::kShape, true, e.what(), std::nullopt, std::nullopt});
    return report;
  }
  if (env.bounds().size() != sh.num_constraints) {
    report.issues.push_back({ValidationIssue::Kind::kShape, true, "bound vector length differs from K",
                             std::nullopt, std::nullopt});
  }
  const std::size_t S = sh.num_states;
  const std::size_t num_joint = sh.num_joint_actions();
  const std::size_t K = sh.num_constraints;

  std::size_t row_sum_count = 0, negative_count = 0, nonfinite_count = 0;
  auto note = [&](std::size_t& counter, ValidationIssue issue) {
    if (counter++ < max_reported) report.issues.push_back(std::move(issue));
  };

  std::vector<std::vector<char>> edge(S, std::vector<char>(S, 0));
  std::vector<double> row(S), c(sh.num_agents), g(sh.num_agents * K);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < num_joint; ++a) {
      env.transition_row(s, a, row);
      double sum = 0.0;
      bool finite = true;
      for (std::size_t sp = 0; sp < S; ++sp) {
        const double p = row[sp];
        if (!std::isfinite(p)) {
          finite = false;
          continue;
        }
        if (p < 0.0) {
          std::ostringstream msg;
          msg << "P(" << sp << "|s=" << s << ",a=" << a << ") = " << p << " is negative";
          note(negative_count, {ValidationIssue::Kind::kNegativeProbability, true, msg.str(), s, a});
        } else if (p > 0.0) {
          edge[s][sp] = 1;
        }
        sum += p;
      }
      if (!finite) {
        note(nonfinite_count, {ValidationIssue::Kind::kNonFinite, true,
                               "non-finite transition probability at (s=" + std::to_string(s) +
                                   ", a=" + std::to_string(a) + ")",
                               s, a});
      } else if (std::abs(sum - 1.0) > kRowSumTolerance) {
        std::ostringstream msg;
        msg.precision(12);
        msg << "transition row (s=" << s << ", a=" << a << ") sums to " << sum;
        note(row_sum_count, {ValidationIssue::Kind::kRowSum, true, msg.str(), s, a});
      }
      env.stage_means(s, a, c, g);
      bool costs_finite = std::all_of(c.begin(), c.end(), [](double v) { return std::isfinite(v); }) &&
                          std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); });
      if (!costs_finite) {
        note(nonfinite_count, {ValidationIssue::Kind::kNonFinite, true,
                               "non-finite cost at (s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")",
                               s, a});
      }
    }
  }
  auto summarize = [&](std::size_t counter, ValidationIssue::Kind kind) {
    if (counter > max_reported) {
      report.issues.push_back({kind, true,
                               std::to_string(counter - max_reported) + " further " + to_string(kind) +
                                   " issues not itemized",
                               std::nullopt, std::nullopt});
    }
  };
  summarize(row_sum_count, ValidationIssue::Kind::kRowSum);
  summarize(negative_count, ValidationIssue::Kind::kNegativeProbability);
  summarize(nonfinite_count, ValidationIssue::Kind::kNonFinite);

  // Strong connectivity of the support graph under the uniform policy: an edge s -> s'
  // exists iff some joint action moves s to s' with positive probability.
  std::vector<std::vector<std::size_t>> fwd(S), bwd(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t sp = 0; sp < S; ++sp) {
      if (edge[s][sp]) {
        fwd[s].push_back(sp);
        bwd[sp].push_back(s);
      }
    }
  }
  auto from0 = reachable(fwd, 0);
  auto to0 = reachable(bwd, 0);
  const bool all_from = std::all_of(from0.begin(), from0.end(), [](char v) { return v; });
  const bool all_to = std::all_of(to0.begin(), to0.end(), [](char v) { return v; });
  if (!all_from || !all_to) {
    std::string msg = "state graph under the uniform policy is not strongly connected (ergodicity not satisfied)";
    if (!all_from) msg += "; unreachable from state 0: {" + list_states(from0, false) + "}";
    if (!all_to) msg += "; cannot return to state 0 from: {" + list_states(to0, false) + "}";
    report.issues.push_back({ValidationIssue::Kind::kReducible, false, msg, std::nullopt, std::nullopt});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sampling

void check_indices(const Environment& env, std::size_t state, std::span<const std::size_t> action) {
  if (state >= env.shape().num_states) {
    throw IndexError("state " + std::to_string(state) + " out of range [0, " +
                     std::to_string(env.shape().num_states) + ")");
  }
  (void)env.codec().encode(action);
}

std::size_t sample_transition(const Environment& env, std::size_t state, std::size_t joint, Rng& rng) {
  const std::size_t S = env.shape().num_states;
  if (state >= S) throw IndexError("state " + std::to_string(state) + " out of range");
  if (joint >= env.codec().size()) throw IndexError("joint action " + std::to_string(joint) + " out of range");
  constexpr std::size_t kStackStates = 64;
  double stack_row[kStackStates];
  std::vector<double> heap_row;
  std::span<double> row;
  if (S <= kStackStates) {
    row = std::span<double>(stack_row, S);
  } else {
    heap_row.resize(S);
    row = heap_row;
  }
  env.transition_row(state, joint, row);
  return sample_from_pmf(row, rng.uniform01());
}

std::size_t sample_transition(const Environment& env, std::size_t state, std::span<const std::size_t> action,
                              Rng& rng) {
  check_indices(env, state, action);
  return sample_transition(env, state, env.codec().encode(action), rng);
}

void immediate_costs(const Environment& env, std::size_t state, std::size_t joint, Rng& rng, StageOutcome& out) {
  const GameShape& sh = env.shape();
  const std::size_t K = sh.num_constraints;
  out.costs.resize(sh.num_agents);
  out.constraints.resize(sh.num_agents * K);
  env.stage_means(state, joint, out.costs, out.constraints);
  const double amp = env.cost_noise();
  if (amp > 0.0) {
    for (std::size_t n = 0; n < sh.num_agents; ++n) {
      out.costs[n] += rng.uniform(-amp, amp);
      for (std::size_t k = 0; k < K; ++k) out.constraints[n * K + k] += rng.uniform(-amp, amp);
    }
  }
}

StageOutcome immediate_costs(const Environment& env, std::size_t state, std::span<const std::size_t> action,
                             Rng& rng) {
  check_indices(env, state, action);
  StageOutcome out;
  immediate_costs(env, state, env.codec().encode(action), rng, out);
  return out;
}

void step(const Environment& env, std::size_t state, std::size_t joint, Rng& rng, StageOutcome& out) {
  out.next_state = sample_transition(env, state, joint, rng);
  immediate_costs(env, state, joint, rng, out);
}

}  // namespace cmarl
