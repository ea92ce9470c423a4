#include "cmarl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmarl/errors.hpp"

namespace cmarl {

constexpr std::size_t kGlobal = static_cast<std::size_t>(-1);

std::vector<std::string> StepSchedule::violations() const {
  std::vector<std::string> out;
  if (!(0.5 < p_alpha && p_alpha < p_beta && p_beta < p_gamma && p_gamma <= 1.0)) {
    out.push_back("step-size exponents must satisfy 0.5 < p_alpha < p_beta < p_gamma <= 1 (got " +
                  std::to_string(p_alpha) + ", " + std::to_string(p_beta) + ", " + std::to_string(p_gamma) + ")");
  }
  if (!(t0 > 0.0) || !std::isfinite(t0)) out.push_back("schedule offset t0 must be positive");
  if (!(scale_alpha > 0.0 && scale_beta > 0.0 && scale_gamma > 0.0) ||
      !std::isfinite(scale_alpha + scale_beta + scale_gamma)) {
    out.push_back("step-size scales must be positive and finite");
  }
  return out;
}

void StepSchedule::check() const {
  auto problems = violations();
  if (!problems.empty()) throw ConfigError(problems.front());
}

StepSizes schedule_at(const StepSchedule& s, std::uint64_t t) {
  const double base = static_cast<double>(t) + s.t0;
  return {s.scale_alpha / std::pow(base, s.p_alpha), s.scale_beta / std::pow(base, s.p_beta),
          s.scale_gamma / std::pow(base, s.p_gamma)};
}

std::vector<double> project_box(std::span<const double> x, std::span<const double> lo, std::span<const double> hi) {
  if (x.size() != lo.size() || x.size() != hi.size()) throw ConfigError("projection box dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (lo[i] > hi[i]) throw ConfigError("projection box has lo > hi at component " + std::to_string(i));
    out[i] = std::clamp(x[i], lo[i], hi[i]);
  }
  return out;
}

const char* to_string(AdvantageState v) { return v == AdvantageState::kCurrent ? "current" : "next"; }

AdvantageState advantage_state_from_string(const std::string& name) {
  if (name == "current") return AdvantageState::kCurrent;
  if (name == "next") return AdvantageState::kNext;
  throw ConfigError("advantage_state must be 'current' or 'next', got '" + name + "'");
}

std::uint64_t env_stream_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t mixing_stream_seed(std::uint64_t seed) { return derive_seed(seed, 2); }
std::uint64_t agent_stream_seed(std::uint64_t seed, std::size_t agent) { return derive_seed(seed, 16 + agent); }

// ---------------------------------------------------------------------------

Trainer::Trainer(std::shared_ptr<const Environment> env, MixingProcess mixing, TrainConfig config)
    : env_(std::move(env)),
      mixing_(std::move(mixing)),
      config_(std::move(config)),
      env_rng_(env_stream_seed(config_.seed)),
      mixing_rng_(mixing_stream_seed(config_.seed)) {
  const GameShape& sh = env_->shape();
  const std::size_t N = sh.num_agents, K = sh.num_constraints;
  config_.schedule.check();
  if (mixing_.base().num_agents() != N) {
    throw ConfigError("topology has " + std::to_string(mixing_.base().num_agents()) + " agents, the game has " +
                      std::to_string(N));
  }
  if (config_.lambda_max.size() != K) {
    throw ConfigError("lambda_max has " + std::to_string(config_.lambda_max.size()) + " entries for " +
                      std::to_string(K) + " constraints");
  }
  for (double m : config_.lambda_max) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("lambda_max entries must be positive and finite");
  }
  if (!(config_.theta_max > 0.0)) throw ConfigError("theta_max must be positive");
  if (config_.metrics_every == 0) throw ConfigError("metrics_every must be at least 1");
  if (config_.initial_state >= sh.num_states) throw ConfigError("initial_state is outside the state space");
  if (config_.features.critic_dim == 0 || config_.features.policy_dim == 0) {
    throw ConfigError("feature dimensions must be positive");
  }
  if (config_.early_stop) {
    const auto& r = *config_.early_stop;
    if (!(r.disagreement > 0.0) || !(r.drift > 0.0) || r.window == 0) {
      throw ConfigError("early_stop needs positive thresholds and a window of at least 1");
    }
  }
  if (config_.agent_order.empty()) {
    order_.resize(N);
    std::iota(order_.begin(), order_.end(), 0);
  } else {
    order_ = config_.agent_order;
    auto sorted = order_;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> ident(N);
    std::iota(ident.begin(), ident.end(), 0);
    if (sorted != ident) throw ConfigError("agent_order must be a permutation of the agents");
  }

  auto b = env_->bounds();
  bounds_.assign(b.begin(), b.end());
  critic_features_ = std::make_shared<const FeatureTable>(make_critic_features(config_.features, sh.num_pairs()));

  state_ = config_.initial_state;
  actions_.resize(N);
  agents_.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    auto pf = std::make_shared<const FeatureTable>(
        make_policy_features(config_.features, n, sh.num_states, sh.actions_per_agent[n]));
    agents_.push_back(AgentState{
        SoftmaxPolicy(pf, sh.actions_per_agent[n], std::vector<double>(config_.features.policy_dim, 0.0),
                      config_.theta_max),
        LinearCritic(critic_features_, sh.num_joint_actions(), std::vector<double>(config_.features.critic_dim, 0.0)),
        0.0, std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)});
    agent_rng_.emplace_back(agent_stream_seed(config_.seed, n));
  }
  for (std::size_t n : order_) actions_[n] = agents_[n].policy.sample(state_, agent_rng_[n]);
  joint_ = env_->codec().encode(actions_);
  previous_lambda_mean_.assign(K, 0.0);
}

void Trainer::emit(std::string_view stage, std::size_t agent, std::span<const double> before,
                   std::span<const double> after, std::size_t dim) const {
  if (trace_) trace_(TraceEvent{stage, agent, before, after, dim});
}

void Trainer::step() {
  if (stopped_early_) return;
  const GameShape& sh = env_->shape();
  const std::size_t N = sh.num_agents, K = sh.num_constraints;
  const std::size_t wdim = config_.features.critic_dim;
  const StepSizes sz = schedule_at(config_.schedule, step_);

  emit("draw_mixing");
  const MixingMatrix& C = mixing_.draw(mixing_rng_);

  emit("observe");
  cmarl::step(*env_, state_, joint_, env_rng_, outcome_);
  const std::size_t next_state = outcome_.next_state;

  // Phase 1a: local Lagrangian cost, running average, next action.
  std::vector<double> l(N), previous_avg(N);
  std::vector<std::size_t> next_actions(N);
  for (std::size_t n : order_) {
    AgentState& ag = agents_[n];
    std::span<const double> g(outcome_.constraints.data() + n * K, K);
    l[n] = local_lagrangian_cost(outcome_.costs[n], g, ag.lambda_hat, bounds_);
    emit("lagrangian_cost", n);
    previous_avg[n] = ag.avg_cost;
    ag.avg_cost = ag.avg_cost + sz.alpha * (l[n] - ag.avg_cost);
    emit("avg_cost", n);
    next_actions[n] = ag.policy.sample(next_state, agent_rng_[n]);
    emit("select_action", n);
  }
  const std::size_t next_joint = env_->codec().encode(next_actions);

  std::vector<double> phi_cur(wdim), phi_next(wdim);
  critic_features_->row(state_ * sh.num_joint_actions() + joint_, phi_cur);
  critic_features_->row(next_state * sh.num_joint_actions() + next_joint, phi_next);

  // Phase 1b: TD step, dual critic, actor.
  std::vector<double> w_tilde(N * wdim);
  std::vector<std::vector<double>> g_prev(N);
  const std::size_t policy_state = config_.advantage_state == AdvantageState::kCurrent ? state_ : next_state;
  for (std::size_t n : order_) {
    AgentState& ag = agents_[n];
    const CriticStep cs = critic_update(ag.critic.weights(), previous_avg[n], l[n], phi_cur, phi_next, sz.alpha);
    emit("td_error", n);
    std::copy(cs.w_tilde.begin(), cs.w_tilde.end(), w_tilde.begin() + static_cast<std::ptrdiff_t>(n * wdim));
    emit("critic_step", n);
    std::span<const double> g(outcome_.constraints.data() + n * K, K);
    g_prev[n] = ag.g_hat;
    ag.g_hat = dual_critic_update(ag.g_hat, g, sz.alpha);
    emit("dual_critic", n);
    ActorStep as = actor_update(ag.critic, ag.policy, env_->codec(), n, state_, joint_, sz.beta, policy_state);
    ag.policy.mutable_theta() = std::move(as.theta);
    emit("actor", n);
  }

  // Gossip barriers.
  std::vector<double> w_mixed(N * wdim);
  C.mix(w_tilde, wdim, w_mixed);
  for (std::size_t n = 0; n < N; ++n) {
    auto& w = agents_[n].critic.mutable_weights();
    std::copy_n(w_mixed.begin() + static_cast<std::ptrdiff_t>(n * wdim), wdim, w.begin());
  }
  emit("gossip_critic", kGlobal, w_tilde, w_mixed, wdim);

  const std::vector<double> lambda_before = lambdas();
  std::vector<double> lambda_mixed(N * K);
  C.mix(lambda_before, K, lambda_mixed);
  emit("gossip_lambda", kGlobal, lambda_before, lambda_mixed, K);

  // Phase 2: multiplier step with the pre-update constraint estimates.
  for (std::size_t n : order_) {
    std::span<const double> mixed(lambda_mixed.data() + n * K, K);
    agents_[n].lambda_hat = dual_update(mixed, g_prev[n], sz.gamma, bounds_, config_.lambda_max);
    emit("multiplier", n);
  }

  double mean_cost = 0.0;
  for (double c : outcome_.costs) mean_cost += c;
  mean_cost /= static_cast<double>(N);
  objective_ += sz.alpha * (mean_cost - objective_);

  state_ = next_state;
  joint_ = next_joint;
  actions_ = std::move(next_actions);
  ++step_;
  check_finite();
  update_early_stop();
}

void Trainer::check_finite() const {
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (std::size_t n = 0; n < agents_.size(); ++n) {
    const AgentState& ag = agents_[n];
    const char* what = nullptr;
    if (!finite(ag.theta())) what = "policy parameters";
    else if (!finite(ag.w())) what = "critic weights";
    else if (!std::isfinite(ag.avg_cost)) what = "Lagrangian cost average";
    else if (!finite(ag.g_hat)) what = "constraint estimates";
    else if (!finite(ag.lambda_hat)) what = "multipliers";
    if (what) throw NumericalFault(std::string("non-finite ") + what + " of agent " + std::to_string(n), step_);
  }
  if (!std::isfinite(objective_)) throw NumericalFault("non-finite objective estimate", step_);
}

void Trainer::update_early_stop() {
  if (!config_.early_stop) return;
  const std::size_t K = env_->shape().num_constraints;
  const auto stats = consensus_stats(lambdas(), K);
  double drift_sq = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double d = stats.mean[k] - previous_lambda_mean_[k];
    drift_sq += d * d;
  }
  previous_lambda_mean_ = stats.mean;
  const auto& rule = *config_.early_stop;
  if (stats.disagreement < rule.disagreement && std::sqrt(drift_sq) < rule.drift) {
    ++calm_iterations_;
  } else {
    calm_iterations_ = 0;
  }
  if (calm_iterations_ >= rule.window) stopped_early_ = true;
}

void Trainer::run(const std::function<void(const MetricsRecord&)>& sink) {
  if (step_ == 0 && sink) sink(metrics());
  while (!finished()) {
    step();
    if (sink && (step_ % config_.metrics_every == 0 || finished())) sink(metrics());
  }
}

std::vector<double> Trainer::lambdas() const {
  const std::size_t K = env_->shape().num_constraints;
  std::vector<double> out;
  out.reserve(agents_.size() * K);
  for (const auto& ag : agents_) out.insert(out.end(), ag.lambda_hat.begin(), ag.lambda_hat.end());
  return out;
}

MetricsRecord Trainer::metrics() const {
  const GameShape& sh = env_->shape();
  const std::size_t N = sh.num_agents, K = sh.num_constraints;
  const std::size_t wdim = config_.features.critic_dim;
  MetricsRecord r;
  r.step = step_;
  r.objective = objective_;
  r.lambdas = lambdas();
  const auto ls = consensus_stats(r.lambdas, K);
  r.lambda_mean = ls.mean;
  r.lambda_disagreement = ls.disagreement;
  r.lambda_max_pairwise = max_pairwise_distance(r.lambdas, K);
  r.g_gap.assign(K, 0.0);
  for (const auto& ag : agents_) {
    for (std::size_t k = 0; k < K; ++k) r.g_gap[k] += ag.g_hat[k];
  }
  for (std::size_t k = 0; k < K; ++k) r.g_gap[k] = r.g_gap[k] / static_cast<double>(N) - bounds_[k];
  std::vector<double> ws;
  ws.reserve(N * wdim);
  for (const auto& ag : agents_) ws.insert(ws.end(), ag.w().begin(), ag.w().end());
  const auto wstats = consensus_stats(ws, wdim);
  r.critic_disagreement = wstats.disagreement;
  double sq = 0.0;
  for (double v : wstats.mean) sq += v * v;
  r.critic_mean_norm = std::sqrt(sq);
  r.step_sizes = schedule_at(config_.schedule, step_ == 0 ? 0 : step_ - 1);
  return r;
}

TrainerSnapshot Trainer::snapshot() const {
  TrainerSnapshot s;
  s.step = step_;
  s.state = state_;
  s.actions = actions_;
  s.objective = objective_;
  for (const auto& ag : agents_) {
    s.theta.emplace_back(ag.theta().begin(), ag.theta().end());
    s.w.emplace_back(ag.w().begin(), ag.w().end());
    s.avg_cost.push_back(ag.avg_cost);
    s.g_hat.push_back(ag.g_hat);
    s.lambda_hat.push_back(ag.lambda_hat);
  }
  s.env_rng = env_rng_.save_state();
  s.mixing_rng = mixing_rng_.save_state();
  for (const auto& r : agent_rng_) s.agent_rng.push_back(r.save_state());
  s.calm_iterations = calm_iterations_;
  s.previous_lambda_mean = previous_lambda_mean_;
  s.stopped_early = stopped_early_;
  return s;
}

void Trainer::restore(const TrainerSnapshot& s) {
  const GameShape& sh = env_->shape();
  const std::size_t N = sh.num_agents, K = sh.num_constraints;
  auto fail = [](const std::string& what) { throw ConfigError("checkpoint does not match the run: " + what); };
  if (s.theta.size() != N || s.w.size() != N || s.avg_cost.size() != N || s.g_hat.size() != N ||
      s.lambda_hat.size() != N || s.agent_rng.size() != N || s.actions.size() != N) {
    fail("agent count");
  }
  if (s.state >= sh.num_states) fail("state index");
  for (std::size_t n = 0; n < N; ++n) {
    if (s.theta[n].size() != config_.features.policy_dim) fail("policy dimension");
    if (s.w[n].size() != config_.features.critic_dim) fail("critic dimension");
    if (s.g_hat[n].size() != K || s.lambda_hat[n].size() != K) fail("constraint count");
    if (s.actions[n] >= sh.actions_per_agent[n]) fail("action index");
  }
  if (s.previous_lambda_mean.size() != K) fail("constraint count");
  step_ = s.step;
  state_ = s.state;
  actions_ = s.actions;
  joint_ = env_->codec().encode(actions_);
  objective_ = s.objective;
  for (std::size_t n = 0; n < N; ++n) {
    agents_[n].policy.mutable_theta() = s.theta[n];
    agents_[n].critic.mutable_weights() = s.w[n];
    agents_[n].avg_cost = s.avg_cost[n];
    agents_[n].g_hat = s.g_hat[n];
    agents_[n].lambda_hat = s.lambda_hat[n];
    agent_rng_[n].restore_state(s.agent_rng[n]);
  }
  env_rng_.restore_state(s.env_rng);
  mixing_rng_.restore_state(s.mixing_rng);
  calm_iterations_ = s.calm_iterations;
  previous_lambda_mean_ = s.previous_lambda_mean;
  stopped_early_ = s.stopped_early;
}

}  // namespace cmarl
