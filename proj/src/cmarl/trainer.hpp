#pragma once

// Distributed primal-dual actor-critic training loop.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmarl/agent.hpp"
#include "cmarl/cmg.hpp"
#include "cmarl/function_approx.hpp"
#include "cmarl/network.hpp"
#include "cmarl/random.hpp"

namespace cmarl {

/// alpha_t = scale_alpha / (t + t0)^p_alpha, and likewise for beta and gamma.
struct StepSchedule {
  double p_alpha = 0.6;
  double p_beta = 0.75;
  double p_gamma = 0.9;
  double t0 = 1.0;
  double scale_alpha = 1.0;
  double scale_beta = 1.0;
  double scale_gamma = 1.0;

  /// Problems with the timescale ordering 0.5 < p_alpha < p_beta < p_gamma <= 1 and the
  /// positivity of t0 and the scales. Empty when valid.
  std::vector<std::string> violations() const;
  /// Throws ConfigError when `violations()` is non-empty.
  void check() const;
};

struct StepSizes {
  double alpha;
  double beta;
  double gamma;
};

StepSizes schedule_at(const StepSchedule& schedule, std::uint64_t t);

/// Componentwise clamp to [lo, hi]. Throws ConfigError when lo > hi anywhere.
std::vector<double> project_box(std::span<const double> x, std::span<const double> lo, std::span<const double> hi);

/// State at which the advantage's marginalizing policy is evaluated.
enum class AdvantageState { kCurrent, kNext };

const char* to_string(AdvantageState v);
AdvantageState advantage_state_from_string(const std::string& name);

/// Stop once the multiplier disagreement and the change of the mean multiplier between
/// iterations both stay below their thresholds for `window` consecutive iterations.
struct EarlyStopRule {
  double disagreement = 0.0;
  double drift = 0.0;
  std::uint64_t window = 1;
};

struct TrainConfig {
  FeatureSpec features;
  StepSchedule schedule;
  std::uint64_t seed = 0;
  std::uint64_t horizon = 200'000;
  /// One entry per constraint.
  std::vector<double> lambda_max;
  double theta_max = 50.0;
  std::uint64_t metrics_every = 100;
  std::size_t initial_state = 0;
  AdvantageState advantage_state = AdvantageState::kCurrent;
  std::optional<EarlyStopRule> early_stop;
  /// Order in which per-agent updates run inside a phase. Empty means 0..N-1. Results do
  /// not depend on it; it exists so that independence can be tested.
  std::vector<std::size_t> agent_order;
};

struct MetricsRecord {
  std::uint64_t step = 0;
  double objective = 0.0;           // running average of (1/N) sum_n c_n
  std::vector<double> g_gap;        // <G_hat> - b, length K
  std::vector<double> lambda_mean;  // <lambda_hat>, length K
  double lambda_disagreement = 0.0;
  double lambda_max_pairwise = 0.0;
  double critic_disagreement = 0.0;
  double critic_mean_norm = 0.0;    // ||<w>||
  StepSizes step_sizes{0.0, 0.0, 0.0};
  std::vector<double> lambdas;      // N x K, agent-major
};

/// Reported to the trace hook at each stage of an iteration, in execution order.
/// `agent` is npos for global stages. Gossip stages carry the stacked vectors before and
/// after mixing (`dim` entries per agent).
struct TraceEvent {
  std::string_view stage;
  std::size_t agent;
  std::span<const double> before;
  std::span<const double> after;
  std::size_t dim;
};

using TraceHook = std::function<void(const TraceEvent&)>;

/// Everything that changes during training; enough to resume bit-exactly.
struct TrainerSnapshot {
  std::uint64_t step = 0;
  std::size_t state = 0;
  std::vector<std::size_t> actions;
  double objective = 0.0;
  std::vector<std::vector<double>> theta, w, g_hat, lambda_hat;
  std::vector<double> avg_cost;
  std::string env_rng, mixing_rng;
  std::vector<std::string> agent_rng;
  std::uint64_t calm_iterations = 0;
  std::vector<double> previous_lambda_mean;
  bool stopped_early = false;
};

class Trainer {
 public:
  Trainer(std::shared_ptr<const Environment> env, MixingProcess mixing, TrainConfig config);

  /// Runs one iteration. Throws NumericalFault when any parameter becomes non-finite.
  void step();
  /// Iterates until the horizon or an early stop, passing a record to `sink` at step 0
  /// (fresh runs only), every `metrics_every` steps and at the last step.
  void run(const std::function<void(const MetricsRecord&)>& sink);

  MetricsRecord metrics() const;
  std::uint64_t step_count() const { return step_; }
  bool finished() const { return stopped_early_ || step_ >= config_.horizon; }
  bool stopped_early() const { return stopped_early_; }

  const TrainConfig& config() const { return config_; }
  const Environment& environment() const { return *env_; }
  const MixingProcess& mixing() const { return mixing_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  std::size_t current_state() const { return state_; }
  std::size_t current_joint() const { return joint_; }
  double objective_estimate() const { return objective_; }

  /// Flattened multipliers, N x K agent-major.
  std::vector<double> lambdas() const;

  TrainerSnapshot snapshot() const;
  /// Throws ConfigError when the snapshot does not match this trainer's shape.
  void restore(const TrainerSnapshot& snap);

  void set_trace(TraceHook hook) { trace_ = std::move(hook); }

 private:
  void emit(std::string_view stage, std::size_t agent = static_cast<std::size_t>(-1),
            std::span<const double> before = {}, std::span<const double> after = {}, std::size_t dim = 0) const;
  void check_finite() const;
  void update_early_stop();

  std::shared_ptr<const Environment> env_;
  MixingProcess mixing_;
  TrainConfig config_;
  std::vector<double> bounds_;
  std::vector<std::size_t> order_;

  std::vector<AgentState> agents_;
  std::shared_ptr<const FeatureTable> critic_features_;
  Rng env_rng_;
  Rng mixing_rng_;
  std::vector<Rng> agent_rng_;

  std::uint64_t step_ = 0;
  std::size_t state_ = 0;
  std::size_t joint_ = 0;
  std::vector<std::size_t> actions_;
  double objective_ = 0.0;
  std::uint64_t calm_iterations_ = 0;
  std::vector<double> previous_lambda_mean_;
  bool stopped_early_ = false;

  TraceHook trace_;
  StageOutcome outcome_;
};

/// Seeds of the independent random streams used by the trainer.
std::uint64_t env_stream_seed(std::uint64_t seed);
std::uint64_t mixing_stream_seed(std::uint64_t seed);
std::uint64_t agent_stream_seed(std::uint64_t seed, std::size_t agent);

}  // namespace cmarl
