#pragma once

// Constrained Markov game data model: shapes, joint-action encoding, the environment
// interface shared by lazy and tabular games, and the sampling primitives.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmarl/random.hpp"

namespace cmarl {

using JointAction = std::vector<std::size_t>;

struct GameShape {
  std::size_t num_agents = 0;
  std::size_t num_states = 0;
  std::size_t num_constraints = 0;
  std::vector<std::size_t> actions_per_agent;

  std::size_t num_joint_actions() const;
  std::size_t num_pairs() const { return num_states * num_joint_actions(); }
  /// Throws InvalidArgument when any dimension is zero or the agent list is inconsistent.
  void check() const;
};

/// Mixed-radix encoding of joint actions. Agent 0 is the most significant digit.
class JointActionCodec {
 public:
  JointActionCodec() = default;
  explicit JointActionCodec(std::vector<std::size_t> radices);

  std::size_t size() const { return total_; }
  std::size_t num_agents() const { return radices_.size(); }
  std::size_t radix(std::size_t agent) const { return radices_[agent]; }
  /// Change in the flat index when agent's action increases by one.
  std::size_t stride(std::size_t agent) const { return strides_[agent]; }

  std::size_t encode(std::span<const std::size_t> action) const;
  void decode(std::size_t index, std::span<std::size_t> out) const;
  JointAction decode(std::size_t index) const;
  /// Flat index of `joint` with agent's component replaced by `own_action`.
  std::size_t with_action(std::size_t joint, std::size_t agent, std::size_t own_action) const;
  std::size_t action_of(std::size_t joint, std::size_t agent) const;

 private:
  std::vector<std::size_t> radices_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
};

/// A constrained Markov game as seen by the learner and the oracle.
///
/// Implementations are immutable after construction and safe for concurrent reads.
/// Costs returned here are conditional means; noise is added by `immediate_costs`.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const GameShape& shape() const = 0;
  virtual std::span<const double> bounds() const = 0;
  virtual double cost_noise() const = 0;

  /// Writes P(.|s, joint) into `out` (length num_states).
  virtual void transition_row(std::size_t state, std::size_t joint, std::span<double> out) const = 0;
  virtual double cost(std::size_t agent, std::size_t state, std::size_t joint) const = 0;
  virtual double constraint_cost(std::size_t agent, std::size_t k, std::size_t state,
                                 std::size_t joint) const = 0;

  /// All agents' mean costs (length N) and constraint costs (N*K, agent-major).
  virtual void stage_means(std::size_t state, std::size_t joint, std::span<double> costs,
                           std::span<double> constraints) const;

  const JointActionCodec& codec() const { return codec_; }

 protected:
  void set_codec(const GameShape& shape) { codec_ = JointActionCodec(shape.actions_per_agent); }

 private:
  JointActionCodec codec_;
};

/// Fully materialized game. Storage layouts:
///   transition[(s * |A| + a) * |S| + s'],
///   cost[(n * |S| + s) * |A| + a],
///   constraint_cost[((n * K + k) * |S| + s) * |A| + a].
class TabularCMG final : public Environment {
 public:
  TabularCMG(GameShape shape, std::vector<double> transition, std::vector<double> cost,
             std::vector<double> constraint_cost, std::vector<double> bounds, double cost_noise = 0.0);

  /// Copies any environment into tables. Refuses when |S| * |A| * |S| exceeds `cell_budget`.
  static TabularCMG materialize(const Environment& env, std::size_t cell_budget);

  const GameShape& shape() const override { return shape_; }
  std::span<const double> bounds() const override { return bounds_; }
  double cost_noise() const override { return cost_noise_; }
  void transition_row(std::size_t state, std::size_t joint, std::span<double> out) const override;
  double cost(std::size_t agent, std::size_t state, std::size_t joint) const override;
  double constraint_cost(std::size_t agent, std::size_t k, std::size_t state,
                         std::size_t joint) const override;

  std::span<const double> row(std::size_t state, std::size_t joint) const;
  const std::vector<double>& transition_table() const { return transition_; }
  const std::vector<double>& cost_table() const { return cost_; }
  const std::vector<double>& constraint_table() const { return constraint_cost_; }

 private:
  GameShape shape_;
  std::vector<double> transition_;
  std::vector<double> cost_;
  std::vector<double> constraint_cost_;
  std::vector<double> bounds_;
  double cost_noise_;
};

/// Wraps an environment with an affine map of its costs onto [0, 1]. Constraint bounds are
/// mapped with the same transform so feasibility is unchanged.
class AffineCostEnvironment final : public Environment {
 public:
  AffineCostEnvironment(std::shared_ptr<const Environment> inner, double cost_lo, double cost_hi,
                        std::vector<double> constraint_lo, std::vector<double> constraint_hi);

  const GameShape& shape() const override { return inner_->shape(); }
  std::span<const double> bounds() const override { return bounds_; }
  double cost_noise() const override;
  void transition_row(std::size_t state, std::size_t joint, std::span<double> out) const override {
    inner_->transition_row(state, joint, out);
  }
  double cost(std::size_t agent, std::size_t state, std::size_t joint) const override;
  double constraint_cost(std::size_t agent, std::size_t k, std::size_t state,
                         std::size_t joint) const override;

 private:
  std::shared_ptr<const Environment> inner_;
  double cost_lo_, cost_scale_;
  std::vector<double> constraint_lo_, constraint_scale_;
  std::vector<double> bounds_;
};

/// Scans every (s, a) for cost ranges and returns the [0, 1]-normalized view.
std::shared_ptr<const Environment> normalize_costs(std::shared_ptr<const Environment> env);

struct ValidationIssue {
  enum class Kind { kShape, kRowSum, kNegativeProbability, kNonFinite, kReducible };
  Kind kind;
  bool fatal;
  std::string message;
  std::optional<std::size_t> state;
  std::optional<std::size_t> joint_action;
};

const char* to_string(ValidationIssue::Kind kind);

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  /// True when no fatal issue was found (warnings allowed).
  bool ok() const;
  bool has(ValidationIssue::Kind kind) const;
  std::size_t count(ValidationIssue::Kind kind) const;
};

/// Checks probability rows (sum within 1e-10, entries >= 0), finiteness of every table entry,
/// and flags possible reducibility: the state graph under the uniform policy must be
/// strongly connected. Never throws for data problems; every problem becomes an issue.
/// At most `max_reported` issues per kind are itemized.
ValidationReport validate(const Environment& env, std::size_t max_reported = 20);

/// Row-sum tolerance for transition probabilities.
inline constexpr double kRowSumTolerance = 1e-10;

struct StageOutcome {
  std::size_t next_state = 0;
  std::vector<double> costs;        // length N
  std::vector<double> constraints;  // N * K, agent-major

  double constraint(std::size_t agent, std::size_t k, std::size_t num_constraints) const {
    return constraints[agent * num_constraints + k];
  }
};

/// Next state drawn from P(.|s, a) using one uniform from `rng`.
std::size_t sample_transition(const Environment& env, std::size_t state, std::span<const std::size_t> action,
                              Rng& rng);
std::size_t sample_transition(const Environment& env, std::size_t state, std::size_t joint, Rng& rng);

/// Table means plus independent uniform noise on [-amp, +amp] per agent and per constraint.
/// Noise is drawn agent by agent: the cost first, then constraints 1..K. With zero
/// amplitude no random numbers are consumed.
void immediate_costs(const Environment& env, std::size_t state, std::size_t joint, Rng& rng,
                     StageOutcome& out);
/// Costs only; `next_state` of the result is left at 0.
StageOutcome immediate_costs(const Environment& env, std::size_t state, std::span<const std::size_t> action,
                             Rng& rng);

/// One environment transition: samples the next state, then the immediate costs at (s, a).
void step(const Environment& env, std::size_t state, std::size_t joint, Rng& rng, StageOutcome& out);

/// Range check for a state and joint action; throws IndexError naming the bad index.
void check_indices(const Environment& env, std::size_t state, std::span<const std::size_t> action);

}  // namespace cmarl
