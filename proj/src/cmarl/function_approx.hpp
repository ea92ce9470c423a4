#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "cmarl/random.hpp"

namespace cmarl {

struct FeatureSpec {
  std::uint64_t seed = 0;
  std::size_t critic_dim = 20;
  std::size_t policy_dim = 10;
  double low = 0.0;
  double high = 1.0;
};

/// Dense feature matrix [rows x dim].
///
/// A random table is addressed by (seed, row, column): entries are recomputed on demand from
/// a stateless mixer, so the 10^6-row critic table never has to be stored and regenerating
/// with the same seed reproduces it exactly. `materialize` or CSV import give stored tables.
class FeatureTable {
 public:
  static FeatureTable random(std::uint64_t seed, std::size_t rows, std::size_t dim, double low, double high);
  static FeatureTable dense(std::size_t rows, std::size_t dim, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool stored() const { return !values_.empty() || rows_ * dim_ == 0; }

  double at(std::size_t row, std::size_t col) const;
  void row(std::size_t r, std::span<double> out) const;
  /// Sequential inner product of row r with w.
  double dot(std::size_t r, std::span<const double> w) const;

  FeatureTable materialize() const;

 private:
  FeatureTable() = default;
  double generated(std::size_t row, std::size_t col) const;

  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  double low_ = 0.0;
  double span_ = 1.0;
  std::vector<double> values_;
};

/// Shared critic features phi(s, a) over all state / joint-action pairs (pair = s * |A| + a).
FeatureTable make_critic_features(const FeatureSpec& spec, std::size_t num_pairs);
/// Agent-specific policy features f_n(s, a_n) (row = s * |A_n| + a_n).
FeatureTable make_policy_features(const FeatureSpec& spec, std::size_t agent, std::size_t num_states,
                                  std::size_t num_actions);

/// CSV with header `pair,f1,...,fd`; values written with 17 significant digits.
void export_features_csv(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable import_features_csv(const std::filesystem::path& path);

/// Q(s, a; w) = phi(s, a)^T w.
class LinearCritic {
 public:
  LinearCritic(std::shared_ptr<const FeatureTable> features, std::size_t joint_actions, std::vector<double> weights);

  double q_value(std::size_t state, std::size_t joint) const;
  double q_value_pair(std::size_t pair) const { return features_->dot(pair, weights_); }
  std::size_t pair_index(std::size_t state, std::size_t joint) const { return state * joint_actions_ + joint; }

  const FeatureTable& features() const { return *features_; }
  std::span<const double> weights() const { return weights_; }
  std::vector<double>& mutable_weights() { return weights_; }

 private:
  std::shared_ptr<const FeatureTable> features_;
  std::size_t joint_actions_;
  std::vector<double> weights_;
};

/// pi(a_n | s) proportional to exp(theta^T f_n(s, a_n)), with theta confined to
/// the box [-theta_max, theta_max]^dim.
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(std::shared_ptr<const FeatureTable> features, std::size_t num_actions, std::vector<double> theta,
                double theta_max);

  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_states() const { return features_->rows() / num_actions_; }
  std::size_t dim() const { return theta_.size(); }
  double theta_max() const { return theta_max_; }
  std::span<const double> theta() const { return theta_; }
  std::vector<double>& mutable_theta() { return theta_; }
  const FeatureTable& features() const { return *features_; }
  std::shared_ptr<const FeatureTable> shared_features() const { return features_; }

  /// theta^T f(s, a) for every action.
  void logits(std::size_t state, std::span<double> out) const;
  void probs(std::size_t state, std::span<double> out) const;
  std::vector<double> probs(std::size_t state) const;
  /// Log-probabilities computed directly from the max-shifted logits.
  void log_probs(std::size_t state, std::span<double> out) const;
  /// Score function grad_theta log pi(a | s) = f(s, a) - sum_a' pi(a' | s) f(s, a').
  void score(std::size_t state, std::size_t action, std::span<double> out) const;
  std::vector<double> score(std::size_t state, std::size_t action) const;
  std::size_t sample(std::size_t state, Rng& rng) const;

 private:
  void check_state(std::size_t state) const;

  std::shared_ptr<const FeatureTable> features_;
  std::size_t num_actions_;
  std::vector<double> theta_;
  double theta_max_;
};

/// Numerically safe softmax (max subtraction). `out` may alias `logits`.
void softmax(std::span<const double> logits, std::span<double> out);

}  // namespace cmarl
