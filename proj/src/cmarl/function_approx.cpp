#include "cmarl/function_approx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "cmarl/errors.hpp"

namespace cmarl {

// ---------------------------------------------------------------------------
// FeatureTable

FeatureTable FeatureTable::random(std::uint64_t seed, std::size_t rows, std::size_t dim, double low, double high) {
  if (!(high > low)) throw InvalidArgument("feature range must satisfy low < high");
  FeatureTable t;
  t.rows_ = rows;
  t.dim_ = dim;
  t.seed_ = seed;
  t.low_ = low;
  t.span_ = high - low;
  return t;
}

FeatureTable FeatureTable::dense(std::size_t rows, std::size_t dim, std::vector<double> values) {
  if (values.size() != rows * dim) {
    throw InvalidArgument("dense feature table has " + std::to_string(values.size()) + " values, expected " +
                          std::to_string(rows * dim));
  }
  FeatureTable t;
  t.rows_ = rows;
  t.dim_ = dim;
  t.values_ = std::move(values);
  return t;
}

double FeatureTable::generated(std::size_t row, std::size_t col) const {
  const std::uint64_t cell = static_cast<std::uint64_t>(row) * static_cast<std::uint64_t>(dim_) + col;
  const std::uint64_t bits = mix64(seed_ ^ mix64(cell));
  return low_ + span_ * (static_cast<double>(bits >> 11) * 0x1.0p-53);
}

double FeatureTable::at(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= dim_) throw IndexError("feature index out of range");
  return values_.empty() ? generated(row, col) : values_[row * dim_ + col];
}

void FeatureTable::row(std::size_t r, std::span<double> out) const {
  if (r >= rows_) throw IndexError("feature row " + std::to_string(r) + " out of range");
  if (values_.empty()) {
    for (std::size_t j = 0; j < dim_; ++j) out[j] = generated(r, j);
  } else {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(r * dim_), dim_, out.begin());
  }
}

double FeatureTable::dot(std::size_t r, std::span<const double> w) const {
  if (w.size() != dim_) {
    throw ConfigError("weight dimension " + std::to_string(w.size()) + " differs from feature dimension " +
                      std::to_string(dim_));
  }
  if (r >= rows_) throw IndexError("feature row " + std::to_string(r) + " out of range");
  double acc = 0.0;
  if (values_.empty()) {
    for (std::size_t j = 0; j < dim_; ++j) acc += generated(r, j) * w[j];
  } else {
    const double* f = values_.data() + r * dim_;
    for (std::size_t j = 0; j < dim_; ++j) acc += f[j] * w[j];
  }
  return acc;
}

FeatureTable FeatureTable::materialize() const {
  if (!values_.empty()) return *this;
  std::vector<double> values(rows_ * dim_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < dim_; ++j) values[r * dim_ + j] = generated(r, j);
  }
  return dense(rows_, dim_, std::move(values));
}

FeatureTable make_critic_features(const FeatureSpec& spec, std::size_t num_pairs) {
  return FeatureTable::random(derive_seed(spec.seed, 0), num_pairs, spec.critic_dim, spec.low, spec.high);
}

FeatureTable make_policy_features(const FeatureSpec& spec, std::size_t agent, std::size_t num_states,
                                  std::size_t num_actions) {
  return FeatureTable::random(derive_seed(spec.seed, agent + 1), num_states * num_actions, spec.policy_dim,
                              spec.low, spec.high)
      .materialize();
}

void export_features_csv(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "pair";
  for (std::size_t j = 0; j < table.dim(); ++j) out << ",f" << (j + 1);
  out << '\n';
  std::vector<double> row(table.dim());
  char buf[32];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    table.row(r, row);
    out << r;
    for (double v : row) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

FeatureTable import_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("feature CSV '" + path.string() + "' is empty");
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (line.rfind("pair", 0) != 0 || dim == 0) throw ConfigError("feature CSV header must be pair,f1,...,fd");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    if (std::stoull(cell) != rows) {
      throw ConfigError("feature CSV row " + std::to_string(rows) + " has pair index " + cell);
    }
    std::size_t count = 0;
    while (std::getline(fields, cell, ',')) {
      values.push_back(std::strtod(cell.c_str(), nullptr));
      ++count;
    }
    if (count != dim) throw ConfigError("feature CSV row " + std::to_string(rows) + " has wrong column count");
    ++rows;
  }
  return FeatureTable::dense(rows, dim, std::move(values));
}

// ---------------------------------------------------------------------------
// LinearCritic

LinearCritic::LinearCritic(std::shared_ptr<const FeatureTable> features, std::size_t joint_actions,
                           std::vector<double> weights)
    : features_(std::move(features)), joint_actions_(joint_actions), weights_(std::move(weights)) {
  if (weights_.size() != features_->dim()) {
    throw ConfigError("critic weights have dimension " + std::to_string(weights_.size()) + ", features have " +
                      std::to_string(features_->dim()));
  }
}

double LinearCritic::q_value(std::size_t state, std::size_t joint) const {
  if (joint >= joint_actions_) throw IndexError("joint action out of range");
  return features_->dot(pair_index(state, joint), weights_);
}

// ---------------------------------------------------------------------------
// SoftmaxPolicy

void softmax(std::span<const double> logits, std::span<double> out) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (auto& v : out) v /= total;
}

SoftmaxPolicy::SoftmaxPolicy(std::shared_ptr<const FeatureTable> features, std::size_t num_actions,
                             std::vector<double> theta, double theta_max)
    : features_(std::move(features)), num_actions_(num_actions), theta_(std::move(theta)), theta_max_(theta_max) {
  if (num_actions_ == 0 || features_->rows() % num_actions_ != 0) {
    throw ConfigError("policy feature rows must be a multiple of the action count");
  }
  if (theta_.size() != features_->dim()) {
    throw ConfigError("policy parameters have dimension " + std::to_string(theta_.size()) + ", features have " +
                      std::to_string(features_->dim()));
  }
  if (!(theta_max_ > 0.0)) throw ConfigError("theta_max must be positive");
}

void SoftmaxPolicy::check_state(std::size_t state) const {
  if (state >= num_states()) throw IndexError("state " + std::to_string(state) + " out of range");
}

void SoftmaxPolicy::logits(std::size_t state, std::span<double> out) const {
  check_state(state);
  for (std::size_t a = 0; a < num_actions_; ++a) out[a] = features_->dot(state * num_actions_ + a, theta_);
}

void SoftmaxPolicy::probs(std::size_t state, std::span<double> out) const {
  logits(state, out);
  softmax(out, out);
}

std::vector<double> SoftmaxPolicy::probs(std::size_t state) const {
  std::vector<double> out(num_actions_);
  probs(state, out);
  return out;
}

void SoftmaxPolicy::log_probs(std::size_t state, std::span<double> out) const {
  logits(state, out);
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double z : out) total += std::exp(z - peak);
  const double log_norm = peak + std::log(total);
  for (auto& z : out) z -= log_norm;
}

void SoftmaxPolicy::score(std::size_t state, std::size_t action, std::span<double> out) const {
  if (action >= num_actions_) throw IndexError("action " + std::to_string(action) + " out of range");
  std::vector<double> p(num_actions_);
  probs(state, p);
  const std::size_t d = dim();
  std::vector<double> f(d);
  features_->row(state * num_actions_ + action, out);
  for (std::size_t a = 0; a < num_actions_; ++a) {
    features_->row(state * num_actions_ + a, f);
    for (std::size_t j = 0; j < d; ++j) out[j] -= p[a] * f[j];
  }
}

std::vector<double> SoftmaxPolicy::score(std::size_t state, std::size_t action) const {
  std::vector<double> out(dim());
  score(state, action, out);
  return out;
}

std::size_t SoftmaxPolicy::sample(std::size_t state, Rng& rng) const {
  constexpr std::size_t kStack = 64;
  double stack_p[kStack];
  std::vector<double> heap_p;
  std::span<double> p;
  if (num_actions_ <= kStack) {
    p = std::span<double>(stack_p, num_actions_);
  } else {
    heap_p.resize(num_actions_);
    p = heap_p;
  }
  probs(state, p);
  return sample_from_pmf(p, rng.uniform01());
}

}  // namespace cmarl
