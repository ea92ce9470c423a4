#include "cmarl/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "cmarl/errors.hpp"

namespace cmarl {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_matrix(std::size_t n, std::span<const double> w) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w[i * n + j];
  }
  return m;
}

// C^T (I - 11^T / N) C
Matrix disagreement_gram(std::size_t n, std::span<const double> w) {
  const Matrix c = to_matrix(n, w);
  Matrix centering = Matrix::Identity(c.rows(), c.cols());
  centering.array() -= 1.0 / static_cast<double>(n);
  return c.transpose() * centering * c;
}

double largest_singular_value(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

double min_positive(std::span<const double> w) {
  double eta = 0.0;
  for (double v : w) {
    if (v > 0.0 && (eta == 0.0 || v < eta)) eta = v;
  }
  return eta;
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

std::vector<Topology::Edge> edges_of(std::size_t n, std::span<const double> w) {
  std::vector<Topology::Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (w[i * n + j] > 0.0 || w[j * n + i] > 0.0) edges.emplace_back(i, j);
    }
  }
  return edges;
}

}  // namespace

const char* to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kComplete: return "complete";
    case TopologyKind::kRing: return "ring";
    case TopologyKind::kStar: return "star";
    case TopologyKind::kRandomGeometric: return "random-geometric";
    case TopologyKind::kCustom: return "custom";
  }
  return "custom";
}

TopologyKind topology_kind_from_string(const std::string& name) {
  for (auto k : {TopologyKind::kComplete, TopologyKind::kRing, TopologyKind::kStar, TopologyKind::kRandomGeometric,
                 TopologyKind::kCustom}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown topology kind '" + name + "' (expected complete, ring, star, random-geometric, custom)");
}

// ---------------------------------------------------------------------------
// Topology

bool is_connected(std::size_t n, std::span<const Topology::Edge> edges) {
  if (n == 0) return false;
  DisjointSets sets(n);
  std::size_t components = n;
  for (auto [a, b] : edges) {
    if (a < n && b < n && sets.unite(a, b)) --components;
  }
  return components == 1;
}

Topology::Topology(std::size_t num_agents, std::vector<Edge> edges, TopologyKind kind)
    : n_(num_agents), kind_(kind) {
  if (n_ == 0) throw ConfigError("topology needs at least one agent");
  for (auto& [a, b] : edges) {
    if (a >= n_ || b >= n_) {
      throw ConfigError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") references an agent outside [0, " +
                        std::to_string(n_) + ")");
    }
    if (a == b) throw ConfigError("self-edge on agent " + std::to_string(a) + " (self-weights are implicit)");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (!is_connected(n_, edges)) throw ConfigError("communication graph is not connected");
  edges_ = std::move(edges);
}

Topology Topology::complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  }
  return Topology(n, std::move(edges), TopologyKind::kComplete);
}

Topology Topology::ring(std::size_t n) {
  std::vector<Edge> edges;
  if (n == 2) edges.emplace_back(0, 1);
  if (n > 2) {
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  }
  return Topology(n, std::move(edges), TopologyKind::kRing);
}

Topology Topology::star(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
  return Topology(n, std::move(edges), TopologyKind::kStar);
}

Topology Topology::random_geometric(std::size_t n, double radius, Rng& rng, std::size_t max_attempts) {
  if (!(radius > 0.0)) throw ConfigError("random-geometric radius must be positive");
  std::vector<double> x(n), y(n);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform01();
      y[i] = rng.uniform01();
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::hypot(x[i] - x[j], y[i] - y[j]) <= radius) edges.emplace_back(i, j);
      }
    }
    if (is_connected(n, edges)) return Topology(n, std::move(edges), TopologyKind::kRandomGeometric);
  }
  throw ConfigError("no connected random-geometric graph with radius " + std::to_string(radius) + " after " +
                    std::to_string(max_attempts) + " draws");
}

std::vector<std::size_t> Topology::degrees() const {
  std::vector<std::size_t> deg(n_, 0);
  for (auto [a, b] : edges_) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

// ---------------------------------------------------------------------------
// MixingMatrix

double spectral_rho(std::size_t n, std::span<const double> weights) {
  return largest_singular_value(disagreement_gram(n, weights));
}

std::vector<std::string> assumption6_violations(std::size_t n, std::span<const double> w, double tolerance) {
  std::vector<std::string> problems;
  if (n == 0 || w.size() != n * n) {
    problems.push_back("matrix must be N x N with N > 0");
    return problems;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = w[i * n + j];
      if (!std::isfinite(v)) problems.push_back("entry (" + std::to_string(i) + ", " + std::to_string(j) + ") is not finite");
      if (v < 0.0) problems.push_back("entry (" + std::to_string(i) + ", " + std::to_string(j) + ") is negative");
      row += v;
      col += w[j * n + i];
    }
    if (std::abs(row - 1.0) > tolerance) problems.push_back("row " + std::to_string(i) + " sums to " + std::to_string(row));
    if (std::abs(col - 1.0) > tolerance) problems.push_back("column " + std::to_string(i) + " sums to " + std::to_string(col));
    if (!(w[i * n + i] > 0.0)) problems.push_back("diagonal entry " + std::to_string(i) + " is not positive");
  }
  if (problems.empty()) {
    const double rho = spectral_rho(n, w);
    if (!(rho < 1.0 - tolerance)) problems.push_back("spectral parameter rho = " + std::to_string(rho) + " is not below 1");
  }
  return problems;
}

MixingMatrix MixingMatrix::from_weights(std::size_t n, std::vector<double> weights) {
  auto problems = assumption6_violations(n, weights);
  if (!problems.empty()) {
    std::string msg = "mixing matrix violates the consensus conditions: ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw ConfigError(msg);
  }
  MixingMatrix m;
  m.n_ = n;
  m.eta_ = min_positive(weights);
  m.rho_ = spectral_rho(n, weights);
  m.c_ = std::move(weights);
  return m;
}

MixingMatrix metropolis_weights(const Topology& topology) {
  const std::size_t n = topology.num_agents();
  const auto deg = topology.degrees();
  std::vector<double> w(n * n, 0.0);
  for (auto [a, b] : topology.edges()) {
    const double c = 1.0 / (1.0 + static_cast<double>(std::max(deg[a], deg[b])));
    w[a * n + b] = c;
    w[b * n + a] = c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) off += w[i * n + j];
    }
    w[i * n + i] = 1.0 - off;
  }
  return MixingMatrix::from_weights(n, std::move(w));
}

void MixingMatrix::mix(std::span<const double> values, std::size_t dim, std::span<double> out) const {
  if (values.size() != n_ * dim || out.size() != n_ * dim) {
    throw InvalidArgument("mix expects " + std::to_string(n_) + " vectors of dimension " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < n_; ++i) {
    double* o = out.data() + i * dim;
    std::fill(o, o + dim, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      const double c = c_[i * n_ + j];
      if (c == 0.0) continue;
      const double* v = values.data() + j * dim;
      for (std::size_t d = 0; d < dim; ++d) o[d] += c * v[d];
    }
  }
}

std::vector<std::vector<double>> MixingMatrix::mix(const std::vector<std::vector<double>>& values) const {
  if (values.size() != n_) throw InvalidArgument("mix expects one vector per agent");
  const std::size_t dim = values.empty() ? 0 : values.front().size();
  std::vector<double> flat;
  flat.reserve(n_ * dim);
  for (const auto& v : values) {
    if (v.size() != dim) throw InvalidArgument("mix inputs must share a common dimension");
    flat.insert(flat.end(), v.begin(), v.end());
  }
  std::vector<double> mixed(flat.size());
  mix(flat, dim, mixed);
  std::vector<std::vector<double>> out(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    out[i].assign(mixed.begin() + static_cast<std::ptrdiff_t>(i * dim),
                  mixed.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MixingProcess

MixingProcess::MixingProcess(MixingMatrix fixed)
    : base_(fixed.size(), edges_of(fixed.size(), fixed.weights())), time_varying_(false), current_(std::move(fixed)) {}

MixingProcess::MixingProcess(Topology base, bool time_varying)
    : base_(std::move(base)), time_varying_(time_varying), current_(metropolis_weights(base_)) {}

const MixingMatrix& MixingProcess::draw(Rng& rng) {
  if (!time_varying_) return current_;
  std::vector<Topology::Edge> edges = base_.edges();
  for (std::size_t i = edges.size(); i > 1; --i) {
    std::swap(edges[i - 1], edges[static_cast<std::size_t>(rng.below(i))]);
  }
  DisjointSets sets(base_.num_agents());
  std::vector<Topology::Edge> chosen;
  std::vector<Topology::Edge> rest;
  for (const auto& e : edges) {
    if (sets.unite(e.first, e.second)) {
      chosen.push_back(e);
    } else {
      rest.push_back(e);
    }
  }
  for (const auto& e : rest) {
    if (rng.uniform01() < 0.5) chosen.push_back(e);
  }
  current_ = metropolis_weights(Topology(base_.num_agents(), std::move(chosen), TopologyKind::kCustom));
  return current_;
}

double MixingProcess::expected_rho(std::uint64_t seed, std::size_t samples) const {
  if (!time_varying_) return current_.rho();
  const std::size_t n = base_.num_agents();
  MixingProcess copy(*this);
  Rng rng(seed);
  Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < samples; ++i) acc += disagreement_gram(n, copy.draw(rng).weights());
  acc /= static_cast<double>(std::max<std::size_t>(samples, 1));
  return largest_singular_value(acc);
}

double MixingProcess::min_eta(std::uint64_t seed, std::size_t samples) const {
  if (!time_varying_) return current_.eta();
  MixingProcess copy(*this);
  Rng rng(seed);
  double eta = 1.0;
  for (std::size_t i = 0; i < samples; ++i) eta = std::min(eta, copy.draw(rng).eta());
  return eta;
}

// ---------------------------------------------------------------------------

ConsensusStats consensus_stats(std::span<const double> values, std::size_t dim) {
  ConsensusStats out;
  out.mean.assign(dim, 0.0);
  if (dim == 0 || values.empty()) return out;
  const std::size_t n = values.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) out.mean[d] += values[i * dim + d];
  }
  for (auto& m : out.mean) m /= static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = values[i * dim + d] - out.mean[d];
      sq += diff * diff;
    }
  }
  out.disagreement = std::sqrt(sq);
  return out;
}

ConsensusStats consensus_stats(const std::vector<std::vector<double>>& values) {
  const std::size_t dim = values.empty() ? 0 : values.front().size();
  std::vector<double> flat;
  for (const auto& v : values) {
    if (v.size() != dim) throw InvalidArgument("consensus_stats inputs must share a common dimension");
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return consensus_stats(flat, dim);
}

double max_pairwise_distance(std::span<const double> values, std::size_t dim) {
  if (dim == 0) return 0.0;
  const std::size_t n = values.size() / dim;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = values[i * dim + d] - values[j * dim + d];
        sq += diff * diff;
      }
      best = std::max(best, std::sqrt(sq));
    }
  }
  return best;
}

}  // namespace cmarl
