#pragma once

// Communication topologies, doubly stochastic mixing matrices and gossip.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmarl/random.hpp"

namespace cmarl {

enum class TopologyKind { kComplete, kRing, kStar, kRandomGeometric, kCustom };

const char* to_string(TopologyKind kind);
TopologyKind topology_kind_from_string(const std::string& name);

/// Undirected connected graph on N agents. Self-loops are implicit and never listed.
class Topology {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  /// Throws ConfigError for self-edges, out-of-range endpoints or a disconnected graph.
  Topology(std::size_t num_agents, std::vector<Edge> edges, TopologyKind kind = TopologyKind::kCustom);

  static Topology complete(std::size_t n);
  static Topology ring(std::size_t n);
  /// Agent 0 is the hub.
  static Topology star(std::size_t n);
  /// Points uniform in the unit square, joined when closer than `radius`. Redraws up to
  /// `max_attempts` times until the graph is connected.
  static Topology random_geometric(std::size_t n, double radius, Rng& rng, std::size_t max_attempts = 1000);

  std::size_t num_agents() const { return n_; }
  TopologyKind kind() const { return kind_; }
  /// Normalized (i < j), sorted, without duplicates.
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<std::size_t> degrees() const;

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  TopologyKind kind_;
};

/// True when the undirected graph is connected.
bool is_connected(std::size_t n, std::span<const Topology::Edge> edges);

/// Row-major N x N weights with Assumption-6 diagnostics.
class MixingMatrix {
 public:
  /// Validates double stochasticity (1e-12), non-negativity, positive diagonal and rho < 1.
  /// Throws ConfigError listing every violation.
  static MixingMatrix from_weights(std::size_t n, std::vector<double> weights);

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return c_[i * n_ + j]; }
  const std::vector<double>& weights() const { return c_; }
  /// Smallest positive entry.
  double eta() const { return eta_; }
  /// Largest singular value of C^T (I - 11^T / N) C.
  double rho() const { return rho_; }

  /// out_n = sum_n' c_{n,n'} values_n'. `values` and `out` are N x dim row-major and must not alias.
  void mix(std::span<const double> values, std::size_t dim, std::span<double> out) const;
  std::vector<std::vector<double>> mix(const std::vector<std::vector<double>>& values) const;

 private:
  MixingMatrix() = default;

  std::size_t n_ = 0;
  std::vector<double> c_;
  double eta_ = 0.0;
  double rho_ = 0.0;
};

/// Assumption-6 problems of a candidate matrix; empty when it qualifies.
std::vector<std::string> assumption6_violations(std::size_t n, std::span<const double> weights,
                                                double tolerance = 1e-12);

/// c_ij = 1 / (1 + max(deg_i, deg_j)) on edges, c_ii = 1 - sum_j c_ij.
MixingMatrix metropolis_weights(const Topology& topology);

/// Spectral parameter of a single matrix.
double spectral_rho(std::size_t n, std::span<const double> weights);

/// Source of C^t. Static mode returns the same matrix every step. Time-varying mode draws,
/// each step, a random spanning tree of the base graph (Kruskal over shuffled edges) plus
/// each remaining base edge with probability 1/2, then rebuilds Metropolis weights.
class MixingProcess {
 public:
  explicit MixingProcess(MixingMatrix fixed);
  MixingProcess(Topology base, bool time_varying);

  bool time_varying() const { return time_varying_; }
  const Topology& base() const { return base_; }
  /// Draws C^t. Consumes randomness only in time-varying mode.
  const MixingMatrix& draw(Rng& rng);
  const MixingMatrix& current() const { return current_; }

  /// rho of E[C^T (I - 11^T/N) C], estimated over `samples` draws from a private stream
  /// in time-varying mode, exact otherwise.
  double expected_rho(std::uint64_t seed, std::size_t samples = 200) const;
  /// Smallest positive entry over the matrices in `expected_rho`'s sample (or the fixed one).
  double min_eta(std::uint64_t seed, std::size_t samples = 200) const;

 private:
  Topology base_;
  bool time_varying_;
  MixingMatrix current_;
};

struct ConsensusStats {
  std::vector<double> mean;
  double disagreement = 0.0;
};

/// Mean over agents and sqrt(sum_n ||x_n - mean||^2). `values` is N x dim row-major.
ConsensusStats consensus_stats(std::span<const double> values, std::size_t dim);
ConsensusStats consensus_stats(const std::vector<std::vector<double>>& values);

/// Largest Euclidean distance between two agents' vectors.
double max_pairwise_distance(std::span<const double> values, std::size_t dim);

}  // namespace cmarl
