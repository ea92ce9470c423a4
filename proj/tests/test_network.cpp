#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cmarl/errors.hpp"
#include "cmarl/network.hpp"

using namespace cmarl;

namespace {

std::vector<double> random_values(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

}  // namespace

TEST_CASE("topology construction validates edges and connectivity") {
  CHECK_THROWS_AS(Topology(3, {{0, 0}}), ConfigError);
  CHECK_THROWS_AS(Topology(3, {{0, 3}}), ConfigError);
  CHECK_THROWS_AS(Topology(4, {{0, 1}, {2, 3}}), ConfigError);
  const Topology t(4, {{3, 2}, {1, 0}, {2, 1}, {0, 1}});
  CHECK(t.edges() == std::vector<Topology::Edge>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(Topology::complete(5).edges().size() == 10);
  CHECK(Topology::ring(5).edges().size() == 5);
  CHECK(Topology::star(4).degrees() == std::vector<std::size_t>{3, 1, 1, 1});
}

TEST_CASE("random geometric graphs are connected and reproducible") {
  Rng a(4), b(4);
  const auto g1 = Topology::random_geometric(8, 0.6, a);
  const auto g2 = Topology::random_geometric(8, 0.6, b);
  CHECK(g1.edges() == g2.edges());
  CHECK(is_connected(8, g1.edges()));
}

TEST_CASE("metropolis: complete graph on two agents") {
  const auto C = metropolis_weights(Topology::complete(2));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(C.at(i, j) == 0.5);
  }
}

TEST_CASE("metropolis: ring of five has weights 1/3 and rho from circulant eigenvalues") {
  const auto C = metropolis_weights(Topology::ring(5));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(C.at(i, i) == doctest::Approx(1.0 / 3));
    CHECK(C.at(i, (i + 1) % 5) == doctest::Approx(1.0 / 3));
    CHECK(C.at(i, (i + 2) % 5) == 0.0);
  }
  // Circulant eigenvalues (1 + 2 cos(2 pi k / 5)) / 3; rho is the largest squared non-unit one.
  double rho = 0;
  for (int k = 1; k < 5; ++k) {
    const double lam = (1 + 2 * std::cos(2 * std::numbers::pi * k / 5)) / 3;
    rho = std::max(rho, lam * lam);
  }
  CHECK(C.rho() == doctest::Approx(rho).epsilon(1e-12));
  CHECK(C.rho() < 1.0);
  CHECK(C.eta() == doctest::Approx(1.0 / 3));
}

TEST_CASE("metropolis: star hub self-weight") {
  const auto C = metropolis_weights(Topology::star(4));
  CHECK(C.at(0, 0) == doctest::Approx(0.25));
  CHECK(C.at(1, 1) == doctest::Approx(0.75));
  CHECK(C.at(0, 3) == doctest::Approx(0.25));
}

TEST_CASE("assumption 6 validator rejects bad matrices") {
  // Not doubly stochastic.
  CHECK_FALSE(assumption6_violations(2, std::vector<double>{0.6, 0.4, 0.6, 0.4}).empty());
  // Zero diagonal.
  CHECK_FALSE(assumption6_violations(2, std::vector<double>{0.0, 1.0, 1.0, 0.0}).empty());
  // Identity: rho = 1 because nothing mixes.
  CHECK_FALSE(assumption6_violations(2, std::vector<double>{1.0, 0.0, 0.0, 1.0}).empty());
  // Negative entry.
  CHECK_FALSE(assumption6_violations(2, std::vector<double>{1.2, -0.2, -0.2, 1.2}).empty());
  CHECK_THROWS_AS(MixingMatrix::from_weights(2, {1.0, 0.0, 0.0, 1.0}), ConfigError);
  CHECK(assumption6_violations(2, std::vector<double>{0.5, 0.5, 0.5, 0.5}).empty());
}

TEST_CASE("mix: consensus fixed point, mean preservation, two-agent example") {
  const auto C = metropolis_weights(Topology::ring(5));
  std::vector<double> same(5 * 3);
  for (std::size_t n = 0; n < 5; ++n) same[n * 3] = 1.5, same[n * 3 + 1] = -2.0, same[n * 3 + 2] = 0.25;
  std::vector<double> out(15);
  C.mix(same, 3, out);
  for (std::size_t i = 0; i < 15; ++i) CHECK(out[i] == doctest::Approx(same[i]).epsilon(1e-15));

  std::mt19937_64 gen(3);
  const auto x = random_values(gen, 15);
  C.mix(x, 3, out);
  const auto before = consensus_stats(x, 3), after = consensus_stats(out, 3);
  for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(before.mean[d] - after.mean[d]) < 1e-12);

  const auto C2 = metropolis_weights(Topology::complete(2));
  std::vector<double> pair{0.0, 1.0}, mixed(2);
  C2.mix(pair, 1, mixed);
  CHECK(mixed[0] == 0.5);
  CHECK(mixed[1] == 0.5);

  std::vector<double> wrong(7);
  CHECK_THROWS_AS(C.mix(wrong, 3, out), InvalidArgument);
}

TEST_CASE("consensus_stats examples and the Pythagorean identity") {
  const std::vector<double> same{2.0, 2.0, 2.0};
  CHECK(consensus_stats(same, 1).disagreement == 0.0);
  const std::vector<double> two{0.0, 2.0};
  const auto s = consensus_stats(two, 1);
  CHECK(s.mean[0] == 1.0);
  CHECK(s.disagreement == doctest::Approx(std::sqrt(2.0)));

  std::mt19937_64 gen(8);
  const auto x = random_values(gen, 6 * 4);
  const auto st = consensus_stats(x, 4);
  double total = 0, mean_sq = 0;
  for (double v : x) total += v * v;
  for (double m : st.mean) mean_sq += m * m;
  CHECK(std::abs(total - (6 * mean_sq + st.disagreement * st.disagreement)) < 1e-10);
}

TEST_CASE("mix never increases disagreement and contracts by rho^(R/2)") {
  for (const auto& topo : {Topology::complete(6), Topology::ring(6), Topology::star(6)}) {
    const auto C = metropolis_weights(topo);
    std::mt19937_64 gen(12);
    const std::size_t R = 5;
    double ratio_sum = 0;
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_values(gen, 6 * 2);
      const double d0 = consensus_stats(x, 2).disagreement;
      std::vector<double> y(12);
      for (std::size_t r = 0; r < R; ++r) {
        const double before = consensus_stats(x, 2).disagreement;
        C.mix(x, 2, y);
        CHECK(consensus_stats(y, 2).disagreement <= before * (1 + 1e-12) + 1e-15);
        x = y;
      }
      ratio_sum += consensus_stats(x, 2).disagreement / d0;
    }
    CHECK(ratio_sum / 100 <= std::pow(C.rho(), R / 2.0) + 1e-12);
  }
}

TEST_CASE("time-varying mixing draws valid matrices on a connected subgraph") {
  MixingProcess proc(Topology::ring(6), true);
  Rng a(1), b(1);
  MixingProcess twin(Topology::ring(6), true);
  bool changed = false;
  std::vector<double> first;
  for (int t = 0; t < 50; ++t) {
    const auto& C = proc.draw(a);
    const auto& D = twin.draw(b);
    CHECK(C.weights() == D.weights());
    CHECK(assumption6_violations(6, C.weights()).empty());
    if (first.empty()) first = C.weights();
    changed = changed || C.weights() != first;
  }
  CHECK(changed);
  CHECK(proc.expected_rho(3) < 1.0);
  CHECK(proc.min_eta(3) > 0.0);
}

TEST_CASE("static mixing consumes no randomness") {
  MixingProcess proc(Topology::complete(4), false);
  Rng rng(2);
  proc.draw(rng);
  CHECK(rng == Rng(2));
  CHECK(proc.expected_rho(1) == doctest::Approx(metropolis_weights(Topology::complete(4)).rho()));
}
