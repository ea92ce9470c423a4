#include <doctest.h>

#include <cmath>
#include <random>

#include "cmarl/errors.hpp"
#include "cmarl/function_approx.hpp"
#include "support.hpp"

using namespace cmarl;

namespace {

std::shared_ptr<const FeatureTable> shared(FeatureTable t) { return std::make_shared<const FeatureTable>(std::move(t)); }

}  // namespace

TEST_CASE("random feature tables are reproducible and lie in the sampling range") {
  const auto a = FeatureTable::random(42, 50, 20, 0.0, 1.0);
  const auto b = FeatureTable::random(42, 50, 20, 0.0, 1.0);
  const auto c = FeatureTable::random(43, 50, 20, 0.0, 1.0);
  bool differs = false;
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(a.at(r, j) == b.at(r, j));
      CHECK(a.at(r, j) >= 0.0);
      CHECK(a.at(r, j) < 1.0);
      differs = differs || a.at(r, j) != c.at(r, j);
    }
  }
  CHECK(differs);
  const auto m = a.materialize();
  CHECK(m.stored());
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t j = 0; j < 20; ++j) CHECK(m.at(r, j) == a.at(r, j));
  }
  CHECK_THROWS_AS(a.at(50, 0), IndexError);
}

TEST_CASE("random features have roughly uniform moments") {
  const auto t = FeatureTable::random(7, 5000, 20, 0.0, 1.0);
  double mean = 0, sq = 0;
  for (std::size_t r = 0; r < 5000; ++r) {
    for (std::size_t j = 0; j < 20; ++j) {
      mean += t.at(r, j);
      sq += t.at(r, j) * t.at(r, j);
    }
  }
  mean /= 1e5, sq /= 1e5;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq - mean * mean == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("q_value: zero weights, basis feature, naive recomputation") {
  auto feats = shared(FeatureTable::random(1, 6, 4, 0.0, 1.0));
  LinearCritic zero(feats, 3, std::vector<double>(4, 0.0));
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t a = 0; a < 3; ++a) CHECK(zero.q_value(s, a) == 0.0);
  }

  auto basis = shared(FeatureTable::dense(1, 3, {1.0, 0.0, 0.0}));
  LinearCritic e1(basis, 1, {3.0, 0.0, 0.0});
  CHECK(e1.q_value(0, 0) == 3.0);

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> w(4);
  for (auto& x : w) x = u(gen);
  LinearCritic c(feats, 3, w);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t a = 0; a < 3; ++a) {
      double naive = 0;
      for (std::size_t j = 0; j < 4; ++j) naive += feats->at(s * 3 + a, j) * w[j];
      CHECK(c.q_value(s, a) == doctest::Approx(naive).epsilon(1e-12));
    }
  }
}

TEST_CASE("q_value is linear in the weights") {
  auto feats = shared(FeatureTable::random(2, 8, 5, 0.0, 1.0));
  const std::vector<double> w1{0.3, -1.2, 2.0, 0.1, 0.7}, w2{1.0, 0.5, -0.25, 3.0, -2.0};
  const double alpha = 1.7;
  std::vector<double> combo(5);
  for (std::size_t j = 0; j < 5; ++j) combo[j] = alpha * w1[j] + w2[j];
  LinearCritic c1(feats, 4, w1), c2(feats, 4, w2), cc(feats, 4, combo);
  for (std::size_t p = 0; p < 8; ++p) {
    CHECK(cc.q_value_pair(p) == doctest::Approx(alpha * c1.q_value_pair(p) + c2.q_value_pair(p)).epsilon(1e-12));
  }
}

TEST_CASE("critic: dimension mismatch is a configuration error") {
  auto feats = shared(FeatureTable::random(1, 4, 3, 0.0, 1.0));
  CHECK_THROWS_AS(LinearCritic(feats, 2, {1.0, 2.0}), ConfigError);
}

TEST_CASE("policy_probs: zero parameters are uniform") {
  auto feats = shared(FeatureTable::random(3, 4 * 10, 10, 0.0, 1.0));
  SoftmaxPolicy pi(feats, 10, std::vector<double>(10, 0.0), 50.0);
  for (std::size_t s = 0; s < 4; ++s) {
    for (double p : pi.probs(s)) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
  }
}

TEST_CASE("policy_probs: logits (0, ln 3) give (0.25, 0.75)") {
  auto feats = shared(FeatureTable::dense(2, 1, {0.0, 1.0}));
  SoftmaxPolicy pi(feats, 2, {std::log(3.0)}, 50.0);
  const auto p = pi.probs(0);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("policy_probs: huge parameters stay finite, positive and normalized") {
  auto feats = shared(FeatureTable::random(4, 3 * 5, 6, 0.0, 1.0));
  std::vector<double> theta{1e4, -2e4, 3e4, 1e4, -1e4, 5e3};
  SoftmaxPolicy pi(feats, 5, theta, 1e5);
  for (std::size_t s = 0; s < 3; ++s) {
    double total = 0;
    for (double p : pi.probs(s)) {
      CHECK(std::isfinite(p));
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> lp(5);
    pi.log_probs(s, lp);
    for (double x : lp) CHECK(std::isfinite(x));
  }
}

TEST_CASE("policy probabilities are positive and normalized inside the box") {
  auto feats = shared(FeatureTable::random(8, 4 * 6, 10, 0.0, 1.0));
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> theta(10);
    for (auto& x : theta) x = u(gen);
    SoftmaxPolicy pi(feats, 6, theta, 50);
    for (std::size_t s = 0; s < 4; ++s) {
      double total = 0;
      for (double p : pi.probs(s)) {
        CHECK(p > 0.0);
        total += p;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("score: centering identity, single action, finite differences") {
  auto feats = shared(FeatureTable::random(9, 3 * 4, 7, 0.0, 1.0));
  const std::vector<double> theta{0.5, -0.3, 1.2, 0.0, -0.8, 0.4, 0.9};
  SoftmaxPolicy pi(feats, 4, theta, 50);
  for (std::size_t s = 0; s < 3; ++s) {
    const auto p = pi.probs(s);
    std::vector<double> centred(7, 0.0);
    for (std::size_t a = 0; a < 4; ++a) {
      const auto sc = pi.score(s, a);
      for (std::size_t j = 0; j < 7; ++j) centred[j] += p[a] * sc[j];
    }
    for (double x : centred) CHECK(std::abs(x) < 1e-10);
  }

  auto one = shared(FeatureTable::random(10, 3, 4, 0.0, 1.0));
  SoftmaxPolicy single(one, 1, {1.0, 2.0, 3.0, 4.0}, 50);
  for (double x : single.score(1, 0)) CHECK(std::abs(x) < 1e-15);

  const double h = 1e-5;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 4; ++a) {
      const auto sc = pi.score(s, a);
      for (std::size_t j = 0; j < 7; ++j) {
        auto tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        std::vector<double> lp(4), lm(4);
        SoftmaxPolicy(feats, 4, tp, 50).log_probs(s, lp);
        SoftmaxPolicy(feats, 4, tm, 50).log_probs(s, lm);
        const double fd = (lp[a] - lm[a]) / (2 * h);
        CHECK(std::abs(fd - sc[j]) <= 1e-6 * std::max(std::abs(sc[j]), 1e-3));
      }
    }
  }
}

TEST_CASE("sample_action: uniform frequencies, near-deterministic policy, reproducibility") {
  auto feats = shared(FeatureTable::random(11, 2 * 10, 10, 0.0, 1.0));
  SoftmaxPolicy uniform(feats, 10, std::vector<double>(10, 0.0), 50);
  Rng rng(77);
  std::vector<double> freq(10, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) freq[uniform.sample(1, rng)] += 1.0 / n;
  for (double f : freq) CHECK(std::abs(f - 0.1) < 0.01);

  auto basis = shared(FeatureTable::dense(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  SoftmaxPolicy sharp(basis, 3, {0.0, 10.0, 0.0}, 50);
  REQUIRE(sharp.probs(0)[1] > 0.999);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += sharp.sample(0, rng) == 1;
  CHECK(hits >= 9980);

  Rng a(5), b(5);
  for (int i = 0; i < 500; ++i) CHECK(uniform.sample(0, a) == uniform.sample(0, b));
}

TEST_CASE("feature CSV export and import are bit-exact") {
  const auto dir = testing::temp_dir("features");
  const auto t = FeatureTable::random(21, 12, 5, -1.0, 2.0);
  export_features_csv(t, dir / "f.csv");
  const auto first = testing::slurp(dir / "f.csv");
  CHECK(first.rfind("pair,f1,f2,f3,f4,f5\n", 0) == 0);
  const auto back = import_features_csv(dir / "f.csv");
  REQUIRE(back.rows() == 12);
  REQUIRE(back.dim() == 5);
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(back.at(r, j) == t.at(r, j));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("critic and policy feature factories use distinct streams per agent") {
  FeatureSpec spec;
  spec.seed = 3;
  const auto c = make_critic_features(spec, 100);
  const auto p0 = make_policy_features(spec, 0, 5, 4);
  const auto p1 = make_policy_features(spec, 1, 5, 4);
  CHECK(c.dim() == 20);
  CHECK(p0.dim() == 10);
  CHECK(p0.rows() == 20);
  CHECK(p0.at(0, 0) != p1.at(0, 0));
  CHECK(p0.at(0, 0) != c.at(0, 0));
}
