#include <doctest.h>

#include <cmath>
#include <random>

#include "cmarl/agent.hpp"
#include "cmarl/errors.hpp"

using namespace cmarl;

namespace {

std::shared_ptr<const FeatureTable> shared(FeatureTable t) { return std::make_shared<const FeatureTable>(std::move(t)); }

}  // namespace

TEST_CASE("local_lagrangian_cost examples") {
  const std::vector<double> g{0.9}, b{0.75}, zero{0.0}, two{2.0};
  CHECK(local_lagrangian_cost(0.2, g, zero, b) == 0.2);
  CHECK(local_lagrangian_cost(0.2, g, two, b) == doctest::Approx(0.5));
  CHECK(local_lagrangian_cost(0.2, b, std::vector<double>{7.0}, b) == 0.2);
  CHECK(local_lagrangian_cost(0.3, std::vector<double>{}, std::vector<double>{}, std::vector<double>{}) == 0.3);
}

TEST_CASE("critic_update: fixed point, running average, exact increment") {
  const std::vector<double> w{0.5, -1.0, 2.0}, phi{0.1, 0.2, 0.3};
  const auto fixed = critic_update(w, 0.7, 0.7, phi, phi, 0.3);
  CHECK(fixed.td_error == 0.0);
  CHECK(fixed.w_tilde == w);

  const std::vector<double> zero(3, 0.0);
  CHECK(critic_update(zero, 0.0, 1.0, phi, phi, 0.5).avg_cost == 0.5);

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> wr(5), pc(5), pn(5);
    for (auto* v : {&wr, &pc, &pn}) {
      for (auto& x : *v) x = u(gen);
    }
    const double avg = u(gen), l = u(gen), alpha = 0.5 * (u(gen) + 1.0);
    const auto cs = critic_update(wr, avg, l, pc, pn, alpha);
    double dn = 0, dc = 0;
    for (std::size_t j = 0; j < 5; ++j) dn += pn[j] * wr[j], dc += pc[j] * wr[j];
    CHECK(cs.td_error == doctest::Approx(l - avg + dn - dc).epsilon(1e-12));
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(cs.w_tilde[j] - wr[j] - alpha * cs.td_error * pc[j]) < 1e-12);
  }
}

TEST_CASE("critic_update uses the pre-update running average") {
  const std::vector<double> w{0.0}, phi{1.0};
  const auto cs = critic_update(w, 0.4, 1.0, phi, phi, 0.5);
  CHECK(cs.td_error == doctest::Approx(0.6));
  CHECK(cs.avg_cost == doctest::Approx(0.7));
}

TEST_CASE("advantage: constant critic gives zero and leaves theta unchanged") {
  // Two agents with two actions each; critic features identical across own actions.
  JointActionCodec codec({2, 2});
  std::vector<double> vals(4 * 2);
  for (std::size_t a = 0; a < 4; ++a) vals[a * 2] = 1.0, vals[a * 2 + 1] = static_cast<double>(a / 2);
  // Feature depends on agent 0's action only, so it is constant in agent 1's action.
  LinearCritic critic(shared(FeatureTable::dense(4, 2, vals)), 4, {0.3, 0.8});
  auto pf = shared(FeatureTable::random(1, 2, 3, 0.0, 1.0));
  SoftmaxPolicy pi(pf, 2, {0.2, -0.4, 0.9}, 50);
  CHECK(advantage(critic, pi, codec, 1, 0, 3, 0) == doctest::Approx(0.0).epsilon(1e-15));
  const auto step = actor_update(critic, pi, codec, 1, 0, 3, 0.5, 0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(step.theta[j] == doctest::Approx(pi.theta()[j]));
}

TEST_CASE("advantage: uniform policy, Q values (1, 3) at the first action gives -1") {
  JointActionCodec codec({2});
  LinearCritic critic(shared(FeatureTable::dense(2, 1, {1.0, 3.0})), 2, {1.0});
  SoftmaxPolicy pi(shared(FeatureTable::dense(2, 1, {0.0, 0.0})), 2, {0.0}, 50);
  CHECK(advantage(critic, pi, codec, 0, 0, 0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("advantage is centred under the agent's own policy") {
  JointActionCodec codec({3, 2});
  const std::size_t S = 2, A = 6;
  LinearCritic critic(shared(FeatureTable::random(5, S * A, 4, 0.0, 1.0)), A, {0.3, -1.0, 0.7, 2.0});
  SoftmaxPolicy pi(shared(FeatureTable::random(6, S * 3, 5, 0.0, 1.0)), 3, {0.5, 0.1, -0.9, 1.4, 0.2}, 50);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t other = 0; other < 2; ++other) {
      const auto p = pi.probs(s);
      double centred = 0;
      for (std::size_t a0 = 0; a0 < 3; ++a0) {
        const std::size_t joint = a0 * 2 + other;
        centred += p[a0] * advantage(critic, pi, codec, 0, s, joint, s);
      }
      CHECK(std::abs(centred) < 1e-10);
    }
  }
}

TEST_CASE("actor_update projects onto the theta box") {
  JointActionCodec codec({2});
  LinearCritic critic(shared(FeatureTable::dense(2, 1, {10.0, -10.0})), 2, {1.0});
  SoftmaxPolicy pi(shared(FeatureTable::dense(2, 1, {1.0, 0.0})), 2, {0.9}, 1.0);
  const auto step = actor_update(critic, pi, codec, 0, 0, 1, 100.0, 0);
  CHECK(std::abs(step.theta[0]) <= 1.0);
  CHECK(std::abs(step.theta[0]) == 1.0);
}

TEST_CASE("dual_update examples") {
  const std::vector<double> b{0.75}, lmax{10.0};
  CHECK(dual_update(std::vector<double>{0.5}, b, 1.0, b, lmax)[0] == 0.5);
  CHECK(dual_update(std::vector<double>{0.5}, std::vector<double>{0.85}, 1.0, b, lmax)[0] == doctest::Approx(0.6));
  CHECK(dual_update(std::vector<double>{10.0}, std::vector<double>{0.9}, 1.0, b, lmax)[0] == 10.0);
  CHECK(dual_update(std::vector<double>{0.01}, std::vector<double>{0.0}, 1.0, b, lmax)[0] == 0.0);
}

TEST_CASE("dual_update is monotone in the constraint gap") {
  const std::vector<double> b{0.5, 0.5}, lmax{3.0, 3.0}, mixed{1.0, 2.5};
  std::vector<double> prev = dual_update(mixed, std::vector<double>{-5.0, -5.0}, 0.7, b, lmax);
  for (double g = -4.9; g < 6.0; g += 0.1) {
    const auto cur = dual_update(mixed, std::vector<double>{g, g}, 0.7, b, lmax);
    for (std::size_t k = 0; k < 2; ++k) CHECK(cur[k] >= prev[k]);
    prev = cur;
  }
}

TEST_CASE("dual critic recursion and purity") {
  const std::vector<double> g_hat{0.2, 0.4}, g{1.0, 0.0};
  const auto a = dual_critic_update(g_hat, g, 0.25);
  CHECK(a[0] == doctest::Approx(0.4));
  CHECK(a[1] == doctest::Approx(0.3));
  CHECK(dual_critic_update(g_hat, g, 0.25) == a);
  const std::vector<double> w{0.1, 0.2}, phi{1.0, 0.5};
  const auto c1 = critic_update(w, 0.3, 0.9, phi, phi, 0.1), c2 = critic_update(w, 0.3, 0.9, phi, phi, 0.1);
  CHECK(c1.w_tilde == c2.w_tilde);
  CHECK(c1.td_error == c2.td_error);
}
