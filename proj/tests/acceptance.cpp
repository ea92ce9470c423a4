// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "cmarl/config.hpp"
#include "cmarl/duality.hpp"
#include "cmarl/experiment.hpp"
#include "cmarl/metrics_io.hpp"
#include "cmarl/oracle.hpp"
#include "support.hpp"

using namespace cmarl;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Cournot game at the experiment defaults, seed 7, 2 x 10^5 iterations.
const json kCournotRun = {{"environment", "cournot-defaults"}, {"seed", 7}};
constexpr double kConsensusTol = 0.05;
constexpr double kGapTol = 0.05;
constexpr double kCriticRelTol = 0.05;

struct CournotResult {
  double lambda_perp = 0, lambda_pairwise = 0, gap_tail_mean = 0, lambda_mean = 0, lambda_max = 0;
  double critic_perp = 0, critic_scale = 0, seconds = 0;
  std::uint64_t steps = 0;
};

CournotResult run_cournot() {
  const auto cfg = parse_config(kCournotRun);
  auto env = build_environment(cfg.environment);
  const std::size_t N = env->shape().num_agents;
  Trainer t(env, build_mixing(cfg.topology, N, cfg.seed), build_train_config(cfg));
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t H = cfg.trainer.horizon, tail_start = H - H / 10;
  double tail = 0.0;
  std::uint64_t tail_n = 0;
  const double b = env->bounds()[0];
  while (!t.finished()) {
    t.step();
    if (t.step_count() > tail_start) {
      double g = 0.0;
      for (const auto& ag : t.agents()) g += ag.g_hat[0];
      tail += g / static_cast<double>(N) - b;
      ++tail_n;
    }
  }
  CournotResult r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto m = t.metrics();
  r.steps = m.step;
  r.lambda_perp = m.lambda_disagreement;
  r.lambda_pairwise = m.lambda_max_pairwise;
  r.gap_tail_mean = tail / static_cast<double>(tail_n);
  r.lambda_mean = m.lambda_mean[0];
  r.lambda_max = cfg.trainer.lambda_max[0];
  r.critic_perp = m.critic_disagreement;
  r.critic_scale = m.critic_mean_norm * std::sqrt(static_cast<double>(N));
  return r;
}

Outcome criterion1(const CournotResult& r) {
  return {r.steps == 200'000 && r.lambda_perp <= kConsensusTol && r.lambda_pairwise <= kConsensusTol,
          fmt("||lambda_perp|| = %.3g, max pairwise = %.3g (tol 0.05) after %.0f steps in %.1f s", r.lambda_perp,
              r.lambda_pairwise, static_cast<double>(r.steps), r.seconds)};
}

Outcome criterion2(const CournotResult& r) {
  const bool interior = r.lambda_mean > 0.0 && r.lambda_mean < r.lambda_max;
  return {r.gap_tail_mean <= kGapTol && interior,
          fmt("final-10%% mean of <G_hat> - b = %.3g (tol 0.05); <lambda_hat> = %.4g in (0, %.3g)", r.gap_tail_mean,
              r.lambda_mean, r.lambda_max)};
}

Outcome criterion3(const CournotResult& r) {
  const double rel = r.critic_scale > 0 ? r.critic_perp / r.critic_scale : INFINITY;
  return {rel <= kCriticRelTol,
          fmt("||w_perp|| = %.3g, ||<w>|| sqrt(N) = %.3g, ratio %.3g (tol 0.05)", r.critic_perp, r.critic_scale, rel)};
}

std::vector<SoftmaxPolicy> random_policies(const GameShape& sh, std::uint64_t seed) {
  FeatureSpec spec;
  spec.seed = seed;
  spec.policy_dim = 4;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<SoftmaxPolicy> out;
  for (std::size_t n = 0; n < sh.num_agents; ++n) {
    auto f = std::make_shared<const FeatureTable>(make_policy_features(spec, n, sh.num_states, sh.actions_per_agent[n]));
    std::vector<double> theta(spec.policy_dim);
    for (auto& x : theta) x = u(gen);
    out.emplace_back(f, sh.actions_per_agent[n], theta, 50.0);
  }
  return out;
}

Outcome criterion4() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  const int instances = 20;
  for (int i = 0; i < instances; ++i) {
    const auto g = testing::random_cmg(1000 + i, 2, 3, 2, 1);
    auto pols = random_policies(g.shape(), 500 + i);
    std::mt19937_64 gen(i);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    const std::vector<double> hat{u(gen), u(gen)};
    const auto grad = exact_policy_gradient(g, pols, hat);
    const double h = 1e-5;
    for (std::size_t n = 0; n < 2; ++n) {
      double err = 0.0, norm = 0.0;
      for (std::size_t j = 0; j < grad[n].size(); ++j) {
        auto plus = pols, minus = pols;
        plus[n].mutable_theta()[j] += h;
        minus[n].mutable_theta()[j] -= h;
        const double fd = (decomposed_lagrangian(g, plus, hat) - decomposed_lagrangian(g, minus, hat)) / (2 * h);
        err += (fd - grad[n][j]) * (fd - grad[n][j]);
        norm += grad[n][j] * grad[n][j];
      }
      worst = std::max(worst, std::sqrt(err) / std::sqrt(norm));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-4 && secs < 30.0,
          fmt("%.0f instances, worst relative error %.3g (tol 1e-4) in %.2f s (limit 30)", instances, worst, secs)};
}

Outcome criterion5() {
  const auto g = testing::random_cmg(77, 2, 3, 2, 2, 0.05);
  const auto pi = PolicyTable::uniform(g.shape());
  const auto exact = exact_agent_constraints(g, pi);
  const auto est = simulate_dual_critic(g, pi, 100'000, 0.6, 2024);
  double worst = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) worst = std::max(worst, std::abs(est[i] - exact[i]));
  return {worst < 0.02, fmt("max |G_hat_n - G_n| = %.3g over %.0f agent-constraint pairs (tol 0.02)", worst,
                            static_cast<double>(est.size()))};
}

Outcome criterion6() {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_sum = 0.0, worst_rho = 0.0, worst_growth = -INFINITY;
  int graphs = 0;
  for (std::size_t n : {3, 5, 8}) {
    for (const auto& topo : {Topology::complete(n), Topology::ring(n), Topology::star(n)}) {
      const auto C = metropolis_weights(topo);
      const auto& w = C.weights();
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0, col = 0;
        for (std::size_t j = 0; j < n; ++j) {
          row += w[i * n + j];
          col += w[j * n + i];
          if (w[i * n + j] < 0) worst_sum = INFINITY;
        }
        worst_sum = std::max({worst_sum, std::abs(row - 1), std::abs(col - 1)});
      }
      worst_rho = std::max(worst_rho, C.rho());
      for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(n * 3), y(n * 3);
        for (auto& v : x) v = z(gen);
        C.mix(x, 3, y);
        worst_growth = std::max(worst_growth, consensus_stats(y, 3).disagreement - consensus_stats(x, 3).disagreement);
      }
      ++graphs;
    }
  }
  return {worst_sum <= 1e-12 && worst_rho < 1.0 && worst_growth <= 0.0,
          fmt("%.0f graphs: max |row/col sum - 1| = %.2g, max rho = %.4g, max disagreement change = %.3g", graphs,
              worst_sum, worst_rho, worst_growth)};
}

Outcome criterion7() {
  const auto start = std::chrono::steady_clock::now();
  double worst_gap = INFINITY;
  int feasible = 0;
  for (int i = 0; feasible < 10 && i < 100; ++i) {
    const auto g = testing::random_cmg(3000 + i, 2, 2, 2, 1);
    DualityOptions opt;
    opt.lambda_max = {10.0};
    opt.policy_resolution = 11;
    const auto d = brute_force_duality(g, opt);
    if (!d.feasible) continue;
    ++feasible;
    worst_gap = std::min(worst_gap, d.gap);
  }
  double worst_slack = INFINITY;
  int pairs = 0;
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int inst = 0; inst < 5; ++inst) {
    const auto g = testing::random_cmg(4000 + inst, 2, 3, 2, 1);
    const double kappa = max_kemeny_over_grid(g, 6);
    Rng rng(40 + inst);
    for (int k = 0; k < 20; ++k) {
      const auto a = PolicyTable::random(g.shape(), rng), b = PolicyTable::random(g.shape(), rng);
      const std::vector<double> la{u(gen)}, lb{u(gen)};
      const auto r = verify_distance_bounds(g, a, b, la, lb, kappa);
      worst_slack = std::min({worst_slack, r.state_slack(), r.occupation_slack(), r.lagrangian_slack()});
      ++pairs;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {feasible == 10 && worst_gap >= -1e-6 && worst_slack >= -1e-10 && secs < 300.0,
          fmt("min duality gap %.3g over %.0f instances (tol -1e-6); min bound slack %.3g over %.0f pairs (tol -1e-10)",
              worst_gap, feasible, worst_slack, pairs) +
              fmt("; %.1f s", secs)};
}

Outcome criterion8() {
  const std::size_t N = 2;
  auto env = std::make_shared<TabularCMG>(testing::random_cmg(88, N, 3, 2, 0, 0.1));
  TrainConfig cfg;
  cfg.seed = 8;
  cfg.features.seed = 80;
  cfg.features.critic_dim = 6;
  cfg.features.policy_dim = 4;
  cfg.horizon = 10'000;
  const auto C = metropolis_weights(Topology::complete(N));
  Trainer t(env, MixingProcess(C), cfg);
  testing::ReferenceActorCritic ref(testing::reference_problem(*env, C, cfg));
  std::size_t bad = testing::reference_mismatches(t, ref);
  std::uint64_t first_bad = bad ? 0 : UINT64_MAX;
  while (!t.finished()) {
    t.step();
    ref.step();
    const auto m = testing::reference_mismatches(t, ref);
    if (m && first_bad == UINT64_MAX) first_bad = t.step_count();
    bad += m;
  }
  return {bad == 0 && t.step_count() == 10'000,
          bad == 0 ? fmt("%.0f steps, 2 agents, K = 0: every parameter bit-identical to the reference",
                         static_cast<double>(t.step_count()))
                   : fmt("%.0f mismatching values, first at step %.0f", static_cast<double>(bad),
                         static_cast<double>(first_bad))};
}

Outcome criterion9() {
  const auto dir = testing::temp_dir("acceptance_det");
  testing::write_file(dir / "config.json", kCournotRun.dump(2));
  RunOptions a{dir / "a", {}, false, {}}, b{dir / "b", {}, false, {}};
  run_experiment(dir / "config.json", a);
  run_experiment(dir / "config.json", b);
  const auto ma = testing::slurp(dir / "a" / kMetricsFile), mb = testing::slurp(dir / "b" / kMetricsFile);
  const auto la = testing::slurp(dir / "a" / kLambdasFile), lb = testing::slurp(dir / "b" / kLambdasFile);
  const bool same = !ma.empty() && ma == mb && la == lb;
  std::filesystem::remove_all(dir);
  return {same, fmt("metrics.csv %.0f bytes, lambdas.csv %.0f bytes; identical: ", static_cast<double>(ma.size()),
                    static_cast<double>(la.size())) +
                    (same ? "yes" : "no")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s - %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };

  CournotResult cournot;
  bool cournot_ok = true;
  std::string cournot_error;
  try {
    cournot = run_cournot();
  } catch (const std::exception& e) {
    cournot_ok = false;
    cournot_error = e.what();
  }
  auto from_run = [&](Outcome (*f)(const CournotResult&)) {
    return [&, f] { return cournot_ok ? f(cournot) : Outcome{false, "training run failed: " + cournot_error}; };
  };
  report(1, from_run(criterion1));
  report(2, from_run(criterion2));
  report(3, from_run(criterion3));
  report(4, criterion4);
  report(5, criterion5);
  report(6, criterion6);
  report(7, criterion7);
  report(8, criterion8);
  report(9, criterion9);
  std::printf("%d of 9 criteria passed\n", 9 - failed);
  return failed ? 1 : 0;
}
