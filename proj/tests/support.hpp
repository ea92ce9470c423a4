#pragma once

// Helpers shared by the unit and acceptance tests.

#include <unistd.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cmarl/cmg.hpp"
#include "cmarl/network.hpp"
#include "cmarl/trainer.hpp"
#include "reference_ac.hpp"

namespace testing {

/// Random game with strictly positive transitions (so every policy is ergodic), costs and
/// constraint costs uniform on [0, 1] and bounds uniform on [0.3, 0.7].
inline cmarl::TabularCMG random_cmg(std::uint64_t seed, std::size_t N, std::size_t S, std::size_t m, std::size_t K,
                                    double noise = 0.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cmarl::GameShape shape{N, S, K, std::vector<std::size_t>(N, m)};
  const std::size_t A = shape.num_joint_actions();
  std::vector<double> P(S * A * S), c(N * S * A), g(N * K * S * A), b(K);
  for (std::size_t r = 0; r < S * A; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < S; ++j) total += (P[r * S + j] = 0.05 + u(gen));
    for (std::size_t j = 0; j < S; ++j) P[r * S + j] /= total;
  }
  for (auto& x : c) x = u(gen);
  for (auto& x : g) x = u(gen);
  for (auto& x : b) x = 0.3 + 0.4 * u(gen);
  return cmarl::TabularCMG(shape, P, c, g, b, noise);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cmarl_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Copies the tables and settings of a K = 0 training setup into the reference's own format.
inline ReferenceProblem reference_problem(const cmarl::TabularCMG& g, const cmarl::MixingMatrix& C,
                                          const cmarl::TrainConfig& cfg) {
  ReferenceProblem p;
  const auto& sh = g.shape();
  p.agents = sh.num_agents;
  p.states = sh.num_states;
  p.actions = sh.actions_per_agent.front();
  p.transition = g.transition_table();
  p.cost = g.cost_table();
  p.noise = g.cost_noise();
  p.mixing = C.weights();
  p.seed = cfg.seed;
  p.feature_seed = cfg.features.seed;
  p.critic_dim = cfg.features.critic_dim;
  p.policy_dim = cfg.features.policy_dim;
  p.feature_low = cfg.features.low;
  p.feature_high = cfg.features.high;
  p.p_alpha = cfg.schedule.p_alpha;
  p.p_beta = cfg.schedule.p_beta;
  p.t0 = cfg.schedule.t0;
  p.theta_max = cfg.theta_max;
  p.initial_state = cfg.initial_state;
  return p;
}

/// Number of (agent, coordinate) positions where trainer and reference differ bitwise.
inline std::size_t reference_mismatches(const cmarl::Trainer& t, const ReferenceActorCritic& r) {
  std::size_t bad = 0;
  const auto& agents = t.agents();
  for (std::size_t n = 0; n < agents.size(); ++n) {
    for (std::size_t j = 0; j < agents[n].theta().size(); ++j) bad += agents[n].theta()[j] != r.theta()[n][j];
    for (std::size_t j = 0; j < agents[n].w().size(); ++j) bad += agents[n].w()[j] != r.w()[n][j];
    bad += agents[n].avg_cost != r.avg_cost()[n];
  }
  bad += t.objective_estimate() != r.objective();
  bad += t.current_state() != r.state();
  return bad;
}

}  // namespace testing
