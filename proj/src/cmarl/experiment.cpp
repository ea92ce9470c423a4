#include "cmarl/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>

#include "cmarl/checkpoint.hpp"
#include "cmarl/cmg_io.hpp"
#include "cmarl/cournot.hpp"
#include "cmarl/duality.hpp"
#include "cmarl/errors.hpp"
#include "cmarl/metrics_io.hpp"
#include "cmarl/oracle.hpp"
#include "cmarl/report.hpp"

namespace cmarl {

using nlohmann::json;

std::shared_ptr<const Environment> build_environment(const EnvironmentSpec& spec) {
  std::shared_ptr<const Environment> env;
  if (spec.kind == EnvironmentSpec::Kind::kCournot) {
    if (spec.lazy) {
      env = std::make_shared<CournotGame>(spec.cournot);
    } else {
      env = std::make_shared<TabularCMG>(build_tabular(spec.cournot, spec.cell_budget));
    }
  } else {
    auto game = load_cmg(spec.path);
    const auto& sh = game.shape();
    if (sh.num_pairs() > spec.cell_budget / sh.num_states) {
      throw BudgetError("game file '" + spec.path.string() + "' exceeds the cell budget of " +
                        std::to_string(spec.cell_budget));
    }
    env = std::make_shared<TabularCMG>(std::move(game));
  }
  return spec.normalize_costs ? normalize_costs(env) : env;
}

MixingProcess build_mixing(const TopologySpec& spec, std::size_t N, std::uint64_t run_seed) {
  auto topology = [&]() {
    switch (spec.kind) {
      case TopologyKind::kComplete: return Topology::complete(N);
      case TopologyKind::kRing: return Topology::ring(N);
      case TopologyKind::kStar: return Topology::star(N);
      case TopologyKind::kRandomGeometric: {
        Rng rng(spec.seed.value_or(derive_seed(run_seed, 3)));
        return Topology::random_geometric(N, spec.radius, rng);
      }
      case TopologyKind::kCustom: break;
    }
    return Topology(N, spec.edges, TopologyKind::kCustom);
  }();
  return MixingProcess(std::move(topology), spec.time_varying);
}

TrainConfig build_train_config(const ExperimentConfig& c) {
  TrainConfig t;
  t.features = c.features;
  t.schedule = c.schedule;
  t.seed = c.seed;
  t.horizon = c.trainer.horizon;
  t.lambda_max = c.trainer.lambda_max;
  t.theta_max = c.trainer.theta_max;
  t.metrics_every = c.trainer.metrics_every;
  t.initial_state = c.trainer.initial_state;
  t.advantage_state = c.trainer.advantage_state;
  t.early_stop = c.trainer.early_stop;
  return t;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw InvalidArgument("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file '" + path.string() + "' does not exist");
  LoadedConfig out;
  out.bytes = read_text_file(path);
  json doc;
  try {
    doc = json::parse(out.bytes);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  out.config = parse_config(doc, std::filesystem::absolute(path).parent_path());
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class DirectoryLock {
 public:
  explicit DirectoryLock(std::filesystem::path path) : path_(std::move(path)) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw IoError("output directory is in use: lock file '" + path_.string() +
                      "' exists (remove it if no run is active)");
      }
      throw IoError("cannot create lock file '" + path_.string() + "': " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

void write_json(const std::filesystem::path& path, const json& doc) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

json metrics_json(const MetricsRecord& r, std::size_t N) {
  const double scale = r.critic_mean_norm * std::sqrt(static_cast<double>(N));
  return {{"step", r.step},
          {"J", r.objective},
          {"G_gap", r.g_gap},
          {"lambda_mean", r.lambda_mean},
          {"lambda_disagreement", r.lambda_disagreement},
          {"lambda_max_pairwise", r.lambda_max_pairwise},
          {"critic_disagreement", r.critic_disagreement},
          {"critic_mean_norm", r.critic_mean_norm},
          {"critic_relative_disagreement", scale > 0 ? json(r.critic_disagreement / scale) : json(nullptr)}};
}

}  // namespace

RunSummary run_experiment(const std::filesystem::path& config_path, const RunOptions& options) {
  const LoadedConfig loaded = load_config(config_path);
  const ExperimentConfig& cfg = loaded.config;
  const auto out_dir = options.output_dir ? *options.output_dir : cfg.output_dir.value_or(std::filesystem::path{});
  if (out_dir.empty()) throw ConfigError("no output directory: set 'output_dir' or pass one explicitly");
  std::filesystem::create_directories(out_dir);
  DirectoryLock lock(out_dir / kLockFile);

  RunSummary summary;
  summary.output_dir = out_dir;
  summary.config_sha256 = sha256_hex(loaded.bytes);
  const std::string started = utc_now();
  write_json(out_dir / kResolvedConfigFile, config_to_json(cfg));

  auto env = build_environment(cfg.environment);
  const std::size_t N = env->shape().num_agents, K = env->shape().num_constraints;
  Trainer trainer(env, build_mixing(cfg.topology, N, cfg.seed), build_train_config(cfg));
  std::optional<std::uint64_t> resumed_from;
  if (options.resume) {
    load_checkpoint(trainer, *options.resume);
    resumed_from = trainer.step_count();
  }
  auto writer = resumed_from ? std::make_unique<MetricsWriter>(out_dir, N, K, *resumed_from)
                             : std::make_unique<MetricsWriter>(out_dir, N, K);

  auto record = [&](const MetricsRecord& r) {
    writer->write(r);
    if (options.progress) options.progress(r);
  };
  auto checkpoint = [&](const std::filesystem::path& path) {
    const auto tmp = path.string() + ".tmp";
    save_checkpoint(trainer, tmp);
    std::filesystem::rename(tmp, path);
  };

  json manifest = {{"format", "cmarl-run-manifest"},
                   {"version", CMARL_VERSION_STRING},
                   {"config_path", std::filesystem::absolute(config_path).string()},
                   {"config_sha256", summary.config_sha256},
                   {"seed", cfg.seed},
                   {"started", started}};
  if (resumed_from) manifest["resumed_from_step"] = *resumed_from;

  const auto every = trainer.config().metrics_every;
  const auto ckpt_every = cfg.trainer.checkpoint_every;
  try {
    if (trainer.step_count() == 0) record(trainer.metrics());
    while (!trainer.finished()) {
      trainer.step();
      const auto t = trainer.step_count();
      if (t % every == 0 || trainer.finished()) record(trainer.metrics());
      if (ckpt_every && t % ckpt_every == 0) checkpoint(out_dir / kCheckpointFile);
    }
  } catch (const NumericalFault& fault) {
    writer->flush();
    save_checkpoint(trainer, out_dir / kFaultCheckpointFile);
    manifest["finished"] = utc_now();
    manifest["status"] = "fault";
    manifest["fault"] = {{"step", fault.step()}, {"message", fault.what()}};
    write_json(out_dir / kManifestFile, manifest);
    throw;
  }
  writer->flush();
  writer.reset();
  if (ckpt_every) checkpoint(out_dir / kCheckpointFile);

  summary.steps = trainer.step_count();
  summary.stopped_early = trainer.stopped_early();
  summary.final_metrics = trainer.metrics();
  manifest["finished"] = utc_now();
  manifest["status"] = summary.stopped_early ? "stopped_early" : "completed";
  manifest["steps"] = summary.steps;
  manifest["final"] = metrics_json(summary.final_metrics, N);
  manifest["resolved_config"] = config_to_json(cfg);
  if (options.charts) emit_report(out_dir);
  write_json(out_dir / kManifestFile, manifest);
  return summary;
}

json validate_experiment(const std::filesystem::path& config_path) {
  const LoadedConfig loaded = load_config(config_path);
  const ExperimentConfig& cfg = loaded.config;
  json report;
  report["config_sha256"] = sha256_hex(loaded.bytes);
  report["resolved_config"] = config_to_json(cfg);
  bool ok = true;

  const auto sched = cfg.schedule.violations();
  report["schedule"] = {{"ok", sched.empty()}, {"violations", sched}};
  ok = ok && sched.empty();

  auto env = build_environment(cfg.environment);
  const GameShape& sh = env->shape();
  report["environment"]["shape"] = {{"num_agents", sh.num_agents},
                                    {"num_states", sh.num_states},
                                    {"num_constraints", sh.num_constraints},
                                    {"actions_per_agent", sh.actions_per_agent},
                                    {"num_pairs", sh.num_pairs()}};

  json mixing;
  try {
    const MixingProcess proc = build_mixing(cfg.topology, sh.num_agents, cfg.seed);
    const auto& C = proc.current();
    const auto viol = assumption6_violations(C.size(), C.weights());
    mixing = {{"ok", viol.empty()},
              {"topology", to_string(proc.base().kind())},
              {"edges", proc.base().edges().size()},
              {"time_varying", proc.time_varying()},
              {"violations", viol},
              {"eta", proc.min_eta(cfg.seed)},
              {"rho", proc.expected_rho(cfg.seed)}};
    ok = ok && viol.empty();
  } catch (const ConfigError& e) {
    mixing = {{"ok", false}, {"violations", {e.what()}}};
    ok = false;
  }
  report["mixing"] = mixing;

  if (cfg.trainer.initial_state >= sh.num_states) {
    report["trainer"] = {{"ok", false}, {"violations", {"initial_state is out of range"}}};
    ok = false;
  }

  const ValidationReport vr = validate(*env);
  json issues = json::array();
  for (const auto& i : vr.issues) {
    json item = {{"kind", to_string(i.kind)}, {"fatal", i.fatal}, {"message", i.message}};
    if (i.state) item["state"] = *i.state;
    if (i.joint_action) item["joint_action"] = *i.joint_action;
    issues.push_back(item);
  }
  report["environment"]["ok"] = vr.ok();
  report["environment"]["issues"] = issues;
  ok = ok && vr.ok();
  report["ok"] = ok;
  return report;
}

namespace {

template <typename F>
json guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return {{"error", e.what()}, {"kind", to_string(e.kind())}};
  }
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

json oracle_report(const ExperimentConfig& cfg) {
  auto env = build_environment(cfg.environment);
  const GameShape& sh = env->shape();
  const std::size_t N = sh.num_agents, K = sh.num_constraints;
  json report;
  report["pairs"] = sh.num_pairs();
  report["pair_budget"] = cfg.oracle.pair_budget;
  try {
    check_oracle_size(*env, cfg.oracle.pair_budget);
  } catch (const BudgetError& e) {
    report["within_budget"] = false;
    report["note"] = e.what();
    return report;
  }
  report["within_budget"] = true;

  const PolicyTable uniform = PolicyTable::uniform(sh);
  const std::vector<double> zero(K, 0.0);
  std::vector<double> half(K);
  for (std::size_t k = 0; k < K; ++k) half[k] = 0.5 * cfg.trainer.lambda_max[k];
  std::vector<double> half_agents;
  for (std::size_t n = 0; n < N; ++n) half_agents.insert(half_agents.end(), half.begin(), half.end());

  report["uniform_policy"] = guarded([&] {
    const ExactEval e = exact_values(*env, uniform, half);
    const DifferentialQ q = differential_q(*env, uniform, half_agents);
    const KemenyResult kem = kemeny_constant(induced_chain(*env, uniform));
    return json{{"lambda", half},
                {"stationary", to_json(e.d)},
                {"J", e.J},
                {"G", e.G},
                {"lagrangian", e.lagrangian},
                {"decomposed_lagrangian", q.value},
                {"q_residual", q.residual},
                {"q_normalization", q.normalization},
                {"kemeny", {{"kappa", kem.kappa}, {"spread", kem.spread}, {"convention", KemenyResult::kConvention}}}};
  });

  Rng rng(derive_seed(cfg.seed, 4));
  report["policy_gradient"] = guarded([&] {
    std::vector<SoftmaxPolicy> policies;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t m = sh.actions_per_agent[n];
      auto feats = std::make_shared<const FeatureTable>(make_policy_features(cfg.features, n, sh.num_states, m));
      std::vector<double> theta(cfg.features.policy_dim);
      for (double& x : theta) x = rng.uniform(-1.0, 1.0);
      policies.emplace_back(feats, m, theta, cfg.trainer.theta_max);
    }
    const auto grad = exact_policy_gradient(*env, policies, half_agents);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t j = 0; j < grad[n].size(); ++j) {
        auto plus = policies, minus = policies;
        plus[n].mutable_theta()[j] += h;
        minus[n].mutable_theta()[j] -= h;
        const double fd = (decomposed_lagrangian(*env, plus, half_agents) -
                           decomposed_lagrangian(*env, minus, half_agents)) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[n][j]) / std::max(1e-8, std::abs(fd) + std::abs(grad[n][j])));
      }
    }
    return json{{"gradient", grad}, {"finite_difference_step", h}, {"max_relative_error", worst}};
  });

  std::optional<double> kappa_grid;
  report["kemeny_grid"] = guarded([&] {
    const double k = max_kemeny_over_grid(*env, cfg.oracle.kemeny_resolution);
    kappa_grid = k;
    return json{{"resolution", cfg.oracle.kemeny_resolution}, {"kappa_star", k}, {"convention", KemenyResult::kConvention}};
  });

  report["bounds"] = guarded([&] {
    const PolicyTable other = PolicyTable::random(sh, rng);
    const BoundReport b = verify_distance_bounds(*env, uniform, other, half, zero, kappa_grid);
    return json{{"epsilon", b.epsilon},
                {"kappa_star", b.kappa_star},
                {"kappa_proxy", b.kappa_proxy},
                {"kemeny_convention", KemenyResult::kConvention},
                {"state_l1", b.state_l1},
                {"state_bound", b.state_bound},
                {"state_slack", b.state_slack()},
                {"occupation_l1", b.occupation_l1},
                {"occupation_bound", b.occupation_bound},
                {"occupation_slack", b.occupation_slack()},
                {"lagrangian_diff", b.lagrangian_diff},
                {"lagrangian_bound", b.lagrangian_bound},
                {"lagrangian_slack", b.lagrangian_slack()}};
  });

  report["duality"] = guarded([&] {
    DualityOptions opt;
    opt.policy_resolution = cfg.oracle.policy_resolution;
    opt.lambda_resolution = cfg.oracle.lambda_resolution;
    opt.lambda_max = cfg.trainer.lambda_max;
    opt.slater_margins = cfg.oracle.slater_margins;
    const DualityEstimate d = brute_force_duality(*env, opt);
    json out{{"feasible", d.feasible}, {"policies", d.policies}, {"note", d.note}};
    if (d.feasible) {
      out["primal"] = d.primal;
      out["dual"] = d.dual;
      out["gap"] = d.gap;
      out["best_lambda"] = d.best_lambda;
      if (!d.lambda_bound.empty()) out["lambda_bound"] = d.lambda_bound;
    }
    return out;
  });

  report["dual_critic"] = guarded([&] {
    const auto exact = exact_agent_constraints(*env, uniform);
    const auto sim = simulate_dual_critic(*env, uniform, cfg.oracle.simulation_steps, cfg.schedule.p_alpha,
                                          derive_seed(cfg.seed, 5), cfg.trainer.initial_state);
    double worst = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) worst = std::max(worst, std::abs(exact[i] - sim[i]));
    return json{{"steps", cfg.oracle.simulation_steps}, {"exact", exact}, {"estimate", sim}, {"max_abs_error", worst}};
  });
  return report;
}

json oracle_report(const std::filesystem::path& config_path) { return oracle_report(load_config(config_path).config); }

}  // namespace cmarl
