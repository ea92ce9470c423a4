#include "cmarl/cmarl.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "cmarl/checkpoint.hpp"
#include "cmarl/cmg_io.hpp"
#include "cmarl/config.hpp"
#include "cmarl/cournot.hpp"
#include "cmarl/errors.hpp"
#include "cmarl/experiment.hpp"
#include "cmarl/report.hpp"

struct cmarl_env {
  std::shared_ptr<const cmarl::Environment> env;
};

struct cmarl_trainer {
  std::unique_ptr<cmarl::Trainer> trainer;
};

namespace {

thread_local std::string g_last_error;

cmarl_status fail(cmarl_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
cmarl_status guard(F&& f) {
  try {
    f();
    return CMARL_OK;
  } catch (const cmarl::Error& e) {
    return fail(static_cast<cmarl_status>(static_cast<int>(e.kind())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(CMARL_ERR_CONFIG, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(CMARL_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CMARL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CMARL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CMARL_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw cmarl::InvalidArgument(std::string(name) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* cmarl_version(void) { return CMARL_VERSION_STRING; }

const char* cmarl_status_string(cmarl_status status) {
  switch (status) {
    case CMARL_OK: return "ok";
    case CMARL_ERR_INTERNAL: return "internal error";
    default: break;
  }
  const int v = static_cast<int>(status);
  if (v >= 1 && v <= 7) return cmarl::to_string(static_cast<cmarl::ErrorKind>(v));
  return "unknown status";
}

const char* cmarl_last_error(void) { return g_last_error.c_str(); }

void cmarl_string_free(char* s) { std::free(s); }

cmarl_status cmarl_run_experiment(const char* config_path, const char* output_dir, const char* resume_checkpoint,
                                  int emit_charts, cmarl_progress_fn progress, void* user,
                                  cmarl_run_summary* summary) {
  return guard([&] {
    require(config_path, "config_path");
    cmarl::RunOptions opt;
    if (output_dir) opt.output_dir = output_dir;
    if (resume_checkpoint) opt.resume = resume_checkpoint;
    opt.charts = emit_charts != 0;
    if (progress) {
      opt.progress = [progress, user](const cmarl::MetricsRecord& r) {
        progress(r.step, r.objective, r.lambda_disagreement, user);
      };
    }
    const cmarl::RunSummary s = cmarl::run_experiment(config_path, opt);
    if (summary) {
      const auto& m = s.final_metrics;
      *summary = {s.steps,           s.stopped_early ? 1 : 0, m.objective,       m.lambda_disagreement,
                  m.lambda_max_pairwise, m.critic_disagreement, m.critic_mean_norm};
    }
  });
}

cmarl_status cmarl_validate_config(const char* config_path, char** report_json, int* ok) {
  return guard([&] {
    require(config_path, "config_path");
    require(report_json, "report_json");
    const auto report = cmarl::validate_experiment(config_path);
    if (ok) *ok = report.at("ok").get<bool>() ? 1 : 0;
    *report_json = copy_string(report.dump(2));
  });
}

cmarl_status cmarl_oracle_report(const char* config_path, char** report_json) {
  return guard([&] {
    require(config_path, "config_path");
    require(report_json, "report_json");
    *report_json = copy_string(cmarl::oracle_report(std::filesystem::path(config_path)).dump(2));
  });
}

cmarl_status cmarl_emit_report(const char* run_dir) {
  return guard([&] {
    require(run_dir, "run_dir");
    cmarl::emit_report(run_dir);
  });
}

cmarl_status cmarl_config_resolve(const char* config_path, char** config_json) {
  return guard([&] {
    require(config_path, "config_path");
    require(config_json, "config_json");
    *config_json = copy_string(cmarl::config_to_json(cmarl::load_config(config_path).config).dump(2));
  });
}

cmarl_status cmarl_env_cournot(const char* config_json, cmarl_env** out) {
  return guard([&] {
    require(out, "out");
    cmarl::CournotConfig cfg;
    if (config_json) cfg = cmarl::parse_cournot_config(nlohmann::json::parse(config_json));
    *out = new cmarl_env{std::make_shared<cmarl::CournotGame>(cfg)};
  });
}

cmarl_status cmarl_env_load(const char* path, cmarl_env** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cmarl_env{std::make_shared<cmarl::TabularCMG>(cmarl::load_cmg(path))};
  });
}

cmarl_status cmarl_env_save(const cmarl_env* env, const char* path, size_t cell_budget) {
  return guard([&] {
    require(env, "env");
    require(path, "path");
    if (auto tab = std::dynamic_pointer_cast<const cmarl::TabularCMG>(env->env)) {
      cmarl::save_cmg(*tab, path);
    } else {
      cmarl::save_cmg(cmarl::TabularCMG::materialize(*env->env, cell_budget), path);
    }
  });
}

cmarl_status cmarl_env_shape(const cmarl_env* env, cmarl_shape* out) {
  return guard([&] {
    require(env, "env");
    require(out, "out");
    const auto& sh = env->env->shape();
    *out = {sh.num_agents, sh.num_states, sh.num_constraints, sh.num_joint_actions()};
  });
}

cmarl_status cmarl_env_actions(const cmarl_env* env, size_t agent, size_t* out) {
  return guard([&] {
    require(env, "env");
    require(out, "out");
    const auto& sh = env->env->shape();
    if (agent >= sh.num_agents) throw cmarl::IndexError("agent " + std::to_string(agent) + " is out of range");
    *out = sh.actions_per_agent[agent];
  });
}

cmarl_status cmarl_env_validate(const cmarl_env* env, char** report_json, int* ok) {
  return guard([&] {
    require(env, "env");
    require(report_json, "report_json");
    const auto report = cmarl::validate(*env->env);
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& i : report.issues) {
      issues.push_back({{"kind", cmarl::to_string(i.kind)}, {"fatal", i.fatal}, {"message", i.message}});
    }
    if (ok) *ok = report.ok() ? 1 : 0;
    *report_json = copy_string(nlohmann::json{{"ok", report.ok()}, {"issues", issues}}.dump(2));
  });
}

void cmarl_env_free(cmarl_env* env) { delete env; }

cmarl_status cmarl_mixing_metropolis(const char* topology, size_t n, double* weights, size_t capacity, double* rho) {
  return guard([&] {
    require(topology, "topology");
    require(weights, "weights");
    if (capacity < n * n) throw cmarl::InvalidArgument("weights capacity " + std::to_string(capacity) + " < n*n");
    const std::string kind = topology;
    const cmarl::Topology t = kind == "complete" ? cmarl::Topology::complete(n)
                              : kind == "ring"   ? cmarl::Topology::ring(n)
                              : kind == "star"   ? cmarl::Topology::star(n)
                                                 : throw cmarl::ConfigError("unknown topology '" + kind + "'");
    const auto C = cmarl::metropolis_weights(t);
    std::copy(C.weights().begin(), C.weights().end(), weights);
    if (rho) *rho = C.rho();
  });
}

cmarl_status cmarl_trainer_create(const char* config_path, cmarl_trainer** out) {
  return guard([&] {
    require(config_path, "config_path");
    require(out, "out");
    const auto cfg = cmarl::load_config(config_path).config;
    auto env = cmarl::build_environment(cfg.environment);
    auto mixing = cmarl::build_mixing(cfg.topology, env->shape().num_agents, cfg.seed);
    *out = new cmarl_trainer{std::make_unique<cmarl::Trainer>(env, std::move(mixing), cmarl::build_train_config(cfg))};
  });
}

cmarl_status cmarl_trainer_step(cmarl_trainer* t, uint64_t steps) {
  return guard([&] {
    require(t, "trainer");
    for (uint64_t i = 0; i < steps && !t->trainer->finished(); ++i) t->trainer->step();
  });
}

cmarl_status cmarl_trainer_metrics(const cmarl_trainer* t, cmarl_metrics* out) {
  return guard([&] {
    require(t, "trainer");
    require(out, "out");
    const auto m = t->trainer->metrics();
    *out = {m.step,
            m.objective,
            m.lambda_disagreement,
            m.lambda_max_pairwise,
            m.critic_disagreement,
            m.critic_mean_norm,
            m.step_sizes.alpha,
            m.step_sizes.beta,
            m.step_sizes.gamma};
  });
}

cmarl_status cmarl_trainer_gaps(const cmarl_trainer* t, double* g_gap, double* lambda_mean, size_t capacity) {
  return guard([&] {
    require(t, "trainer");
    const auto m = t->trainer->metrics();
    if (capacity < m.g_gap.size()) throw cmarl::InvalidArgument("capacity is smaller than the constraint count");
    if (g_gap) std::copy(m.g_gap.begin(), m.g_gap.end(), g_gap);
    if (lambda_mean) std::copy(m.lambda_mean.begin(), m.lambda_mean.end(), lambda_mean);
  });
}

cmarl_status cmarl_trainer_lambdas(const cmarl_trainer* t, double* out, size_t capacity, size_t* written) {
  return guard([&] {
    require(t, "trainer");
    const auto l = t->trainer->lambdas();
    if (written) *written = l.size();
    if (capacity < l.size()) throw cmarl::InvalidArgument("capacity " + std::to_string(capacity) + " < " + std::to_string(l.size()));
    if (!l.empty()) {
      require(out, "out");
      std::copy(l.begin(), l.end(), out);
    }
  });
}

cmarl_status cmarl_trainer_save_checkpoint(const cmarl_trainer* t, const char* path) {
  return guard([&] {
    require(t, "trainer");
    require(path, "path");
    cmarl::save_checkpoint(*t->trainer, path);
  });
}

cmarl_status cmarl_trainer_load_checkpoint(cmarl_trainer* t, const char* path) {
  return guard([&] {
    require(t, "trainer");
    require(path, "path");
    cmarl::load_checkpoint(*t->trainer, path);
  });
}

int cmarl_trainer_finished(const cmarl_trainer* t) { return t && t->trainer->finished() ? 1 : 0; }

void cmarl_trainer_free(cmarl_trainer* t) { delete t; }

}  // extern "C"
