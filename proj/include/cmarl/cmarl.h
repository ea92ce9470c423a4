#ifndef CMARL_CMARL_H
#define CMARL_CMARL_H

/* C interface to the constrained multi-agent actor-critic library.
 *
 * Every function returns a cmarl_status. On failure the message is available from
 * cmarl_last_error() on the same thread until the next failing call there.
 * Strings returned through char** out-parameters are owned by the caller and must be
 * released with cmarl_string_free(). Handles are not thread-safe; distinct handles may
 * be used from distinct threads. */

#include <stddef.h>
#include <stdint.h>

#if defined(CMARL_BUILDING_LIBRARY)
#define CMARL_API __attribute__((visibility("default")))
#else
#define CMARL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cmarl_status {
  CMARL_OK = 0,
  CMARL_ERR_INVALID_ARGUMENT = 1,
  CMARL_ERR_CONFIG = 2,
  CMARL_ERR_IO = 3,
  CMARL_ERR_INDEX = 4,
  CMARL_ERR_NUMERICAL = 5, /* non-finite parameter during training */
  CMARL_ERR_ANALYSIS = 6,  /* reducible/periodic chain, singular system */
  CMARL_ERR_BUDGET = 7,    /* table or grid above its size budget */
  CMARL_ERR_INTERNAL = 99
} cmarl_status;

CMARL_API const char* cmarl_version(void);
CMARL_API const char* cmarl_status_string(cmarl_status status);
/* Empty string when no error has occurred on this thread. */
CMARL_API const char* cmarl_last_error(void);
CMARL_API void cmarl_string_free(char* s);

/* ---- Config-driven entry points ---------------------------------------- */

typedef struct cmarl_run_summary {
  uint64_t steps;
  int stopped_early;
  double objective;           /* running average cost J */
  double lambda_disagreement; /* ||lambda_perp|| */
  double lambda_max_pairwise;
  double critic_disagreement; /* ||w_perp|| */
  double critic_mean_norm;    /* ||<w>|| */
} cmarl_run_summary;

/* Called at every metrics row. */
typedef void (*cmarl_progress_fn)(uint64_t step, double objective, double lambda_disagreement, void* user);

/* output_dir overrides the config's output_dir; resume_checkpoint may be NULL.
 * summary may be NULL. */
CMARL_API cmarl_status cmarl_run_experiment(const char* config_path, const char* output_dir,
                                            const char* resume_checkpoint, int emit_charts,
                                            cmarl_progress_fn progress, void* user, cmarl_run_summary* summary);

/* JSON report; *ok is 1 when every check passed. */
CMARL_API cmarl_status cmarl_validate_config(const char* config_path, char** report_json, int* ok);
CMARL_API cmarl_status cmarl_oracle_report(const char* config_path, char** report_json);
/* Writes lambda.svg and costs.svg into run_dir from its metrics files. */
CMARL_API cmarl_status cmarl_emit_report(const char* run_dir);
/* Fully resolved config as JSON. */
CMARL_API cmarl_status cmarl_config_resolve(const char* config_path, char** config_json);

/* ---- Environments ------------------------------------------------------- */

typedef struct cmarl_env cmarl_env;

typedef struct cmarl_shape {
  size_t num_agents;
  size_t num_states;
  size_t num_constraints;
  size_t num_joint_actions;
} cmarl_shape;

/* Lazy Cournot game; config_json holds CournotConfig keys, NULL or "{}" for defaults. */
CMARL_API cmarl_status cmarl_env_cournot(const char* config_json, cmarl_env** out);
CMARL_API cmarl_status cmarl_env_load(const char* path, cmarl_env** out);
/* Materializes the game (subject to cell_budget transition cells) and writes it as JSON. */
CMARL_API cmarl_status cmarl_env_save(const cmarl_env* env, const char* path, size_t cell_budget);
CMARL_API cmarl_status cmarl_env_shape(const cmarl_env* env, cmarl_shape* out);
CMARL_API cmarl_status cmarl_env_actions(const cmarl_env* env, size_t agent, size_t* out);
/* JSON validation report; *ok is 1 when no fatal issue was found. */
CMARL_API cmarl_status cmarl_env_validate(const cmarl_env* env, char** report_json, int* ok);
CMARL_API void cmarl_env_free(cmarl_env* env);

/* ---- Mixing matrices ---------------------------------------------------- */

/* Metropolis weights on a named topology ("complete", "ring", "star"), row-major into
 * weights (capacity n*n). rho may be NULL. */
CMARL_API cmarl_status cmarl_mixing_metropolis(const char* topology, size_t n, double* weights, size_t capacity,
                                               double* rho);

/* ---- Trainers ----------------------------------------------------------- */

typedef struct cmarl_trainer cmarl_trainer;

typedef struct cmarl_metrics {
  uint64_t step;
  double objective;
  double lambda_disagreement;
  double lambda_max_pairwise;
  double critic_disagreement;
  double critic_mean_norm;
  double alpha, beta, gamma;
} cmarl_metrics;

/* Builds a trainer from an experiment config file (environment, topology and all). */
CMARL_API cmarl_status cmarl_trainer_create(const char* config_path, cmarl_trainer** out);
/* Runs up to `steps` iterations, stopping early at the horizon or an early stop. */
CMARL_API cmarl_status cmarl_trainer_step(cmarl_trainer* trainer, uint64_t steps);
CMARL_API cmarl_status cmarl_trainer_metrics(const cmarl_trainer* trainer, cmarl_metrics* out);
/* Per-constraint vectors of length K: <G_hat> - b and <lambda_hat>. */
CMARL_API cmarl_status cmarl_trainer_gaps(const cmarl_trainer* trainer, double* g_gap, double* lambda_mean,
                                          size_t capacity);
/* N x K agent-major multipliers; *written receives N*K. */
CMARL_API cmarl_status cmarl_trainer_lambdas(const cmarl_trainer* trainer, double* out, size_t capacity,
                                             size_t* written);
CMARL_API cmarl_status cmarl_trainer_save_checkpoint(const cmarl_trainer* trainer, const char* path);
CMARL_API cmarl_status cmarl_trainer_load_checkpoint(cmarl_trainer* trainer, const char* path);
CMARL_API int cmarl_trainer_finished(const cmarl_trainer* trainer);
CMARL_API void cmarl_trainer_free(cmarl_trainer* trainer);

#ifdef __cplusplus
}
#endif

#endif
