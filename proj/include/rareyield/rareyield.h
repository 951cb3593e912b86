/* C interface of the rareyield library.
 *
 * Objects are opaque handles created by ry_*_create/load functions and
 * released by the matching ry_*_free. Every fallible call returns a
 * ry_status; on failure ry_last_error() describes the problem (the string
 * is thread-local and valid until the next failing call on that thread).
 */
#ifndef RAREYIELD_H
#define RAREYIELD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define RY_API __attribute__((visibility("default")))
#else
#define RY_API
#endif

typedef enum ry_status {
  RY_OK = 0,
  RY_ERR_INVALID_ARGUMENT = 1,
  RY_ERR_DIMENSION = 2,
  RY_ERR_EVALUATION = 3,
  RY_ERR_IO = 4,
  RY_ERR_CONFIG = 5,
  RY_ERR_NUMERIC = 6,
  RY_ERR_INTERNAL = 99
} ry_status;

typedef struct ry_config ry_config;
typedef struct ry_bench ry_bench;
typedef struct ry_experiment ry_experiment;

RY_API const char* ry_version(void);
RY_API const char* ry_last_error(void);
RY_API const char* ry_status_name(ry_status status);

/* Configuration. */
RY_API ry_status ry_config_default(ry_config** out);
RY_API ry_status ry_config_load(const char* path, ry_config** out);
RY_API ry_status ry_config_parse(const char* json_text, ry_config** out);
RY_API void ry_config_free(ry_config* cfg);
/* "all" or one of mnis, hscs, ais, acs, optimis. */
RY_API ry_status ry_config_set_methods(ry_config* cfg, const char* methods);
RY_API ry_status ry_config_set_bench(ry_config* cfg, const char* bench_spec);
RY_API ry_status ry_config_set_runs(ry_config* cfg, size_t runs);
RY_API ry_status ry_config_set_seed(ry_config* cfg, uint64_t seed);

/* Benches. ry_bench_create takes a preset name or "external:<command>";
 * a NULL spec uses the config's bench. The config supplies threshold and
 * external-bench settings. */
RY_API ry_status ry_bench_create(const ry_config* cfg, const char* spec,
                                 ry_bench** out);
/* Fails iff w.x > t. */
RY_API ry_status ry_bench_linear(const double* w, size_t dim, double t,
                                 ry_bench** out);
/* Fails iff |w.x| > t. */
RY_API ry_status ry_bench_two_region(const double* w, size_t dim, double t,
                                     ry_bench** out);
RY_API void ry_bench_free(ry_bench* bench);
RY_API ry_status ry_bench_dim(const ry_bench* bench, size_t* out);
RY_API ry_status ry_bench_eval_count(const ry_bench* bench, uint64_t* out);
/* *has is set to 0 when the bench has no closed-form P_f. */
RY_API ry_status ry_bench_analytic_pf(const ry_bench* bench, double* out, int* has);
RY_API ry_status ry_bench_fails(ry_bench* bench, const double* x, size_t dim,
                                int* out);

/* One run of one method. */
typedef struct ry_run_info {
  int converged;
  uint64_t total_sims;
  uint64_t presample_sims;
  size_t rounds;
  double final_pf;
  int has_fom;
  double final_fom;
} ry_run_info;

RY_API ry_status ry_run_method(ry_bench* bench, const ry_config* cfg,
                               const char* method, uint64_t seed,
                               ry_run_info* out);

/* Experiments: every configured method, cfg runs each, on one bench. */
typedef struct ry_method_summary {
  char method[16];
  size_t n_runs;
  size_t failed;
  int has_stats; /* 0 when every run failed */
  double mean_pf;
  int has_rel_err;
  double mean_rel_err;
  double mean_sims;
  int has_speedup;
  double mean_speedup;
  uint64_t best_seed;
} ry_method_summary;

RY_API ry_status ry_experiment_run(ry_bench* bench, const ry_config* cfg,
                                   ry_experiment** out);
RY_API void ry_experiment_free(ry_experiment* exp);
RY_API ry_status ry_experiment_method_count(const ry_experiment* exp, size_t* out);
RY_API ry_status ry_experiment_summary(const ry_experiment* exp, size_t index,
                                       ry_method_summary* out);
/* 1 when every run of every method failed. */
RY_API ry_status ry_experiment_all_failed(const ry_experiment* exp, int* out);
/* Writes traces/<method>_seed<S>.csv, runs.csv, summary.csv and
 * convergence.svg (best run per method) under dir, creating it. */
RY_API ry_status ry_experiment_write(const ry_experiment* exp, const char* dir);

/* Presampler ablation for ais and acs with the config's budgets. Writes
 * ablation.csv under dir. *wins receives, per base method (ais, acs), the
 * number of seeds where the ray-bisection arm needed fewer IS-phase sims. */
RY_API ry_status ry_ablation_run(const ry_config* cfg, const char* dir,
                                 size_t wins[2], size_t* n_runs);

/* Plots every trace CSV directly under traces_dir. */
RY_API ry_status ry_plot_traces(const char* traces_dir, double golden,
                                const char* out_svg);

#ifdef __cplusplus
}
#endif

#endif /* RAREYIELD_H */
