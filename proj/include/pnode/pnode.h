#ifndef PNODE_PNODE_H
#define PNODE_PNODE_H

/*
 * C interface to the probabilistic ODE/DAE solver.
 *
 * Objects are opaque handles created by *_create / pnode_run and released
 * with the matching *_destroy. Every fallible call returns a pnode_status;
 * the message of the most recent failure on the calling thread is available
 * from pnode_last_error().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define PNODE_API __declspec(dllexport)
#else
#  define PNODE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pnode_status {
  PNODE_OK = 0,
  PNODE_E_INVALID_ARGUMENT = 1,
  PNODE_E_UNKNOWN_PROBLEM = 2,
  PNODE_E_ORDER_TOO_LOW = 3,
  PNODE_E_SOLVER_ABORT = 4,   /* step underflow, repeated rejections, non-finite field */
  PNODE_E_REFERENCE = 5,      /* reference solution failed its consistency gate */
  PNODE_E_IO = 6,
  PNODE_E_INTERNAL = 7
} pnode_status;

typedef enum pnode_method { PNODE_EK0 = 0, PNODE_EK1 = 1 } pnode_method;

typedef enum pnode_format { PNODE_FORMAT_JSON = 0, PNODE_FORMAT_CSV = 1 } pnode_format;

typedef struct pnode_config pnode_config;
typedef struct pnode_result pnode_result;

typedef struct pnode_stats {
  long n_feval;
  long n_steps_accepted;
  long n_steps_rejected;
  long long wall_time_ns;
} pnode_stats;

PNODE_API const char* pnode_version(void);
PNODE_API const char* pnode_last_error(void);
PNODE_API const char* pnode_status_string(pnode_status status);

PNODE_API size_t pnode_problem_count(void);
PNODE_API const char* pnode_problem_name(size_t index);

/* Run configuration. Defaults: logistic, ek1, q = 3, adaptive 1e-6/1e-6. */
PNODE_API pnode_status pnode_config_create(pnode_config** out);
PNODE_API void pnode_config_destroy(pnode_config* config);
PNODE_API pnode_status pnode_config_set_problem(pnode_config* config, const char* name);
PNODE_API pnode_status pnode_config_set_method(pnode_config* config, pnode_method method);
PNODE_API pnode_status pnode_config_set_order(pnode_config* config, int order);
PNODE_API pnode_status pnode_config_set_fixed_step(pnode_config* config, double dt);
PNODE_API pnode_status pnode_config_set_adaptive(pnode_config* config, double rtol, double atol);
/* Comma or '+' separated subset of {ode, chainrule, conservation}; must contain ode. */
PNODE_API pnode_status pnode_config_set_operators(pnode_config* config, const char* ops);
PNODE_API pnode_status pnode_config_set_first_order_transform(pnode_config* config, int enabled);
PNODE_API pnode_status pnode_config_set_smooth(pnode_config* config, int enabled);
PNODE_API pnode_status pnode_config_set_samples(pnode_config* config, int n_samples);
PNODE_API pnode_status pnode_config_set_seed(pnode_config* config, uint64_t seed);
/* Checks the configuration against its problem without solving. */
PNODE_API pnode_status pnode_config_validate(const pnode_config* config);

PNODE_API pnode_status pnode_run(const pnode_config* config, pnode_result** out);
PNODE_API void pnode_result_destroy(pnode_result* result);

PNODE_API size_t pnode_result_num_nodes(const pnode_result* result);
PNODE_API size_t pnode_result_dim(const pnode_result* result);
/* Copies `n` values; n must equal the number of nodes. */
PNODE_API pnode_status pnode_result_times(const pnode_result* result, double* out, size_t n);
/* Posterior mean / marginal std of the solution block at `node`; n = dim. */
PNODE_API pnode_status pnode_result_mean(const pnode_result* result, size_t node, double* out, size_t n);
PNODE_API pnode_status pnode_result_std(const pnode_result* result, size_t node, double* out, size_t n);
PNODE_API pnode_status pnode_result_stats(const pnode_result* result, pnode_stats* out);
/* NaN when not applicable to the problem. */
PNODE_API double pnode_result_energy_drift(const pnode_result* result);
PNODE_API double pnode_result_dae_residual(const pnode_result* result);

PNODE_API pnode_status pnode_result_write(const pnode_result* result, const char* path, pnode_format format,
                                          int include_timing);

/* Runs a work-precision sweep described by a config file and writes CSV.
 * threads = 0 uses PNODE_THREADS or the hardware concurrency. */
PNODE_API pnode_status pnode_bench_run(const char* config_path, const char* out_path, unsigned threads);

#ifdef __cplusplus
}
#endif

#endif /* PNODE_PNODE_H */
