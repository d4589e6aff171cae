#ifndef SGDREG_H
#define SGDREG_H

/* C interface to the sgdreg library. Handles are opaque; every fallible call
 * returns an sgdreg_status and leaves a message in sgdreg_last_error() (per
 * thread) when the status is not SGDREG_OK. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SGDREG_API __declspec(dllexport)
#else
#define SGDREG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sgdreg_status {
  SGDREG_OK = 0,
  SGDREG_CHECK_FAILED = 1, /* a verification or fit did not pass */
  SGDREG_ERR_VALIDATION = 2,
  SGDREG_ERR_NUMERICAL = 3,
  SGDREG_ERR_IO = 4,
  SGDREG_ERR_NULL = 5, /* a required pointer argument was NULL */
  SGDREG_ERR_INTERNAL = 6
} sgdreg_status;

typedef struct sgdreg_config sgdreg_config_t;
typedef struct sgdreg_ensemble sgdreg_ensemble_t;

typedef struct sgdreg_options {
  int has_seed;        /* nonzero: seed overrides mc.seed */
  uint64_t seed;
  unsigned threads;    /* worker cap; results do not depend on it */
  const char* out_dir; /* NULL: output.dir from the config */
  int quiet;           /* nonzero: no report on stdout */
} sgdreg_options_t;

typedef struct sgdreg_estimate {
  uint64_t k;
  double mse;
  double mse_stderr;
  double bias_sq;
  double variance;
  int has_berr;
  double berr_mse;
  double berr_stderr;
  double residual_mse;
  uint64_t M;
  uint64_t seed;
} sgdreg_estimate_t;

SGDREG_API void sgdreg_options_init(sgdreg_options_t* options);

SGDREG_API sgdreg_status sgdreg_config_default(sgdreg_config_t** out);
SGDREG_API sgdreg_status sgdreg_config_load(const char* path, sgdreg_config_t** out);
SGDREG_API sgdreg_status sgdreg_config_parse(const char* text, sgdreg_config_t** out);
SGDREG_API sgdreg_status sgdreg_config_set(sgdreg_config_t* config, const char* section,
                                           const char* key, const char* value);
/* Applies count "section.key=value" strings and validates once at the end;
 * on failure the config is unchanged. */
SGDREG_API sgdreg_status sgdreg_config_set_many(sgdreg_config_t* config,
                                                const char* const* assignments, size_t count);
/* *out_text is released with sgdreg_string_free. */
SGDREG_API sgdreg_status sgdreg_config_serialize(const sgdreg_config_t* config, char** out_text);
SGDREG_API void sgdreg_config_destroy(sgdreg_config_t* config);
SGDREG_API void sgdreg_string_free(char* text);

/* Subcommands. Return SGDREG_OK, SGDREG_CHECK_FAILED or an error status. */
SGDREG_API sgdreg_status sgdreg_cmd_run(const sgdreg_config_t* config,
                                        const sgdreg_options_t* options);
/* checks: comma separated names, e.g. "adjoint,fd,lemma_a1". */
SGDREG_API sgdreg_status sgdreg_cmd_verify(const sgdreg_config_t* config, const char* checks,
                                           const sgdreg_options_t* options);
/* param: "delta", "alpha", "nu" or "M". */
SGDREG_API sgdreg_status sgdreg_cmd_sweep(const sgdreg_config_t* config, const char* param,
                                          const double* values, size_t count, int fit,
                                          const sgdreg_options_t* options);
/* k_min = k_max = 0 selects the default window; points_out may be NULL. */
SGDREG_API sgdreg_status sgdreg_cmd_fit(const char* csv_path, const char* column, double k_min,
                                        double k_max, double target, double tol,
                                        const char* points_out, const sgdreg_options_t* options);

SGDREG_API sgdreg_status sgdreg_ensemble_run(const sgdreg_config_t* config,
                                             const sgdreg_options_t* options,
                                             sgdreg_ensemble_t** out);
SGDREG_API size_t sgdreg_ensemble_size(const sgdreg_ensemble_t* ensemble);
SGDREG_API sgdreg_status sgdreg_ensemble_row(const sgdreg_ensemble_t* ensemble, size_t index,
                                             sgdreg_estimate_t* out);
SGDREG_API sgdreg_status sgdreg_ensemble_csv(const sgdreg_ensemble_t* ensemble, char** out_text);
SGDREG_API void sgdreg_ensemble_destroy(sgdreg_ensemble_t* ensemble);

/* lemma: "a1", "a2" or "a3". *max_violation receives the largest violation
 * over the lemma's inequalities; SGDREG_CHECK_FAILED if it exceeds 1e-12. */
SGDREG_API sgdreg_status sgdreg_check_lemma(const char* lemma, size_t trials, uint64_t seed,
                                            double* max_violation);

SGDREG_API const char* sgdreg_last_error(void);
SGDREG_API const char* sgdreg_version(void);

#ifdef __cplusplus
}
#endif

#endif
