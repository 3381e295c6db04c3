/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HCP_H
#define HCP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HcpStatus {
  HCP_STATUS_OK = 0,
  HCP_STATUS_NULL_POINTER = 1,
  HCP_STATUS_INVALID_ARGUMENT = 2,
  HCP_STATUS_CONFIG = 3,
  HCP_STATUS_SCHEDULE = 4,
  HCP_STATUS_RATES = 5,
  HCP_STATUS_STATE_SPACE = 6,
  HCP_STATUS_WINDOW_EXHAUSTED = 7,
  HCP_STATUS_NUMERICAL = 8,
  HCP_STATUS_TRUNCATION = 9,
  HCP_STATUS_DOMAIN = 10,
  HCP_STATUS_IO = 11,
  HCP_STATUS_PANIC = 12,
} HcpStatus;

typedef enum HcpCommand {
  HCP_COMMAND_SIMULATE = 0,
  HCP_COMMAND_ANALYTIC = 1,
  HCP_COMMAND_LIMITS = 2,
  HCP_COMMAND_REPRODUCE_FIGB = 3,
} HcpCommand;

/**
 * Tabulated universal limit law.
 */
typedef struct HcpLimitLaw HcpLimitLaw;

/**
 * Law of an epoch-starting interval on a finite support.
 */
typedef struct HcpMeasure HcpMeasure;

/**
 * Validated run configuration.
 */
typedef struct HcpRunConfig HcpRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hcp_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *hcp_last_error(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum HcpStatus hcp_measure_dirac(double x, double l_max, struct HcpMeasure **out);

/**
 * Mass `masses[i]` at `i * step` for `i < n`.
 *
 * # Safety
 * `masses` must point to `n` doubles and `out` must be valid for writes.
 */
enum HcpStatus hcp_measure_from_grid(double step,
                                     const double *masses,
                                     size_t n,
                                     double l_max,
                                     double deficit,
                                     struct HcpMeasure **out);

/**
 * Interval law given as JSON, e.g. `{"type":"geometric","q":0.3}`, truncated
 * at `l_max`. A positive `step` snaps atoms to that grid.
 *
 * # Safety
 * `law_json` must be a NUL-terminated string and `out` valid for writes.
 */
enum HcpStatus hcp_measure_from_law_json(const char *law_json,
                                         double step,
                                         double l_max,
                                         struct HcpMeasure **out);

/**
 * # Safety
 * `m` must be NULL or a handle from this library, not yet freed.
 */
void hcp_measure_free(struct HcpMeasure *m);

/**
 * Number of atoms; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t hcp_measure_len(const struct HcpMeasure *m);

/**
 * Copy up to `cap` atoms into `xs` and `ws`; `*n_out` receives the total
 * atom count so a short buffer can be detected.
 *
 * # Safety
 * `xs` and `ws` must hold `cap` doubles; `n_out` must be valid for writes.
 */
enum HcpStatus hcp_measure_atoms(const struct HcpMeasure *m,
                                 double *xs,
                                 double *ws,
                                 size_t cap,
                                 size_t *n_out);

/**
 * Mass on the support plus the truncation deficit.
 *
 * # Safety
 * `m` must be a live handle and `out` valid for writes.
 */
enum HcpStatus hcp_measure_total(const struct HcpMeasure *m, double *out);

/**
 * # Safety
 * `m` must be a live handle and `out` valid for writes.
 */
enum HcpStatus hcp_measure_deficit(const struct HcpMeasure *m, double *out);

/**
 * # Safety
 * `m` must be a live handle and `out` valid for writes.
 */
enum HcpStatus hcp_measure_cdf(const struct HcpMeasure *m, double x, double *out);

/**
 * Law after one epoch with active range `[d_min, d_max)`.
 *
 * # Safety
 * `m` must be a live handle and `out` valid for writes.
 */
enum HcpStatus hcp_measure_pushforward(const struct HcpMeasure *m,
                                       double d_min,
                                       double d_max,
                                       struct HcpMeasure **out);

/**
 * Positions multiplied by `factor`.
 *
 * # Safety
 * `m` must be a live handle and `out` valid for writes.
 */
enum HcpStatus hcp_measure_scale(const struct HcpMeasure *m,
                                 double factor,
                                 struct HcpMeasure **out);

/**
 * Small-`s` estimate of `c0` on a logarithmic grid from `s_max` down to `s_min`.
 *
 * # Safety
 * `m` must be a live handle; `estimate` and `converged` valid for writes.
 */
enum HcpStatus hcp_c0_estimate(const struct HcpMeasure *m,
                               double s_max,
                               double s_min,
                               size_t per_decade,
                               double *estimate,
                               bool *converged);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum HcpStatus hcp_limit_law_new(double c0, double gamma, struct HcpLimitLaw **out);

/**
 * # Safety
 * `l` must be NULL or a live handle.
 */
void hcp_limit_law_free(struct HcpLimitLaw *l);

/**
 * Density at `x`; NaN for NULL.
 *
 * # Safety
 * `l` must be NULL or a live handle.
 */
double hcp_limit_law_density(const struct HcpLimitLaw *l, double x);

/**
 * Distribution function at `x`; NaN for NULL.
 *
 * # Safety
 * `l` must be NULL or a live handle.
 */
double hcp_limit_law_cdf(const struct HcpLimitLaw *l, double x);

/**
 * `k`-th moment. `*finite` is false, and `*value` infinite, when it diverges.
 *
 * # Safety
 * `l` must be a live handle; `value` and `finite` valid for writes.
 */
enum HcpStatus hcp_limit_law_moment(const struct HcpLimitLaw *l,
                                    uint32_t k,
                                    double *value,
                                    bool *finite);

/**
 * Laplace transform of the limit interval law at `s`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HcpStatus hcp_g_infinity(double c0, double s, double *out);

/**
 * Laplace transform of the rescaled first-point limit at `s`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HcpStatus hcp_first_point_limit_transform(double c0, double gamma, double s, double *out);

/**
 * Parse and validate a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` valid for writes.
 */
enum HcpStatus hcp_run_config_from_toml(const char *toml, struct HcpRunConfig **out);

/**
 * # Safety
 * `c` must be NULL or a live handle.
 */
void hcp_run_config_free(struct HcpRunConfig *c);

/**
 * Run a command and write its files and manifest into `out_dir`, which must
 * be empty or absent unless `overwrite` is set.
 *
 * # Safety
 * `c` must be a live handle and `out_dir` a NUL-terminated string.
 */
enum HcpStatus hcp_run_command(const struct HcpRunConfig *c,
                               enum HcpCommand command,
                               const char *out_dir,
                               bool overwrite);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HCP_H */
