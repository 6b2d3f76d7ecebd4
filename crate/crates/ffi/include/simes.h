#ifndef SIMES_H
#define SIMES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SimesStatus {
  SIMES_STATUS_OK = 0,
  SIMES_STATUS_NULL_POINTER = 1,
  SIMES_STATUS_INVALID_ARGUMENT = 2,
  SIMES_STATUS_PRECONDITION = 3,
  SIMES_STATUS_SINGULAR = 4,
  SIMES_STATUS_NUMERICAL = 5,
  SIMES_STATUS_PARSE = 6,
  SIMES_STATUS_IO = 7,
  SIMES_STATUS_PANIC = 8,
} SimesStatus;

typedef enum SimesMarginal {
  SIMES_MARGINAL_UNIFORM = 0,
  SIMES_MARGINAL_NORMAL = 1,
  SIMES_MARGINAL_STUDENT_T = 2,
  SIMES_MARGINAL_ABS_NORMAL = 3,
  SIMES_MARGINAL_ABS_STUDENT_T = 4,
} SimesMarginal;

/**
 * Opaque correlation matrix.
 */
typedef struct SimesCorrelation SimesCorrelation;

/**
 * Opaque exact null distribution of the two-sample statistic.
 */
typedef struct SimesNullDistribution SimesNullDistribution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Free with
 * [`simes_string_free`].
 */
char *simes_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void simes_string_free(char *s);

/**
 * Builds a correlation matrix from `n * n` row-major entries.
 *
 * # Safety
 * `entries` must point to `n * n` doubles; `out` must be writable.
 */
enum SimesStatus simes_correlation_new(size_t n,
                                       const double *entries,
                                       struct SimesCorrelation **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SimesStatus simes_correlation_equicorrelated(size_t n,
                                                  double rho,
                                                  struct SimesCorrelation **out);

/**
 * # Safety
 * `sigma` must be NULL or a live handle.
 */
void simes_correlation_free(struct SimesCorrelation *sigma);

/**
 * # Safety
 * `sigma` must be a live handle.
 */
size_t simes_correlation_dim(const struct SimesCorrelation *sigma);

/**
 * Whether every off-diagonal entry of the precision matrix is `≤ tol`.
 *
 * # Safety
 * `sigma` must be a live handle; `out` must be writable.
 */
enum SimesStatus simes_correlation_mtp2(const struct SimesCorrelation *sigma,
                                        double tol,
                                        bool *out);

/**
 * Searches for signs `d` making `−DΣ⁻¹D` nonnegative off the diagonal.
 * On success `*balanced` says whether one exists and, if so, `signs`
 * (length `dim`) receives ±1 entries.
 *
 * # Safety
 * `sigma` must be a live handle; `signs` must hold `dim` entries.
 */
enum SimesStatus simes_correlation_sign_balance(const struct SimesCorrelation *sigma,
                                                double tol,
                                                int8_t *signs,
                                                bool *balanced);

/**
 * Exact `P{U_(i) ≥ c_i for all i}` for `n` iid uniforms.
 *
 * # Safety
 * `c` must point to `n` doubles; `out` must be writable.
 */
enum SimesStatus simes_noncrossing_probability(const double *c, size_t n, double *out);

/**
 * Global Simes test.
 *
 * # Safety
 * `p` must point to `n` doubles; `reject` must be writable.
 */
enum SimesStatus simes_simes_test(const double *p, size_t n, double alpha, bool *reject);

/**
 * Hochberg step-up. `rejected[i]` is set for each rejected hypothesis.
 *
 * # Safety
 * `p` and `rejected` must hold `n` entries; `count` must be writable.
 */
enum SimesStatus simes_hochberg(const double *p,
                                size_t n,
                                double alpha,
                                bool *rejected,
                                size_t *count);

/**
 * Benjamini–Hochberg step-up at level `q`.
 *
 * # Safety
 * `p` and `rejected` must hold `n` entries; `count` must be writable.
 */
enum SimesStatus simes_benjamini_hochberg(const double *p,
                                          size_t n,
                                          double q,
                                          bool *rejected,
                                          size_t *count);

/**
 * Lower-tail critical values `a_k..a_n` written to `out` (length
 * `n − k + 1`). `k = 1` gives marginal quantiles at `jα/n`; `k ≥ 2` uses the
 * equicorrelated model with correlation `rho` (uniform is not allowed).
 * `nu` is read only for the t marginals.
 *
 * # Safety
 * `out` must hold `n − k + 1` doubles.
 */
enum SimesStatus simes_critical_values(size_t n,
                                       size_t k,
                                       double alpha,
                                       enum SimesMarginal kind,
                                       uint32_t nu,
                                       double rho,
                                       double *out);

/**
 * `P(max of k equicorrelated standard normals ≤ x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SimesStatus simes_max_k_cdf(uint32_t k, double rho, double x, double *out);

/**
 * `P(min of k equicorrelated standard normals ≤ x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SimesStatus simes_min_k_cdf(uint32_t k, double rho, double x, double *out);

/**
 * Student-t CDF; NaN for `nu ≤ 0`.
 */
double simes_t_cdf(double x, double nu);

/**
 * # Safety
 * `out` must be writable.
 */
enum SimesStatus simes_t_quantile(double p, double nu, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SimesStatus simes_null_distribution_new(size_t n, struct SimesNullDistribution **out);

/**
 * # Safety
 * `dist` must be NULL or a live handle.
 */
void simes_null_distribution_free(struct SimesNullDistribution *dist);

/**
 * Writes `P₀(T_n = t)` for `t = 0..=n` into `pmf` (length `n + 1`).
 *
 * # Safety
 * `dist` must be a live handle; `pmf` must hold `len` doubles.
 */
enum SimesStatus simes_null_distribution_pmf(const struct SimesNullDistribution *dist,
                                             double *pmf,
                                             size_t len);

/**
 * `P₀(T_n ≥ t)`.
 *
 * # Safety
 * `dist` must be a live handle; `out` must be writable.
 */
enum SimesStatus simes_null_distribution_upper_tail(const struct SimesNullDistribution *dist,
                                                    size_t t,
                                                    double *out);

/**
 * Two-sample test of `F = G` against `G` stochastically larger.
 *
 * # Safety
 * `x` and `y` must each hold `n` doubles; out-pointers must be writable.
 */
enum SimesStatus simes_tn_test(const double *x,
                               const double *y,
                               size_t n,
                               double alpha,
                               size_t *statistic,
                               double *p_value,
                               bool *reject);

/**
 * Runs a verification experiment described by `key = value` config text
 * (relative matrix paths resolve against the working directory) and
 * returns the JSON report in `*json`, to be freed with
 * [`simes_string_free`]. `*pass` receives the verdict.
 *
 * # Safety
 * `config` must be a NUL-terminated string; out-pointers must be writable.
 */
enum SimesStatus simes_verify_config(const char *config, char **json, bool *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMES_H */
