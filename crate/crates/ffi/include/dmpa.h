#ifndef DMPA_H
#define DMPA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum DmpaStatus {
  DmpaStatus_Ok = 0,
  /**
   * Parameters violate their domain (negative rates, eta outside (0,1], ...).
   */
  DmpaStatus_InvalidArgument = 1,
  /**
   * Above threshold: chi^2 >= delta^2 + gamma^2.
   */
  DmpaStatus_Unstable = 2,
  /**
   * The solver or optimizer failed to converge.
   */
  DmpaStatus_NoConvergence = 3,
  DmpaStatus_NullPointer = 4,
} DmpaStatus;

/**
 * Opaque validated parameter set.
 */
typedef struct DmpaParams DmpaParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Validate parameters and allocate a handle. On success writes the
 * handle to `out` and returns `Ok`; the handle must be released with
 * `dmpa_params_free`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DmpaStatus dmpa_params_new(double gamma,
                                double chi,
                                double delta,
                                double theta,
                                double mu,
                                double eta,
                                double n_thermal,
                                struct DmpaParams **out);

/**
 * Release a handle from `dmpa_params_new`. Passing null is a no-op.
 *
 * # Safety
 * `p` must be null or a pointer from `dmpa_params_new` not yet freed.
 */
void dmpa_params_free(struct DmpaParams *p);

/**
 * Whether the linearized dynamics are stable (chi^2 < delta^2 + gamma^2).
 *
 * # Safety
 * `p` must be a live handle; `out` may be null.
 */
enum DmpaStatus dmpa_is_stable(const struct DmpaParams *p, bool *out);

/**
 * Conditional steady-state covariance. Any out pointer may be null.
 *
 * # Safety
 * `p` must be a live handle.
 */
enum DmpaStatus dmpa_steady_state(const struct DmpaParams *p,
                                  double *v_x,
                                  double *v_y,
                                  double *c,
                                  double *residual);

/**
 * Unconditional steady-state covariance under linear feedback `-g <x>`.
 *
 * # Safety
 * `p` must be a live handle; out pointers may be null.
 */
enum DmpaStatus dmpa_unconditional_steady_state(const struct DmpaParams *p,
                                                double feedback_gain,
                                                double *v_x,
                                                double *v_y,
                                                double *c);

/**
 * Pump-off conditional variance (closed form).
 *
 * # Safety
 * `p` must be a live handle; `out` may be null.
 */
enum DmpaStatus dmpa_v0(const struct DmpaParams *p, double *out);

/**
 * Back-action-evading conditional variance (closed form).
 *
 * # Safety
 * `p` must be a live handle; `out` may be null.
 */
enum DmpaStatus dmpa_bae_variance(const struct DmpaParams *p, double *out);

/**
 * Conditioning parameter z and normalized nonlinearity chi'.
 *
 * # Safety
 * `p` must be a live handle; out pointers may be null.
 */
enum DmpaStatus dmpa_derived(const struct DmpaParams *p, double *z, double *chi_prime);

/**
 * Minimize the conditional `v_x` over detuning; the handle's `delta`
 * is ignored.
 *
 * # Safety
 * `p` must be a live handle; out pointers may be null.
 */
enum DmpaStatus dmpa_optimal_detuning(const struct DmpaParams *p,
                                      double *delta_opt,
                                      double *v_x_opt);

/**
 * High-conditioning closed-form optimum at normalized nonlinearity
 * `chi_prime`: detuning offset `delta'_opt - chi'` and variance ratio
 * `V_Xopt / V_0`.
 *
 * # Safety
 * Out pointers may be null.
 */
enum DmpaStatus dmpa_analytic_optimum(double chi_prime,
                                      double *delta_offset_prime,
                                      double *v_ratio);

/**
 * Squeezing in dB relative to the zero-point variance 1/2; positive
 * means below zero-point.
 *
 * # Safety
 * `out` may be null.
 */
enum DmpaStatus dmpa_to_db(double variance, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMPA_H */
