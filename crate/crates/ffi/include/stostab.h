#ifndef STOSTAB_H
#define STOSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StostabStatus {
  STOSTAB_STATUS_OK = 0,
  STOSTAB_STATUS_NULL_POINTER = 1,
  STOSTAB_STATUS_INVALID_ARGUMENT = 2,
  STOSTAB_STATUS_INVALID_DESIGN = 3,
  STOSTAB_STATUS_DIVERGED = 4,
  STOSTAB_STATUS_CONFIG = 5,
  STOSTAB_STATUS_IO = 6,
  STOSTAB_STATUS_PANIC = 7,
} StostabStatus;

/*
 Closed-loop randomized Brockett integrator. Create with
 `stostab_closed_loop_new`, release with `stostab_closed_loop_free`.
 */
typedef struct StostabClosedLoop StostabClosedLoop;

/*
 Summary of a generator scan over `[grid_min, grid_max]^3`.
 */
typedef struct StostabScanSummary {
  size_t n_points;
  size_t n_violations;
  double min_lv;
  double max_lv;
  double argmax[3];
  /*
   Grid points on the x3 axis and how many of them violate.
   */
  size_t m_count;
  size_t m_violations;
} StostabScanSummary;

/*
 Monte Carlo settings. `m_level <= 0` selects `10 V2(x0)`.
 */
typedef struct StostabMcConfig {
  double x0[3];
  double dt;
  double horizon;
  size_t n_paths;
  uint64_t seed;
  double eps;
  double conv_threshold;
  double m_level;
  size_t buckets;
} StostabMcConfig;

typedef struct StostabMcSummary {
  size_t n_paths;
  size_t n_diverged;
  double v2_initial;
  double m_level;
  double p_sup_exceed;
  double p_sup_exceed_halfwidth;
  double p_converge;
  double p_converge_halfwidth;
  double sup_v2_exceedance;
  double sup_v2_exceedance_halfwidth;
  double v2_terminal_q05;
  double v2_terminal_q50;
  double v2_terminal_q95;
  double median_terminal_norm;
  /*
   Largest bucket mean drift of V2 in standard errors.
   */
  double worst_drift_ratio;
  bool kushner_ok;
  /*
   Every bucket drift is at most 2 standard errors above zero.
   */
  bool supermartingale_ok;
} StostabMcSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *stostab_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *stostab_version(void);

/*
 Closed loop with the eigenvector diffusion design scaled by `k1`, `k2`.

 # Safety
 `out` must be valid for one pointer write.
 */
enum StostabStatus stostab_closed_loop_new(double b1,
                                           double b2,
                                           double b3,
                                           double b4,
                                           double k1,
                                           double k2,
                                           struct StostabClosedLoop **out);

/*
 Closed loop with constant diffusion coefficients `(c1, c2)`; only
 `c1 = c2 = 0` passes the origin condition.

 # Safety
 `out` must be valid for one pointer write.
 */
enum StostabStatus stostab_closed_loop_new_constant(double b1,
                                                    double b2,
                                                    double b3,
                                                    double b4,
                                                    double c1,
                                                    double c2,
                                                    struct StostabClosedLoop **out);

/*
 # Safety
 `cl` must be NULL or a handle from `stostab_closed_loop_new*` that has
 not been freed.
 */
void stostab_closed_loop_free(struct StostabClosedLoop *cl);

/*
 Closed-loop drift `f + g u` at `x`, written to `out[3]`.

 # Safety
 `cl` must be a live handle, `x` readable for 3 and `out` writable for 3 doubles.
 */
enum StostabStatus stostab_closed_loop_drift(const struct StostabClosedLoop *cl,
                                             const double *x,
                                             double *out);

/*
 Diffusion vector at `x`, written to `out[3]`.

 # Safety
 As for `stostab_closed_loop_drift`.
 */
enum StostabStatus stostab_closed_loop_diffusion(const struct StostabClosedLoop *cl,
                                                 const double *x,
                                                 double *out);

/*
 Sontag control at `x`, written to `out[2]`.

 # Safety
 `cl` must be a live handle, `x` readable for 3 and `out` writable for 2 doubles.
 */
enum StostabStatus stostab_closed_loop_control(const struct StostabClosedLoop *cl,
                                               const double *x,
                                               double *out);

/*
 Closed-loop generator of V2 at `x`.

 # Safety
 `cl` must be a live handle, `x` readable for 3 doubles, `out` writable.
 */
enum StostabStatus stostab_closed_loop_generator(const struct StostabClosedLoop *cl,
                                                 const double *x,
                                                 double *out);

/*
 # Safety
 `x` readable for 3 doubles, `out` writable for 1.
 */
enum StostabStatus stostab_v2_value(const double *x, double *out);

/*
 # Safety
 `x` readable and `out` writable for 3 doubles.
 */
enum StostabStatus stostab_v2_gradient(const double *x, double *out);

/*
 Row-major Hessian (it is symmetric, so the order only matters for
 roundoff-level asymmetry).

 # Safety
 `x` readable for 3 doubles, `out` writable for 9.
 */
enum StostabStatus stostab_v2_hessian(const double *x, double *out);

/*
 Scans the closed-loop generator over a `count^3` grid on
 `[grid_min, grid_max]^3` without the ball of radius `exclusion`.

 # Safety
 `cl` must be a live handle and `out` writable.
 */
enum StostabStatus stostab_scan_generator(const struct StostabClosedLoop *cl,
                                          double grid_min,
                                          double grid_max,
                                          size_t count,
                                          double exclusion,
                                          struct StostabScanSummary *out);

/*
 Fills `out` with the reference Monte Carlo settings.

 # Safety
 `out` must be writable.
 */
enum StostabStatus stostab_mc_config_default(struct StostabMcConfig *out);

/*
 Runs the Monte Carlo stability ensemble (at least 100 paths).

 # Safety
 `cl` must be a live handle, `cfg` readable and `out` writable.
 */
enum StostabStatus stostab_mc_stability(const struct StostabClosedLoop *cl,
                                        const struct StostabMcConfig *cfg,
                                        struct StostabMcSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOSTAB_H */
