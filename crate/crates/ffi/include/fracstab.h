#ifndef FRACSTAB_H
#define FRACSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Result code of every call.
typedef enum FracstabStatus {
  FRACSTAB_STATUS_OK = 0,
  FRACSTAB_STATUS_NULL_POINTER = 1,
  FRACSTAB_STATUS_INVALID_ARGUMENT = 2,
  FRACSTAB_STATUS_DIMENSION_MISMATCH = 3,
  FRACSTAB_STATUS_NUMERICAL_FAILURE = 4,
  FRACSTAB_STATUS_NOT_AN_EQUILIBRIUM = 5,
  FRACSTAB_STATUS_BUFFER_TOO_SMALL = 6,
  FRACSTAB_STATUS_PANIC = 7,
} FracstabStatus;

typedef enum FracstabVerdict {
  FRACSTAB_VERDICT_ASYMPTOTICALLY_STABLE = 0,
  FRACSTAB_VERDICT_MARGINALLY_STABLE = 1,
  FRACSTAB_VERDICT_UNSTABLE = 2,
} FracstabVerdict;

// Opaque fractional system.
typedef struct FracstabSystem FracstabSystem;

// Opaque integration result.
typedef struct FracstabTrajectory FracstabTrajectory;

// Scalar summary of a stability analysis.
typedef struct FracstabReport {
  enum FracstabVerdict verdict;
  // `(2/pi) min |arg lambda|`, in `[0, 2]`.
  double critical_order;
  double min_arg;
  double q_used;
  // Number of eigenvalues (the system dimension).
  size_t n_eigenvalues;
} FracstabReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *fracstab_last_error(void);

// Two-site Toda lattice with control `-k y^2` (`k != 0`), dimension 3.
enum FracstabStatus fracstab_toda2_new(double k, struct FracstabSystem **out);

// Closed-loop two-site lattice with gains `c1`, `c2` around `(0, m, 0)`.
enum FracstabStatus fracstab_toda2_feedback_new(double k,
                                                double c1,
                                                double c2,
                                                double m,
                                                struct FracstabSystem **out);

// `n`-site Toda lattice (`n >= 2`), dimension `2n - 1`.
enum FracstabStatus fracstab_toda_lattice_new(size_t n, struct FracstabSystem **out);

// Releases a system. NULL is ignored.
//
// # Safety
// `sys` must come from a `fracstab_*_new` call and not be freed twice.
void fracstab_system_free(struct FracstabSystem *sys);

// State dimension, or 0 for NULL.
//
// # Safety
// `sys` must be NULL or a live handle.
size_t fracstab_system_dim(const struct FracstabSystem *sys);

// Writes `f(x)` into `out` (`out_len >= dim`).
//
// # Safety
// `x` must hold `n` doubles and `out` `out_len` doubles.
enum FracstabStatus fracstab_system_eval(const struct FracstabSystem *sys,
                                         const double *x,
                                         size_t n,
                                         double *out,
                                         size_t out_len);

// Integrates `D^q x = f(x)` from `x0` with step `h` up to `t_end`.
//
// A run stopped by the blow-up guard still succeeds; query
// [`fracstab_trajectory_diverged`].
//
// # Safety
// `x0` must hold `n` doubles; `out` must be writable.
enum FracstabStatus fracstab_integrate(const struct FracstabSystem *sys,
                                       double q,
                                       const double *x0,
                                       size_t n,
                                       double h,
                                       double t_end,
                                       struct FracstabTrajectory **out);

// Releases a trajectory. NULL is ignored.
//
// # Safety
// `traj` must come from [`fracstab_integrate`] and not be freed twice.
void fracstab_trajectory_free(struct FracstabTrajectory *traj);

// Number of stored samples, or 0 for NULL.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t fracstab_trajectory_len(const struct FracstabTrajectory *traj);

// State dimension of the samples, or 0 for NULL.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t fracstab_trajectory_dim(const struct FracstabTrajectory *traj);

// Whether the blow-up guard cut the run short.
//
// # Safety
// `traj` must be NULL or a live handle.
bool fracstab_trajectory_diverged(const struct FracstabTrajectory *traj);

// Copies the sample times (`len` values).
//
// # Safety
// `out` must hold `out_len` doubles.
enum FracstabStatus fracstab_trajectory_times(const struct FracstabTrajectory *traj,
                                              double *out,
                                              size_t out_len);

// Copies the states row-major (`len * dim` values, one row per sample).
//
// # Safety
// `out` must hold `out_len` doubles.
enum FracstabStatus fracstab_trajectory_states(const struct FracstabTrajectory *traj,
                                               double *out,
                                               size_t out_len);

// Matignon analysis at the equilibrium `x_e` (residual must be below 1e-10).
//
// Eigenvalues are written to `eig_re` / `eig_im` when both are non-NULL;
// each then needs room for `dim` values.
//
// # Safety
// `x_e` must hold `n` doubles, `report` must be writable, and the eigenvalue
// buffers must hold `eig_len` doubles each.
enum FracstabStatus fracstab_analyze(const struct FracstabSystem *sys,
                                     const double *x_e,
                                     size_t n,
                                     double q,
                                     struct FracstabReport *report,
                                     double *eig_re,
                                     double *eig_im,
                                     size_t eig_len);

// Closed-form verdict for the controlled two-site lattice at `(0, m, 0)`.
// `eigs` (may be NULL) receives `{c1 - m, c2, -k}`.
//
// # Safety
// `verdict` must be writable; `eigs` NULL or room for 3 doubles.
enum FracstabStatus fracstab_prop41_classify(double k,
                                             double c1,
                                             double c2,
                                             double m,
                                             enum FracstabVerdict *verdict,
                                             double *eigs);

// `E_alpha(z)` by its power series, `|z| <= 5`.
//
// # Safety
// `out` must be writable.
enum FracstabStatus fracstab_mittag_leffler(double alpha, double z, double tol, double *out);

// Lipschitz constant of the two-site controlled lattice on the box of
// half-width `delta` around `x0`.
//
// # Safety
// `x0` must hold `n` doubles; `out` must be writable.
enum FracstabStatus fracstab_lipschitz_bound(const double *x0,
                                             size_t n,
                                             double delta,
                                             double k,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACSTAB_H */
