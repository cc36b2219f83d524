#ifndef VCSELECT_H
#define VCSELECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Values are stable across releases.
typedef enum VcsStatus {
  VCS_STATUS_OK = 0,
  VCS_STATUS_NULL_POINTER = 1,
  // Malformed or out-of-range input.
  VCS_STATUS_INVALID_INPUT = 2,
  // The fit finished but did not reach the stationarity tolerance.
  VCS_STATUS_NOT_CONVERGED = 3,
  VCS_STATUS_IO = 4,
  VCS_STATUS_INDEX_OUT_OF_RANGE = 5,
  VCS_STATUS_PANIC = 6,
} VcsStatus;

// Tuning criterion.
typedef enum VcsCriterion {
  VCS_CRITERION_BIC = 0,
  VCS_CRITERION_EBIC = 1,
} VcsCriterion;

// Classification of one coefficient function.
typedef enum VcsClass {
  VCS_CLASS_ZERO = 0,
  VCS_CLASS_CONSTANT = 1,
  VCS_CLASS_VARYING = 2,
} VcsClass;

// Opaque dataset handle.
typedef struct VcsDataset VcsDataset;

// Opaque fit handle.
typedef struct VcsFit VcsFit;

// Options for [`vcs_fit`]. Lambdas set to NaN are tuned from the data.
typedef struct VcsFitOptions {
  size_t n_basis;
  size_t order;
  enum VcsCriterion initial_criterion;
  enum VcsCriterion criterion;
  size_t grid_size;
  double grid_ratio;
  double lambda0;
  double lambda1;
  double lambda2;
  // Nonzero: fit once at `lambda1`, `lambda2`.
  int no_tune;
} VcsFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next call into this library on the same thread.
const char *vcs_last_error(void);

// Library version as a static NUL-terminated string.
const char *vcs_version(void);

// Builds a dataset from column-major `x` (`n * p` values) and length-`n`
// `t` and `y`.
//
// # Safety
// `t` and `y` must point to `n` doubles, `x` to `n * p` doubles, and `out`
// to writable storage for one pointer.
enum VcsStatus vcs_dataset_new(size_t n,
                               size_t p,
                               const double *t,
                               const double *y,
                               const double *x,
                               struct VcsDataset **out);

// Reads a comma-separated file with header `t,y,x1,...,xp`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum VcsStatus vcs_dataset_read_csv(const char *path, int rescale_t, struct VcsDataset **out);

// # Safety
// `ds` must be NULL or a handle from this library not yet freed.
void vcs_dataset_free(struct VcsDataset *ds);

// Number of observations, 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t vcs_dataset_n(const struct VcsDataset *ds);

// Number of covariates, 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t vcs_dataset_p(const struct VcsDataset *ds);

// Fills `opts` with the defaults: cubic splines, 10 basis functions, BIC
// for the initial fit, EBIC for the adaptive fit, 15-point grids.
//
// # Safety
// `opts` must be NULL or writable.
void vcs_fit_options_default(struct VcsFitOptions *opts);

// Runs the selection pipeline. On `VCS_STATUS_NOT_CONVERGED` the handle is
// still written and can be inspected.
//
// # Safety
// `ds` must be a live dataset, `opts` NULL (defaults) or valid, `out` writable.
enum VcsStatus vcs_fit(const struct VcsDataset *ds,
                       const struct VcsFitOptions *opts,
                       struct VcsFit **out);

// # Safety
// `fit` must be NULL or a handle from this library not yet freed.
void vcs_fit_free(struct VcsFit *fit);

// Classification of covariate `j` (0-based); `value` receives the constant
// for constant coefficients and 0 otherwise.
//
// # Safety
// `fit` must be a live handle; `class_out` and `value` writable.
enum VcsStatus vcs_fit_class(const struct VcsFit *fit,
                             size_t j,
                             enum VcsClass *class_out,
                             double *value);

// Chosen tuning parameters; `lambda0` is NaN when no initial fit was run.
//
// # Safety
// `fit` must be a live handle and the outputs writable.
enum VcsStatus vcs_fit_lambdas(const struct VcsFit *fit,
                               double *lambda0,
                               double *lambda1,
                               double *lambda2);

// Convergence flag, scaled KKT residual and residual sum of squares.
//
// # Safety
// `fit` must be a live handle and the outputs writable.
enum VcsStatus vcs_fit_diagnostics(const struct VcsFit *fit,
                                   int *converged,
                                   double *kkt,
                                   double *rss);

// Number of points in the evaluation grid on [0, 1].
//
// # Safety
// `fit` must be NULL or a live handle.
size_t vcs_fit_grid_len(const struct VcsFit *fit);

// Copies the estimated coefficient function `j` on the evaluation grid into
// `values`, which must hold `vcs_fit_grid_len(fit)` doubles.
//
// # Safety
// `fit` must be a live handle and `values` writable for `len` doubles.
enum VcsStatus vcs_fit_function(const struct VcsFit *fit, size_t j, double *values, size_t len);

// Serializes the fit as JSON. Release the string with [`vcs_string_free`].
//
// # Safety
// `fit` must be a live handle and `out` writable.
enum VcsStatus vcs_fit_export_json(const struct VcsFit *fit, char **out);

// Runs the Monte Carlo study with default settings apart from the given
// arguments and returns the report as JSON.
//
// # Safety
// `out` must be writable.
enum VcsStatus vcs_simulate_json(size_t n,
                                 size_t p,
                                 size_t reps,
                                 uint64_t seed,
                                 double noise_var,
                                 char **out);

// # Safety
// `s` must be NULL or a string returned by this library not yet freed.
void vcs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VCSELECT_H */
