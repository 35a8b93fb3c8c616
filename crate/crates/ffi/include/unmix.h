#ifndef UNMIX_H
#define UNMIX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UnmixStatus {
  UNMIX_STATUS_OK = 0,
  UNMIX_STATUS_NULL_POINTER = 1,
  UNMIX_STATUS_INVALID_ARGUMENT = 2,
  UNMIX_STATUS_DIMENSION_MISMATCH = 3,
  UNMIX_STATUS_INDEX_OUT_OF_RANGE = 4,
  UNMIX_STATUS_SINGULAR_GRAM = 5,
  UNMIX_STATUS_NUMERICAL_FAILURE = 6,
  UNMIX_STATUS_ENUMERATION_TOO_LARGE = 7,
  UNMIX_STATUS_PANIC = 8,
  UNMIX_STATUS_OTHER = 9,
} UnmixStatus;

typedef enum UnmixSolveMode {
  UNMIX_SOLVE_MODE_REDUCED = 0,
  UNMIX_SOLVE_MODE_ALTERNATING = 1,
} UnmixSolveMode;

// Opaque dense matrix.
typedef struct UnmixMatrix UnmixMatrix;

typedef struct UnmixCertificate {
  double condition_value;
  // Smallest admissible c/d; `INFINITY` when the condition fails.
  double cd_bound;
  // Lower end of the α interval divided by d.
  double alpha_min_per_d;
  // Upper end of the α interval is `(c - d * signal_norm) / sensitivity`.
  double signal_norm;
  double sensitivity;
  bool satisfiable;
} UnmixCertificate;

typedef struct UnmixRegionSummary {
  double r_value;
  double sigma_value;
  double theta_min;
  double failure_fraction;
  uint64_t supports_checked;
} UnmixRegionSummary;

typedef struct UnmixSolveOptions {
  enum UnmixSolveMode mode;
  // Reduced mode iteration cap.
  size_t max_iters;
  // Residual tolerance; negative disables it in alternating mode.
  double tol;
  size_t outer_iters;
  size_t inner_iters;
} UnmixSolveOptions;

typedef struct UnmixSolveInfo {
  size_t iterations;
  double objective;
  double optimality_residual;
} UnmixSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *unmix_last_error_message(void);

// Copies a row-major `rows x cols` buffer into a new matrix handle.
//
// # Safety
// `data` must point to `rows * cols` readable doubles and `out` must be
// writable.
enum UnmixStatus unmix_matrix_new(size_t rows,
                                  size_t cols,
                                  const double *data,
                                  struct UnmixMatrix **out);

// # Safety
// `m` must be null or a handle from [`unmix_matrix_new`] not yet freed.
void unmix_matrix_free(struct UnmixMatrix *m);

// # Safety
// `m` must be a live handle; `rows` and `cols` writable.
enum UnmixStatus unmix_matrix_shape(const struct UnmixMatrix *m, size_t *rows, size_t *cols);

// Recovery certificate for the support given as `support_len` column
// indices.
//
// # Safety
// `m` must be a live handle, `support` must hold `support_len` indices and
// `out` must be writable.
enum UnmixStatus unmix_certificate(const struct UnmixMatrix *m,
                                   double beta,
                                   const size_t *support,
                                   size_t support_len,
                                   struct UnmixCertificate *out);

// Admissible `[lo, hi)` for α given signal floor `c` and noise level `d`.
// `*nonempty` is false when no α works; `lo` and `hi` are then unspecified.
//
// # Safety
// As for [`unmix_certificate`]; `lo`, `hi` and `nonempty` writable.
enum UnmixStatus unmix_alpha_interval(const struct UnmixMatrix *m,
                                      double beta,
                                      const size_t *support,
                                      size_t support_len,
                                      double c,
                                      double d,
                                      double *lo,
                                      double *hi,
                                      bool *nonempty);

// Worst case over all supports of size exactly `k`. When `worst_support`
// is non-null it receives the `k` indices of the maximizing support.
//
// # Safety
// `m` must be a live handle, `out` writable and `worst_support` null or
// writable for `k` entries.
enum UnmixStatus unmix_region_summary(const struct UnmixMatrix *m,
                                      double beta,
                                      size_t k,
                                      struct UnmixRegionSummary *out,
                                      size_t *worst_support);

// Default options: reduced mode, 100000 iterations, tolerance 1e-10,
// 50 outer by 50 inner iterations for alternating mode.
struct UnmixSolveOptions unmix_solve_options_default(void);

// Minimizes the multi-penalty functional for data `y` of length `rows`.
// `u_out` and `v_out` must each hold `cols` doubles.
//
// # Safety
// `m` must be a live handle, `y` readable for `rows` entries, `u_out` and
// `v_out` writable for `cols` entries, `opts` readable and `info` null or
// writable.
enum UnmixStatus unmix_solve(const struct UnmixMatrix *m,
                             const double *y,
                             size_t y_len,
                             double alpha,
                             double beta,
                             const struct UnmixSolveOptions *opts,
                             double *u_out,
                             double *v_out,
                             struct UnmixSolveInfo *info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNMIX_H */
