#ifndef SUBLINOPT_H
#define SUBLINOPT_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SUBLIN_PROBLEM_PERCEPTRON 0

#define SUBLIN_PROBLEM_MEB 1

#define SUBLIN_PROBLEM_MARGIN 2

#define SUBLIN_PROBLEM_GAME 3

#define SUBLIN_PROBLEM_KERNEL_PERCEPTRON 4

#define SUBLIN_PROBLEM_KERNEL_MEB 5

#define SUBLIN_PROFILE_PAPER 0

#define SUBLIN_PROFILE_TUNED 1

/**
 * One run, probability 1/2 guarantee.
 */
#define SUBLIN_MODE_SINGLE 0

/**
 * Repeated runs with verification until failure probability `delta`.
 */
#define SUBLIN_MODE_AMPLIFIED 1

/**
 * Repeated runs until an exact check accepts.
 */
#define SUBLIN_MODE_LAS_VEGAS 2

/**
 * Result of every fallible call.
 */
typedef enum SublinStatus {
  SUBLIN_STATUS_OK = 0,
  SUBLIN_STATUS_NULL_POINTER = 1,
  SUBLIN_STATUS_INVALID_ARGUMENT = 2,
  SUBLIN_STATUS_IO = 3,
  SUBLIN_STATUS_PARSE = 4,
  SUBLIN_STATUS_NORM_VIOLATION = 5,
  SUBLIN_STATUS_CONTRACT = 6,
  SUBLIN_STATUS_AMPLIFICATION_FAILED = 7,
  SUBLIN_STATUS_ORACLE_NON_CONVERGENCE = 8,
  SUBLIN_STATUS_BUFFER_TOO_SMALL = 9,
  SUBLIN_STATUS_PANIC = 10,
} SublinStatus;

/**
 * An instance matrix.
 */
typedef struct SublinMatrix SublinMatrix;

/**
 * A solver result, with a certificate when the mode produced one.
 */
typedef struct SublinReport SublinReport;

/**
 * Solver parameters. Start from `sublin_config_default()`.
 */
typedef struct SublinConfig {
  double eps;
  double delta;
  uint64_t seed;
  /**
   * `SUBLIN_PROFILE_*`.
   */
  uint32_t profile;
  /**
   * `SUBLIN_MODE_*`.
   */
  uint32_t mode;
  /**
   * Iteration count override; 0 keeps the schedule.
   */
  uint64_t iterations;
} SublinConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static storage.
 */
const char *sublin_version(void);

/**
 * `eps = 0.1`, `delta = 0.1`, seed 0, paper profile, single run.
 */
struct SublinConfig sublin_config_default(void);

/**
 * Builds a matrix from `n * d` row-major doubles. With `check_norms`, rows
 * outside the unit ball are rejected.
 *
 * # Safety
 * `data` must point to `n * d` readable doubles and `out` to writable
 * storage for one pointer.
 */
enum SublinStatus sublin_matrix_from_dense(const double *data,
                                           size_t n,
                                           size_t d,
                                           bool check_norms,
                                           struct SublinMatrix **out);

/**
 * Loads an instance file (header `n d`, then `col:value` pairs per row).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SublinStatus sublin_matrix_load(const char *path, bool check_norms, struct SublinMatrix **out);

/**
 * Number of rows; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t sublin_matrix_rows(const struct SublinMatrix *m);

/**
 * Number of columns; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t sublin_matrix_cols(const struct SublinMatrix *m);

/**
 * Number of nonzero entries; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t sublin_matrix_nnz(const struct SublinMatrix *m);

/**
 * Releases a matrix; NULL is ignored.
 *
 * # Safety
 * `m` must be NULL or a handle not freed before.
 */
void sublin_matrix_free(struct SublinMatrix *m);

/**
 * Runs a linear solver (`SUBLIN_PROBLEM_PERCEPTRON`, `_MEB`, `_MARGIN`,
 * `_GAME`). Amplified mode covers perceptron and MEB; Las Vegas mode
 * covers perceptron and MEB.
 *
 * # Safety
 * `m` and `cfg` must be live, `out` writable.
 */
enum SublinStatus sublin_solve(const struct SublinMatrix *m,
                               uint32_t problem,
                               const struct SublinConfig *cfg,
                               struct SublinReport **out);

/**
 * Runs the QP over the simplex with linear term `b` (`n_b` = rows, each
 * `|b(i)| <= 1`). Single mode only.
 *
 * # Safety
 * `m` and `cfg` must be live, `b` must hold `n_b` doubles, `out` writable.
 */
enum SublinStatus sublin_solve_qp(const struct SublinMatrix *m,
                                  const double *b,
                                  size_t n_b,
                                  const struct SublinConfig *cfg,
                                  struct SublinReport **out);

/**
 * Runs `SUBLIN_PROBLEM_KERNEL_PERCEPTRON` or `_KERNEL_MEB` with a kernel
 * given as text (`"poly:q=2"`, `"gauss:kappa=1.5"`). `labels` may be NULL;
 * otherwise it holds `n_labels` values of +-1 (perceptron only). Single and
 * Las Vegas modes.
 *
 * # Safety
 * `m` and `cfg` must be live, `kernel` NUL-terminated, `labels` NULL or
 * `n_labels` doubles, `out` writable.
 */
enum SublinStatus sublin_solve_kernel(const struct SublinMatrix *m,
                                      uint32_t problem,
                                      const char *kernel,
                                      const double *labels,
                                      size_t n_labels,
                                      const struct SublinConfig *cfg,
                                      struct SublinReport **out);

/**
 * Exact objective of the returned point (margin, squared radius, value);
 * NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
double sublin_report_achieved(const struct SublinReport *r);

/**
 * Exact bound certified by the dual average; NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
double sublin_report_dual_bound(const struct SublinReport *r);

/**
 * Iterations of the accepted run; 0 for NULL.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
uint64_t sublin_report_iterations(const struct SublinReport *r);

/**
 * Matrix entries read, including every attempt and verification when a
 * certificate is present; 0 for NULL.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
uint64_t sublin_report_entries_read(const struct SublinReport *r);

/**
 * Wall time of the accepted run in seconds; NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
double sublin_report_wall_time(const struct SublinReport *r);

/**
 * Length of `x_bar` (0 for kernel problems and NULL).
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
size_t sublin_report_x_len(const struct SublinReport *r);

/**
 * Copies `x_bar` into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `r` must be live and `buf` must have room for `len` doubles.
 */
enum SublinStatus sublin_report_x_bar(const struct SublinReport *r, double *buf, size_t len);

/**
 * 1 if the report carries an accepted certificate, 0 if rejected, -1 if
 * there is none (single mode or NULL).
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
int32_t sublin_report_certificate(const struct SublinReport *r);

/**
 * The full report as JSON (floats to 17 significant digits). Free with
 * `sublin_string_free`; NULL on failure.
 *
 * # Safety
 * `r` must be NULL or a live report handle.
 */
char *sublin_report_to_json(const struct SublinReport *r);

/**
 * Releases a string returned by this library; NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string from `sublin_report_to_json` not freed before.
 */
void sublin_string_free(char *s);

/**
 * Releases a report; NULL is ignored.
 *
 * # Safety
 * `r` must be NULL or a handle not freed before.
 */
void sublin_report_free(struct SublinReport *r);

/**
 * Exact margin of the rows to additive tolerance `tol`.
 *
 * # Safety
 * `m` must be live and `value` writable.
 */
enum SublinStatus sublin_exact_margin(const struct SublinMatrix *m, double tol, double *value);

/**
 * Exact squared radius of the minimum enclosing ball of the rows.
 *
 * # Safety
 * `m` must be live and `sq_radius` writable.
 */
enum SublinStatus sublin_exact_meb(const struct SublinMatrix *m, double tol, double *sq_radius);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sublin_last_error(void);

/**
 * Forgets the last error message of this thread.
 */
void sublin_clear_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBLINOPT_H */
