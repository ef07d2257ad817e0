#ifndef FAULTLINE_H
#define FAULTLINE_H

/* Generated by cbindgen from faultline-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status of a faultline call. Nonzero values are failures; the matching
// message is available from [`fl_last_error_message`].
typedef enum FlStatus {
  FL_STATUS_OK = 0,
  // A required pointer argument was null.
  FL_STATUS_NULL_ARGUMENT = 1,
  // Arguments were structurally invalid (bad sizes, non-finite values).
  FL_STATUS_INVALID_INPUT = 2,
  // Two arguments disagreed about a dimension.
  FL_STATUS_DIMENSION_MISMATCH = 3,
  // A matrix was numerically singular where a solve was required.
  FL_STATUS_SINGULAR = 4,
  // A computation produced non-finite values or failed to converge.
  FL_STATUS_NUMERICAL = 5,
  // Text input could not be parsed.
  FL_STATUS_PARSE = 6,
  // An I/O operation failed.
  FL_STATUS_IO = 7,
  // The library panicked; the handle state is unchanged.
  FL_STATUS_PANIC = 8,
} FlStatus;

// Opaque transition-matrix handle.
typedef struct FlMatrix FlMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fl_version(void);

// Message describing this thread's most recent failure, or an empty
// string after a success. The pointer stays valid until the next
// faultline call on the same thread.
const char *fl_last_error_message(void);

// Creates a `rows × cols` matrix handle from row-major entries.
//
// # Safety
// `entries` must point to `rows * cols` readable doubles and `out` to a
// writable pointer slot.
enum FlStatus fl_matrix_new(const double *entries, size_t rows, size_t cols, struct FlMatrix **out);

// Releases a matrix handle. Null is a no-op.
//
// # Safety
// `matrix` must be null or a handle obtained from this library that has
// not been freed yet.
void fl_matrix_free(struct FlMatrix *matrix);

// Writes the matrix's row count to `out`.
//
// # Safety
// `matrix` must be a live handle and `out` writable.
enum FlStatus fl_matrix_rows(const struct FlMatrix *matrix, size_t *out);

// Writes the matrix's column count to `out`.
//
// # Safety
// `matrix` must be a live handle and `out` writable.
enum FlStatus fl_matrix_cols(const struct FlMatrix *matrix, size_t *out);

// Copies the matrix entries (row-major) into `out`, which holds `len`
// doubles; `len` must equal rows × cols.
//
// # Safety
// `matrix` must be a live handle and `out` writable for `len` doubles.
enum FlStatus fl_matrix_copy_entries(const struct FlMatrix *matrix, double *out, size_t len);

// Writes the feature dimension p = degree·(n + k) + 1 of the polynomial
// kernel to `out`.
//
// # Safety
// `out` must be writable.
enum FlStatus fl_feature_dim(size_t n, size_t k, size_t degree, size_t *out);

// Featurizes a state `x` (length n) and input `u` (length k) under the
// degree-`degree` polynomial kernel, writing p doubles to `out`.
//
// # Safety
// `x` and `u` must be readable for their stated lengths; `out` must be
// writable for `out_len` doubles.
enum FlStatus fl_featurize(size_t n,
                           size_t k,
                           size_t degree,
                           const double *x,
                           const double *u,
                           double *out,
                           size_t out_len);

// Log-density of `x` under the no-fault model N(x; As, I).
//
// # Safety
// `matrix` must be a live handle; `s`, `x` readable for their lengths;
// `out` writable.
enum FlStatus fl_loglik_normal(const struct FlMatrix *matrix,
                               const double *s,
                               size_t s_len,
                               const double *x,
                               size_t x_len,
                               double *out);

// Log of the fault marginal: x = Bs + ε with B matrix-normal around A.
//
// # Safety
// Same contract as [`fl_loglik_normal`].
enum FlStatus fl_loglik_fault(const struct FlMatrix *matrix,
                              const double *s,
                              size_t s_len,
                              const double *x,
                              size_t x_len,
                              double *out);

// Extracts the classifier features of one (s, x) pair into `out[3]` as
// (residual_trace, cross_trace, logdet_term).
//
// # Safety
// `matrix` must be a live handle; `s`, `x` readable; `out` writable for
// three doubles.
enum FlStatus fl_extract_features(const struct FlMatrix *matrix,
                                  const double *s,
                                  size_t s_len,
                                  const double *x,
                                  size_t x_len,
                                  double *out);

// Classifies one (s, x) pair: the log-likelihood ratio
// normal − fault goes to `out_value`, the thresholded decision
// (1 = fault, 0 = normal; ties are normal) to `out_is_fault`.
//
// # Safety
// `matrix` must be a live handle; `s`, `x` readable; both out-pointers
// writable.
enum FlStatus fl_classify(const struct FlMatrix *matrix,
                          const double *s,
                          size_t s_len,
                          const double *x,
                          size_t x_len,
                          double *out_value,
                          int *out_is_fault);

// Classifies a window of `samples` pairs. `s` is sample-major
// `samples × feature_dim`, `x` is sample-major `samples × output_dim`;
// the summed ratio and decision are written like in [`fl_classify`].
//
// # Safety
// `matrix` must be a live handle; `s` readable for
// `samples * feature_dim` doubles and `x` for `samples * output_dim`;
// both out-pointers writable.
enum FlStatus fl_classify_sequence(const struct FlMatrix *matrix,
                                   const double *s,
                                   const double *x,
                                   size_t samples,
                                   double *out_value,
                                   int *out_is_fault);

// Fits `output_dim × feature_dim` transition matrix entries by ridge
// least squares over `samples` pairs (layouts as in
// [`fl_classify_sequence`]) and returns a new handle through `out`.
//
// # Safety
// `s` must be readable for `samples * feature_dim` doubles, `x` for
// `samples * output_dim`, and `out` must be a writable pointer slot.
enum FlStatus fl_fit_ls(const double *s,
                        const double *x,
                        size_t samples,
                        size_t feature_dim,
                        size_t output_dim,
                        double ridge_alpha,
                        struct FlMatrix **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FAULTLINE_H */
