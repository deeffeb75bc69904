#ifndef APSUMMA_H
#define APSUMMA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ApsClass {
  APS_CLASS_MS = 0,
  APS_CLASS_RBVS = 1,
  APS_CLASS_GM = 2,
  APS_CLASS_GM2_BETA = 3,
} ApsClass;

typedef enum ApsStatus {
  APS_STATUS_OK = 0,
  APS_STATUS_NULL_POINTER = 1,
  APS_STATUS_INVALID_ARGUMENT = 2,
  APS_STATUS_INVALID_FUNCTION = 3,
  APS_STATUS_NOT_STOCHASTIC = 4,
  APS_STATUS_UNKNOWN_FAMILY = 5,
  APS_STATUS_PARSE = 6,
  APS_STATUS_PANIC = 7,
  APS_STATUS_OTHER = 8,
} ApsStatus;

/**
 * Opaque almost periodic trigonometric sum.
 */
typedef struct ApsFunction ApsFunction;

/**
 * Opaque row of a summability matrix.
 */
typedef struct ApsRow ApsRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t aps_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aps_version(void);

/**
 * Parses a function from JSON (`{"alpha": .., "terms": [..]}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ApsStatus aps_function_from_json(const char *json, struct ApsFunction **out);

/**
 * Builds a function from parallel arrays of exponents and amplitudes.
 *
 * # Safety
 * Each array must hold `len` elements.
 */
enum ApsStatus aps_function_new(double alpha,
                                const double *lambdas,
                                const double *a_plus_re,
                                const double *a_plus_im,
                                const double *a_minus_re,
                                const double *a_minus_im,
                                size_t len,
                                struct ApsFunction **out);

/**
 * # Safety
 * `f` must be null or a handle from this library that has not been freed.
 */
void aps_function_free(struct ApsFunction *f);

/**
 * # Safety
 * `f` must be a live handle; out pointers must be writable.
 */
enum ApsStatus aps_function_info(const struct ApsFunction *f, double *alpha, double *lambda_max);

/**
 * `f(x)`.
 *
 * # Safety
 * `f` must be a live handle; out pointers must be writable.
 */
enum ApsStatus aps_function_eval(const struct ApsFunction *f, double x, double *re, double *im);

/**
 * Sum of the terms with exponent at most `gamma`.
 *
 * # Safety
 * `f` must be a live handle; out pointers must be writable.
 */
enum ApsStatus aps_threshold_partial_sum(const struct ApsFunction *f,
                                         double x,
                                         double gamma,
                                         double *re,
                                         double *im);

/**
 * Kernel-integral partial sum of index `k` (adjusted when an exponent
 * falls strictly inside the step), with its tail bound.
 *
 * # Safety
 * `f` must be a live handle; out pointers must be writable.
 */
enum ApsStatus aps_kernel_partial_sum(const struct ApsFunction *f,
                                      double x,
                                      size_t k,
                                      double abs_tolerance,
                                      double *re,
                                      double *im,
                                      double *tail_bound);

/**
 * # Safety
 * `out` must be writable.
 */
enum ApsStatus aps_psi_k(double alpha, size_t k, double t, double *out);

/**
 * `Σ_{k≥1} r^k sin(ky) sin(kz)` in closed form.
 *
 * # Safety
 * `out` must be writable.
 */
enum ApsStatus aps_geometric_sine_sum(double r, double y, double z, double *out);

/**
 * Lower and upper bounds on the best approximation of type `sigma` in S¹.
 *
 * # Safety
 * `f` must be a live handle; out pointers must be writable.
 */
enum ApsStatus aps_best_approx_bracket(const struct ApsFunction *f,
                                       double sigma,
                                       double *lower,
                                       double *upper);

/**
 * Row `n` of a named family (`cesaro`, `riesz`, `abel`). `param` is the
 * Riesz exponent or the Abel radius; pass NaN for the default.
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out` must be writable.
 */
enum ApsStatus aps_row_generate(const char *family, size_t n, double param, struct ApsRow **out);

/**
 * A finite row from `len` nonnegative entries.
 *
 * # Safety
 * `entries` must hold `len` elements; `out` must be writable.
 */
enum ApsStatus aps_row_explicit(size_t n, const double *entries, size_t len, struct ApsRow **out);

/**
 * # Safety
 * `row` must be null or a handle from this library that has not been freed.
 */
void aps_row_free(struct ApsRow *row);

/**
 * Membership and smallest constant for one class. `k` is set to +inf for
 * non-members. `c` is used by `Gm2Beta` only.
 *
 * # Safety
 * `row` must be a live handle; out pointers must be writable.
 */
enum ApsStatus aps_row_class(const struct ApsRow *row,
                             enum ApsClass class_,
                             double c,
                             bool *member,
                             double *k);

/**
 * `{Σ_k a_k |S_{αk/2}f(x) − f(x)|^q}^{1/q}` over the given row.
 *
 * # Safety
 * `f` and `row` must be live handles; `out` must be writable.
 */
enum ApsStatus aps_strong_mean(const struct ApsFunction *f,
                               double x,
                               const struct ApsRow *row,
                               double q,
                               double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* APSUMMA_H */
