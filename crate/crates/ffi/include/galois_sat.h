#ifndef GALOIS_SAT_H
#define GALOIS_SAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsatStatus {
  GSAT_STATUS_OK = 0,
  GSAT_STATUS_NULL_POINTER = 1,
  /**
   * The inputs were rejected before any computation.
   */
  GSAT_STATUS_INVALID_INPUT = 2,
  /**
   * A computation failed numerically.
   */
  GSAT_STATUS_NUMERICAL = 3,
  GSAT_STATUS_PANIC = 4,
} GsatStatus;

typedef enum GsatClassification {
  GSAT_CLASSIFICATION_REDUCIBLE = 0,
  GSAT_CLASSIFICATION_CASE2_SOLVABLE = 1,
  GSAT_CLASSIFICATION_SL2 = 2,
  GSAT_CLASSIFICATION_INCONCLUSIVE = 3,
} GsatClassification;

typedef enum GsatMatrixClass {
  GSAT_MATRIX_CLASS_IDENTITY = 0,
  GSAT_MATRIX_CLASS_UNIPOTENT_NONTRIVIAL = 1,
  GSAT_MATRIX_CLASS_UNIPOTENT_AMBIGUOUS = 2,
  GSAT_MATRIX_CLASS_OTHER = 3,
} GsatMatrixClass;

/**
 * Opaque handle to the rationalized variational equation of one family member.
 */
typedef struct GsatProblem GsatProblem;

/**
 * Series data at infinity. Coefficients are complex, split into real and imaginary parts.
 */
typedef struct GsatFrobenius {
  double exponent_low;
  double exponent_high;
  uint32_t gap;
  double f_re[3];
  double f_im[3];
  double g_re;
  double g_im;
  bool log_present;
  bool near_threshold;
} GsatFrobenius;

/**
 * Row-major 2×2 complex matrix.
 */
typedef struct GsatMatrix2 {
  double re[4];
  double im[4];
} GsatMatrix2;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *gsat_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gsat_version(void);

/**
 * Builds the problem for parameters (C, k, ξ). On success `*out` owns a handle.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum GsatStatus gsat_problem_new(double c, double k, double xi, struct GsatProblem **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `p` must be null or a handle from [`gsat_problem_new`] not yet freed.
 */
void gsat_problem_free(struct GsatProblem *p);

/**
 * Runs Kovacic's algorithm and the logarithm test at infinity.
 *
 * # Safety
 * `p` must be a live handle; `out` must be null or writable.
 */
enum GsatStatus gsat_problem_classify(const struct GsatProblem *p,
                                      double tol,
                                      enum GsatClassification *out);

/**
 * Full classification report as schema-versioned JSON. Release with [`gsat_string_free`].
 *
 * # Safety
 * `p` must be a live handle; `out` must be null or writable.
 */
enum GsatStatus gsat_problem_classify_json(const struct GsatProblem *p, double tol, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void gsat_string_free(char *s);

/**
 * # Safety
 * `p` must be a live handle; `out` must be null or writable.
 */
enum GsatStatus gsat_problem_frobenius(const struct GsatProblem *p, struct GsatFrobenius *out);

/**
 * Monodromy around a loop enclosing every finite singularity, based at 0.
 *
 * # Safety
 * `p` must be a live handle; `out` and `class_out` must be null or writable.
 */
enum GsatStatus gsat_problem_monodromy_infinity(const struct GsatProblem *p,
                                                double tol,
                                                struct GsatMatrix2 *out,
                                                enum GsatMatrixClass *class_out);

/**
 * sn, cn, dn at real argument `u` with modulus k in (0, 1).
 *
 * # Safety
 * Output pointers must be null or writable.
 */
enum GsatStatus gsat_jacobi(double u, double k, double *sn, double *cn, double *dn);

/**
 * Complete elliptic integral of the first kind K(k).
 *
 * # Safety
 * `out` must be null or writable.
 */
enum GsatStatus gsat_complete_k(double k, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GALOIS_SAT_H */
