#ifndef TBCURV_H
#define TBCURV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum TbcStatus {
  TBC_STATUS_OK = 0,
  TBC_STATUS_NULL_POINTER = 1,
  TBC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * an expression or manifold string did not parse
   */
  TBC_STATUS_PARSE = 3,
  /**
   * the family is not a valid metric at the requested argument
   */
  TBC_STATUS_VALIDITY = 4,
  /**
   * a point is outside the chart or the metric degenerates there
   */
  TBC_STATUS_DOMAIN = 5,
  TBC_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * the closed form and the oracle disagree
   */
  TBC_STATUS_VERIFICATION_FAILED = 7,
  TBC_STATUS_INTERNAL = 8,
} TbcStatus;

/**
 * A natural metric family.
 */
typedef struct TbcFamily TbcFamily;

/**
 * A chart manifold from the catalog.
 */
typedef struct TbcManifold TbcManifold;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * Valid until the next call into this library from the same thread.
 */
const char *tbc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tbc_version(void);

/**
 * Family from a preset name: `sasaki`, `cheeger-gromoll`, `exp+`, `exp-`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TbcStatus tbc_family_preset(const char *name, struct TbcFamily **out);

/**
 * Family from two expressions in `t` (standing for `s = |v|^2`). A null
 * `beta` derives beta from alpha so that the vertical curvature function F
 * vanishes.
 *
 * # Safety
 * `alpha` (and `beta` when not null) must be NUL-terminated strings and
 * `out` a valid pointer.
 */
enum TbcStatus tbc_family_custom(const char *alpha, const char *beta, struct TbcFamily **out);

/**
 * Restricts the validated range of `s` to `[0, t_max]`.
 *
 * # Safety
 * `fam` must come from this library and not have been freed.
 */
enum TbcStatus tbc_family_set_t_max(struct TbcFamily *fam, double t_max);

/**
 * # Safety
 * `fam` must come from this library (or be null) and not be used afterwards.
 */
void tbc_family_free(struct TbcFamily *fam);

/**
 * `F(s)`.
 *
 * # Safety
 * `fam` must be a live handle and `out` a valid pointer.
 */
enum TbcStatus tbc_family_f(const struct TbcFamily *fam, double s, double *out);

/**
 * `H(s)`.
 *
 * # Safety
 * `fam` must be a live handle and `out` a valid pointer.
 */
enum TbcStatus tbc_family_h(const struct TbcFamily *fam, double s, double *out);

/**
 * Samples the validity conditions on `[0, t_max]`. `*valid` is set to 1 or
 * 0; when invalid, `*first_violation` receives the first failing `s`.
 *
 * # Safety
 * `fam` must be a live handle; `valid` must be valid; `first_violation`
 * may be null.
 */
enum TbcStatus tbc_family_validate(const struct TbcFamily *fam,
                                   size_t samples,
                                   int32_t *valid,
                                   double *first_violation);

/**
 * Manifold from a catalog string such as `sphere:2`, `hyperbolic:2`,
 * `euclidean:3` or `conformal:3:[[0.1,1,1,0]]`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TbcStatus tbc_manifold_new(const char *spec, struct TbcManifold **out);

/**
 * # Safety
 * `m` must come from this library (or be null) and not be used afterwards.
 */
void tbc_manifold_free(struct TbcManifold *m);

/**
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum TbcStatus tbc_manifold_dim(const struct TbcManifold *m, size_t *out);

/**
 * Closed-form curvature table `<R(e_a,e_b)e_c,e_d>` at `(x, v)`, written
 * row-major into `out` (`(2n)^4` entries). Indices `0..n` are horizontal
 * lifts, `n..2n` vertical lifts, with `e_1` along `v`.
 *
 * # Safety
 * `x` and `v` must point to `n` doubles; `out` to `out_len` doubles.
 */
enum TbcStatus tbc_tm_curvature(const struct TbcManifold *m,
                                const struct TbcFamily *fam,
                                const double *x,
                                const double *v,
                                size_t n,
                                double *out,
                                size_t out_len);

/**
 * Scalar curvature of the tangent bundle at `(x, v)`.
 *
 * # Safety
 * `x` and `v` must point to `n` doubles; `out` must be valid.
 */
enum TbcStatus tbc_tm_scalar(const struct TbcManifold *m,
                             const struct TbcFamily *fam,
                             const double *x,
                             const double *v,
                             size_t n,
                             double *out);

/**
 * Compares the closed-form table at one point with the numerical oracle.
 * Non-positive tolerances select the defaults. Returns
 * `VerificationFailed` when they disagree; `*max_abs_dev` (may be null) is
 * filled either way.
 *
 * # Safety
 * `x` and `v` must point to `n` doubles; `max_abs_dev` may be null.
 */
enum TbcStatus tbc_verify_point(const struct TbcManifold *m,
                                const struct TbcFamily *fam,
                                const double *x,
                                const double *v,
                                size_t n,
                                double tol_abs,
                                double tol_rel,
                                double *max_abs_dev);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TBCURV_H */
