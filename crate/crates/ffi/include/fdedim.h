#ifndef FDEDIM_H
#define FDEDIM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum FdedimStatus {
  FDEDIM_STATUS_OK = 0,
  /**
   * Bad argument, configuration or violated precondition.
   */
  FDEDIM_STATUS_USAGE = 1,
  /**
   * A numerical routine could not deliver a trustworthy answer.
   */
  FDEDIM_STATUS_NUMERICAL = 2,
  /**
   * Filesystem or serialization failure.
   */
  FDEDIM_STATUS_IO = 3,
  /**
   * The requested bound exists only under a contraction condition that
   * fails for these constants.
   */
  FDEDIM_STATUS_INFEASIBLE = 4,
  /**
   * The quantity does not exist, e.g. no real characteristic root.
   */
  FDEDIM_STATUS_NOT_FOUND = 5,
  FDEDIM_STATUS_NULL_POINTER = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  FDEDIM_STATUS_INTERNAL = 7,
} FdedimStatus;

/**
 * Opaque ordered spectrum.
 */
typedef struct FdedimSpectrum FdedimSpectrum;

/**
 * Constants of the squeezing property.
 */
typedef struct FdedimConstants {
  double m1;
  double m2;
  double m3;
  double lambda0;
  double lambda1;
  size_t rank;
  double t0;
} FdedimConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *fdedim_last_error(void);

/**
 * Principal branch of the Lambert W function, `x >= -1/e`.
 */
enum FdedimStatus fdedim_lambert_w0(double x, double *out);

/**
 * Rightmost real root of `lambda + c + b e^{-lambda r} = 0`.
 */
enum FdedimStatus fdedim_real_rightmost_root(double c, double b, double r, double *out);

/**
 * Ordered spectrum of the reaction-diffusion equation over modes
 * `1..=max_mode` above `floor`. A NaN floor selects the lowest floor that
 * provably covers every omitted mode.
 */
enum FdedimStatus fdedim_spectrum_new(double a,
                                      double b,
                                      double r,
                                      size_t max_mode,
                                      double floor,
                                      struct FdedimSpectrum **out);

/**
 * Number of distinct real parts in the table.
 */
enum FdedimStatus fdedim_spectrum_len(const struct FdedimSpectrum *spectrum, size_t *out);

/**
 * Level `m` (1-based): real part, its multiplicity and the cumulative
 * dimension `k_m`.
 */
enum FdedimStatus fdedim_spectrum_level(const struct FdedimSpectrum *spectrum,
                                        size_t m,
                                        double *rho,
                                        size_t *multiplicity,
                                        size_t *k);

void fdedim_spectrum_free(struct FdedimSpectrum *spectrum);

/**
 * Hausdorff dimension bound at `alpha` in (0, 2].
 */
enum FdedimStatus fdedim_hausdorff_bound(const struct FdedimConstants *constants,
                                         double alpha,
                                         double *out);

/**
 * Fractal dimension bound at `alpha` in (0, M1).
 */
enum FdedimStatus fdedim_fractal_bound(const struct FdedimConstants *constants,
                                       double alpha,
                                       double *out);

/**
 * Upper bound on the number of radius-`r2` balls covering a radius-`r1`
 * ball in dimension `m`.
 */
enum FdedimStatus fdedim_covering_bound(size_t m, double r1, double r2, double *out);

/**
 * Radius of the absorbing ball for `||S(t)|| <= k0 e^{-gamma t}` and a
 * nonlinearity with Lipschitz constant `lipschitz` and `|f(0)| = f0`.
 */
enum FdedimStatus fdedim_absorbing_radius(double k0,
                                          double gamma,
                                          double lipschitz,
                                          double f0,
                                          double *out);

/**
 * Runs a CLI verb (`"pipeline"`, `"bounds"`, ...) on a JSON config string.
 * Output files go to the config's `output_dir`. On `Ok` or `Infeasible`
 * the one-line summary is returned in `summary`, to be released with
 * [`fdedim_string_free`].
 */
enum FdedimStatus fdedim_run(const char *verb, const char *config_json, char **summary);

/**
 * Releases a string returned by the library.
 */
void fdedim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDEDIM_H */
