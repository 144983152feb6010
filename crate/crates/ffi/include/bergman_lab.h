#ifndef BERGMAN_LAB_H
#define BERGMAN_LAB_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BlStatus {
  BL_STATUS_OK = 0,
  BL_STATUS_NULL_POINTER = 1,
  BL_STATUS_INVALID_ARGUMENT = 2,
  BL_STATUS_INADMISSIBLE_POINT = 3,
  BL_STATUS_DIMENSION_MISMATCH = 4,
  BL_STATUS_INVALID_MEASURE = 5,
  BL_STATUS_NUMERICAL = 6,
  BL_STATUS_PANIC = 7,
} BlStatus;

// Opaque model domain.
typedef struct BlDomain BlDomain;

// Opaque measure.
typedef struct BlMeasure BlMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *bl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *bl_version(void);

// The unit ball of `C^n` (`kind = 0` with `n = 1` gives the disk).
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum BlStatus bl_domain_new(uint32_t kind, size_t n, struct BlDomain **out);

// # Safety
// `d` must come from [`bl_domain_new`] and not be used afterwards; null is
// ignored.
void bl_domain_free(struct BlDomain *d);

// Complex dimension `n`, or 0 for a null handle.
//
// # Safety
// `d` must be null or a live handle.
size_t bl_domain_dim(const struct BlDomain *d);

// Parses a measure from its JSON form, e.g.
// `{"variant":"density","eta":1}` or
// `{"variant":"atomic","atoms":[[0.5,0.0,1.0]]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid handle slot.
enum BlStatus bl_measure_from_json(const char *json, struct BlMeasure **out);

// # Safety
// `m` must come from [`bl_measure_from_json`] and not be used afterwards;
// null is ignored.
void bl_measure_free(struct BlMeasure *m);

// Bergman kernel `K(z, w)`.
//
// # Safety
// `z`, `w` must point to `2n` doubles; `re`, `im` must be writable.
enum BlStatus bl_kernel(const struct BlDomain *d,
                        const double *z,
                        const double *w,
                        double *re,
                        double *im);

// Berezin transform `B mu(z)` with the default quadrature.
//
// # Safety
// `z` must point to `2n` doubles; `out` must be writable.
enum BlStatus bl_berezin(const struct BlMeasure *m,
                         const struct BlDomain *d,
                         const double *z,
                         double *out);

// `mu(B(z0, r))` for the pseudohyperbolic ball of radius `r`.
//
// # Safety
// `z0` must point to `2n` doubles; `out` must be writable.
enum BlStatus bl_ball_mass(const struct BlMeasure *m,
                           const struct BlDomain *d,
                           const double *z0,
                           double r,
                           double *out);

// `mu(B(z0, r)) / nu(B(z0, r))^theta`.
//
// # Safety
// `z0` must point to `2n` doubles; `out` must be writable.
enum BlStatus bl_carleson_ratio(const struct BlMeasure *m,
                                const struct BlDomain *d,
                                const double *z0,
                                double r,
                                double theta,
                                double *out);

// Integrability gain `G = p^2 / ((n+1)/eta - p)` of `T_{delta^eta}`;
// `InvalidArgument` outside the case `(n+1)/(n+1-eta) < p'` where it applies.
enum BlStatus bl_gain_exponent(size_t n, double eta, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERGMAN_LAB_H */
