/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef STRAIN_IQA_H
#define STRAIN_IQA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum SiaStatus {
  SIA_STATUS_OK = 0,
  SIA_STATUS_NULL_POINTER = 1,
  SIA_STATUS_INVALID_PARAMETER = 2,
  SIA_STATUS_IO = 3,
  SIA_STATUS_DECODE = 4,
  SIA_STATUS_SHAPE = 5,
  SIA_STATUS_DEGENERATE = 6,
  SIA_STATUS_INVARIANT = 7,
  SIA_STATUS_PARSE = 8,
  SIA_STATUS_PANIC = 9,
} SiaStatus;

/*
 Grayscale image.
 */
typedef struct SiaImage SiaImage;

/*
 64×64 tile Jacobian.
 */
typedef struct SiaJacobian SiaJacobian;

/*
 Connectivity kernel (Gaussian or difference of Gaussians).
 */
typedef struct SiaKernel SiaKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static nul-terminated string.
 */
const char *sia_version(void);

/*
 Message of the last failure on this thread, or null if none. Valid until
 the next failing call on the same thread.
 */
const char *sia_last_error_message(void);

/*
 Creates an image from `width * height` row-major luminance values.

 # Safety
 `values` must point to `width * height` readable doubles; `out` must be writable.
 */
enum SiaStatus sia_image_new(size_t width,
                             size_t height,
                             const double *values,
                             struct SiaImage **out);

/*
 Decodes a PNG, PGM/PPM or JPEG file to grayscale, optionally applying the
 per-image luminance stretch to [0, 255].

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum SiaStatus sia_image_load(const char *path, bool stretch, struct SiaImage **out);

/*
 # Safety
 `image` must be a live handle; `width` and `height` must be writable.
 */
enum SiaStatus sia_image_dimensions(const struct SiaImage *image, size_t *width, size_t *height);

/*
 # Safety
 `image` must be null or a handle not yet freed.
 */
void sia_image_free(struct SiaImage *image);

/*
 Gaussian connectivity kernel. Pass `threshold <= 0` for the default 1e-4.

 # Safety
 `out` must be writable.
 */
enum SiaStatus sia_kernel_gaussian(double sigma, double threshold, struct SiaKernel **out);

/*
 Difference-of-Gaussians kernel. Pass `threshold <= 0` for the default 1e-4.

 # Safety
 `out` must be writable.
 */
enum SiaStatus sia_kernel_dog(double sigma_center,
                              double sigma_surround,
                              double alpha,
                              double threshold,
                              struct SiaKernel **out);

/*
 # Safety
 `kernel` must be a live handle; `out` must be writable.
 */
enum SiaStatus sia_kernel_radius(const struct SiaKernel *kernel, size_t *out);

/*
 # Safety
 `kernel` must be null or a handle not yet freed.
 */
void sia_kernel_free(struct SiaKernel *kernel);

/*
 Strained squared distance `‖W(deg − ref)‖²` for a connectivity kernel.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum SiaStatus sia_score_pair(const struct SiaImage *reference,
                              const struct SiaImage *degraded,
                              const struct SiaKernel *kernel,
                              double *out);

/*
 Squared Euclidean distance.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum SiaStatus sia_euclidean(const struct SiaImage *reference,
                             const struct SiaImage *degraded,
                             double *out);

/*
 Mean SSIM with the default 11×11, σ = 1.5 window and L = 255.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum SiaStatus sia_ssim(const struct SiaImage *reference,
                        const struct SiaImage *degraded,
                        double *out);

/*
 # Safety
 `out` must be writable.
 */
enum SiaStatus sia_jacobian_identity(struct SiaJacobian **out);

/*
 Loads a tile Jacobian file written by `strain-iqa train`.

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum SiaStatus sia_jacobian_load(const char *path, struct SiaJacobian **out);

/*
 Entry `(row, col)` of the 64×64 matrix.

 # Safety
 `jacobian` must be a live handle; `out` must be writable.
 */
enum SiaStatus sia_jacobian_get(const struct SiaJacobian *jacobian,
                                size_t row,
                                size_t col,
                                double *out);

/*
 # Safety
 `jacobian` must be null or a handle not yet freed.
 */
void sia_jacobian_free(struct SiaJacobian *jacobian);

/*
 Sum over 8×8 tiles of `‖J·Δ_tile‖²`. Image sides must be multiples of 8.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum SiaStatus sia_tiled_distance(const struct SiaImage *reference,
                                  const struct SiaImage *degraded,
                                  const struct SiaJacobian *jacobian,
                                  double *out);

/*
 Sample Pearson correlation of two length-`n` series.

 # Safety
 `x` and `y` must point to `n` readable doubles; `out` must be writable.
 */
enum SiaStatus sia_pearson(const double *x, const double *y, size_t n, double *out);

/*
 Spearman rank correlation (average ranks for ties).

 # Safety
 `x` and `y` must point to `n` readable doubles; `out` must be writable.
 */
enum SiaStatus sia_spearman(const double *x, const double *y, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRAIN_IQA_H */
