#ifndef CAE_ANOMALY_H
#define CAE_ANOMALY_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CaeStatus {
  CAE_STATUS_OK = 0,
  CAE_STATUS_NULL_POINTER = 1,
  CAE_STATUS_INVALID_ARGUMENT = 2,
  CAE_STATUS_IO = 3,
  CAE_STATUS_FORMAT = 4,
  CAE_STATUS_DIMENSION_MISMATCH = 5,
  CAE_STATUS_NUMERIC = 6,
  CAE_STATUS_PANIC = 7,
} CaeStatus;

/**
 * Opaque autoencoder handle.
 */
typedef struct CaeAutoencoder CaeAutoencoder;

/**
 * Opaque image handle.
 */
typedef struct CaeImage CaeImage;

/**
 * Opaque one-class SVM handle.
 */
typedef struct CaeOcSvm CaeOcSvm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cae_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cae_version(void);

/**
 * Loads a binary PGM (P5) or PPM (P6) file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CaeStatus cae_image_load(const char *path, struct CaeImage **out);

/**
 * Builds an image from `height * width * channels` row-major,
 * channel-interleaved intensities in `[0, 1]`.
 *
 * # Safety
 * `pixels` must point to that many doubles; `out` must be writable.
 */
enum CaeStatus cae_image_from_pixels(size_t height,
                                     size_t width,
                                     size_t channels,
                                     const double *pixels,
                                     struct CaeImage **out);

/**
 * Writes the image as P5 or P6.
 *
 * # Safety
 * `img` must be a live handle; `path` a NUL-terminated string.
 */
enum CaeStatus cae_image_save(const struct CaeImage *img, const char *path);

/**
 * # Safety
 * `img` must be a live handle; the out pointers must be writable.
 */
enum CaeStatus cae_image_dims(const struct CaeImage *img,
                              size_t *height,
                              size_t *width,
                              size_t *channels);

/**
 * Copies the pixel buffer into `out`, which must hold exactly
 * `height * width * channels` doubles.
 *
 * # Safety
 * `img` must be a live handle; `out` must point to `len` writable doubles.
 */
enum CaeStatus cae_image_pixels(const struct CaeImage *img, double *out, size_t len);

/**
 * # Safety
 * `img` must be null or a handle not yet freed.
 */
void cae_image_free(struct CaeImage *img);

/**
 * Mean squared pixel difference.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum CaeStatus cae_l2_error(const struct CaeImage *a, const struct CaeImage *b, double *out);

/**
 * Mean SSIM with an 11-tap Gaussian window (sigma 1.5).
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum CaeStatus cae_ssim(const struct CaeImage *a, const struct CaeImage *b, double *out);

/**
 * Loads a `CAEM` autoencoder file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CaeStatus cae_model_load(const char *path, struct CaeAutoencoder **out);

/**
 * # Safety
 * `model` must be a live handle; `size` and `code_len` must be writable.
 */
enum CaeStatus cae_model_shape(const struct CaeAutoencoder *model, size_t *size, size_t *code_len);

/**
 * Reconstructs `img` and returns its `(L2, SSIM)` error features.
 *
 * # Safety
 * Handles must be live; `l2` and `ssim_out` must be writable.
 */
enum CaeStatus cae_model_error_features(const struct CaeAutoencoder *model,
                                        const struct CaeImage *img,
                                        double *l2,
                                        double *ssim_out);

/**
 * Writes the flattened encoder code of `img` into `out` (`len` must equal
 * the model's code length).
 *
 * # Safety
 * Handles must be live; `out` must point to `len` writable doubles.
 */
enum CaeStatus cae_model_encode(const struct CaeAutoencoder *model,
                                const struct CaeImage *img,
                                double *out,
                                size_t len);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void cae_model_free(struct CaeAutoencoder *model);

/**
 * Fits a ν-one-class SVM on `n` row-major rows of dimension `k`.
 * `gamma <= 0` selects `1 / (k * Var(x))`. The solver runs to a KKT
 * tolerance of 1e-6.
 *
 * # Safety
 * `x` must point to `n * k` doubles; `out` must be writable.
 */
enum CaeStatus cae_ocsvm_fit(const double *x,
                             size_t n,
                             size_t k,
                             double nu,
                             double gamma,
                             struct CaeOcSvm **out);

/**
 * Loads an `OCSV` model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CaeStatus cae_ocsvm_load(const char *path, struct CaeOcSvm **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum CaeStatus cae_ocsvm_save(const struct CaeOcSvm *model, const char *path);

/**
 * Feature dimension, support-vector count and convergence flag.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum CaeStatus cae_ocsvm_info(const struct CaeOcSvm *model,
                              size_t *dim,
                              size_t *support_vectors,
                              bool *converged);

/**
 * Signed decision value, positive on the inlier side.
 *
 * # Safety
 * `model` must be a live handle; `x` must point to `k` doubles.
 */
enum CaeStatus cae_ocsvm_decision(const struct CaeOcSvm *model,
                                  const double *x,
                                  size_t k,
                                  double *out);

/**
 * Sets `*inlier` to true iff the decision value is `>= 0`.
 *
 * # Safety
 * `model` must be a live handle; `x` must point to `k` doubles.
 */
enum CaeStatus cae_ocsvm_predict(const struct CaeOcSvm *model,
                                 const double *x,
                                 size_t k,
                                 bool *inlier);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void cae_ocsvm_free(struct CaeOcSvm *model);

/**
 * Mann–Whitney AUC of `scores` against `labels` (nonzero = positive).
 *
 * # Safety
 * `scores` and `labels` must point to `n` elements; `out` must be writable.
 */
enum CaeStatus cae_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAE_ANOMALY_H */
