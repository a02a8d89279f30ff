#ifndef DIVA_H
#define DIVA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum DivaStatus {
  DIVA_STATUS_OK = 0,
  DIVA_STATUS_NULL_POINTER = 1,
  DIVA_STATUS_INVALID_ARGUMENT = 2,
  DIVA_STATUS_LENGTH_MISMATCH = 3,
  DIVA_STATUS_IO = 4,
  DIVA_STATUS_CHECKPOINT = 5,
  DIVA_STATUS_BUFFER_TOO_SMALL = 6,
  DIVA_STATUS_PANIC = 7,
} DivaStatus;

// Opaque model handle.
typedef struct DivaModel DivaModel;

// One ranked peak of a derivative signal.
typedef struct DivaPeak {
  // Interpolated positive-to-negative zero crossing.
  double position;
  size_t rounded_index;
  // Sum of |D| between the bracketing crossings.
  double area;
} DivaPeak;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *diva_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *diva_version(void);

// Freshly initialized model with `input_dim` features.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum DivaStatus diva_model_init(size_t input_dim, uint64_t seed, struct DivaModel **out);

// Loads a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DivaStatus diva_model_load(const char *path, struct DivaModel **out);

// Decodes a checkpoint held in memory.
//
// # Safety
// `data` must point to `len` readable bytes and `out` must be valid.
enum DivaStatus diva_model_from_bytes(const uint8_t *data, size_t len, struct DivaModel **out);

// Writes a checkpoint file.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum DivaStatus diva_model_save(const struct DivaModel *model, const char *path);

// Releases a handle. NULL is ignored.
//
// # Safety
// `model` must come from a `diva_model_*` constructor and not be used
// afterwards.
void diva_model_free(struct DivaModel *model);

// Number of input features, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t diva_model_input_dim(const struct DivaModel *model);

// Latent dimension, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t diva_model_latent_dim(const struct DivaModel *model);

// Writes the 64-character hex checksum plus a NUL into `buf`.
//
// # Safety
// `model` must be a live handle and `buf` must hold `buf_len` bytes.
enum DivaStatus diva_model_checksum(const struct DivaModel *model, char *buf, size_t buf_len);

// Encoder means and log-variances of one input.
//
// # Safety
// `x` must hold `x_len` values; `mu` and `logvar` must each hold
// `latent_len` values.
enum DivaStatus diva_model_encode(const struct DivaModel *model,
                                  const double *x,
                                  size_t x_len,
                                  double *mu,
                                  double *logvar,
                                  size_t latent_len);

// Decoder output for latent point `z`.
//
// # Safety
// `z` must hold `z_len` values and `out` must hold `out_len` values.
enum DivaStatus diva_model_decode(const struct DivaModel *model,
                                  const double *z,
                                  size_t z_len,
                                  double *out,
                                  size_t out_len);

// First derivative of `values` on the uniform grid `grid` (both of length
// `n`). Writes `n - 1` midpoints and derivative values.
//
// # Safety
// `grid` and `values` must hold `n` values; `out_grid` and `out_values`
// must hold `n - 1`.
enum DivaStatus diva_differentiate(const double *grid,
                                   const double *values,
                                   size_t n,
                                   double *out_grid,
                                   double *out_values);

// Ranks the peaks of a derivative signal by area, largest first. Writes
// at most `capacity` peaks and stores the total number found in
// `found`; pass `capacity = 0` to query the count.
//
// # Safety
// `grid` and `values` must hold `n` values, `out` must hold `capacity`
// peaks and `found` must be valid.
enum DivaStatus diva_detect_peaks(const double *grid,
                                  const double *values,
                                  size_t n,
                                  struct DivaPeak *out,
                                  size_t capacity,
                                  size_t *found);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIVA_H */
