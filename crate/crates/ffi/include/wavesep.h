#ifndef WAVESEP_H
#define WAVESEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 to 5 match the command-line exit codes.
 */
typedef enum WavesepStatus {
  WAVESEP_STATUS_OK = 0,
  WAVESEP_STATUS_INTERNAL = 1,
  WAVESEP_STATUS_CONFIG = 2,
  WAVESEP_STATUS_DATASET = 3,
  WAVESEP_STATUS_DIVERGED = 4,
  WAVESEP_STATUS_IO = 5,
  WAVESEP_STATUS_NULL_POINTER = 6,
  WAVESEP_STATUS_BUFFER_TOO_SMALL = 7,
  WAVESEP_STATUS_PANIC = 8,
} WavesepStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct WavesepModel WavesepModel;

/**
 * Signal to distortion, interference and artifact ratios in dB.
 */
typedef struct WavesepMetrics {
  double sdr;
  double sir;
  double sar;
} WavesepMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *wavesep_last_error(void);

/**
 * Loads a checkpoint file and stores a new handle in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WavesepStatus wavesep_model_load(const char *path, struct WavesepModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`wavesep_model_load`] and not be used afterwards.
 */
void wavesep_model_free(struct WavesepModel *model);

/**
 * Sources emitted by [`wavesep_separate`], including the residual.
 *
 * # Safety
 * `model` must be a live handle or null (returns 0).
 */
size_t wavesep_model_num_sources(const struct WavesepModel *model);

/**
 * Name of source `index`, or null when out of range. Owned by the handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
const char *wavesep_model_source_name(const struct WavesepModel *model, size_t index);

/**
 * Receptive field in samples, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t wavesep_model_receptive_field(const struct WavesepModel *model);

/**
 * Number of trainable parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t wavesep_model_parameter_count(const struct WavesepModel *model);

/**
 * Expected input sample rate in Hz, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uint32_t wavesep_model_sample_rate(const struct WavesepModel *model);

/**
 * Separates `len` mono samples at `sample_rate`. Writes source `j` to
 * `out[j * len .. (j + 1) * len]`, so `out_len` must be at least
 * `wavesep_model_num_sources(model) * len`.
 *
 * # Safety
 * `mixture` must point to `len` floats and `out` to `out_len` floats.
 */
enum WavesepStatus wavesep_separate(const struct WavesepModel *model,
                                    const float *mixture,
                                    size_t len,
                                    uint32_t sample_rate,
                                    float *out,
                                    size_t out_len);

/**
 * BSS Eval of `estimate` against reference `target` out of `num_sources`
 * references stored back to back in `references` (each `len` samples),
 * allowing distortion filters of `filter_length` taps.
 *
 * # Safety
 * `references` must point to `num_sources * len` doubles, `estimate` to
 * `len` doubles, and `out` to one [`WavesepMetrics`].
 */
enum WavesepStatus wavesep_bss_eval(const double *references,
                                    size_t num_sources,
                                    size_t len,
                                    const double *estimate,
                                    size_t target,
                                    size_t filter_length,
                                    struct WavesepMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVESEP_H */
