#ifndef IBNN_H
#define IBNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum IbnnStatus {
  IBNN_STATUS_OK = 0,
  IBNN_STATUS_NULL_POINTER = 1,
  IBNN_STATUS_INVALID_ARGUMENT = 2,
  IBNN_STATUS_DIMENSION_MISMATCH = 3,
  IBNN_STATUS_FORMAT = 4,
  IBNN_STATUS_IO = 5,
  IBNN_STATUS_TRAINING = 6,
  IBNN_STATUS_PANIC = 7,
} IbnnStatus;

/**
 * How each member's highest density region is computed.
 */
typedef enum IbnnHdrMethod {
  /**
   * Mean plus/minus a normal quantile times the predictive sd.
   */
  IBNN_HDR_METHOD_GAUSSIAN = 0,
  /**
   * Shortest window over Monte Carlo samples (needs `n_mc >= 20`).
   */
  IBNN_HDR_METHOD_EMPIRICAL_SHORTEST = 1,
  /**
   * Kernel density level set; may be a union of intervals.
   */
  IBNN_HDR_METHOD_GRID_DENSITY = 2,
} IbnnHdrMethod;

/**
 * A finite credal set over class labels, given by its extreme points.
 */
typedef struct IbnnCredalSet IbnnCredalSet;

/**
 * A trained posterior credal set.
 */
typedef struct IbnnPosteriorSet IbnnPosteriorSet;

/**
 * Shape of a posterior set.
 */
typedef struct IbnnSetInfo {
  size_t members;
  size_t input_dim;
  size_t output_dim;
  /**
   * True for a softmax head (labels), false for Gaussian regression.
   */
  bool classification;
} IbnnSetInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. Valid until the next `ibnn_*` call on the thread.
 */
const char *ibnn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ibnn_version(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from an `ibnn_*` function that documents the string as
 * owned by the caller, and must not be freed twice.
 */
void ibnn_string_free(char *s);

/**
 * Parses a posterior set saved as JSON (the `ibnn train` output).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum IbnnStatus ibnn_posterior_set_from_json(const char *json, struct IbnnPosteriorSet **out);

/**
 * Serializes a posterior set to JSON; free the result with
 * [`ibnn_string_free`].
 *
 * # Safety
 * `set` must be a live handle and `out` a writable pointer.
 */
enum IbnnStatus ibnn_posterior_set_to_json(const struct IbnnPosteriorSet *set, char **out);

/**
 * # Safety
 * `set` must be a live handle or NULL; it is invalid afterwards.
 */
void ibnn_posterior_set_free(struct IbnnPosteriorSet *set);

/**
 * # Safety
 * `set` must be a live handle and `out` a writable pointer.
 */
enum IbnnStatus ibnn_posterior_set_info(const struct IbnnPosteriorSet *set,
                                        struct IbnnSetInfo *out);

/**
 * Imprecise highest density region of a regression set at level
 * `1 - alpha`, one output dimension at a time. Writes the hull of each
 * region to `lo[k]`, `hi[k]` and, when `length` is not NULL, its total
 * length (smaller than the hull width when the region is a union of
 * disjoint intervals). Arrays must hold `out_len == output_dim` values.
 *
 * # Safety
 * `set` must be a live handle; `x` must point to `x_len` doubles; `lo`,
 * `hi` and (if not NULL) `length` to `out_len` writable doubles.
 */
enum IbnnStatus ibnn_predict_ihdr(const struct IbnnPosteriorSet *set,
                                  const double *x,
                                  size_t x_len,
                                  double alpha,
                                  enum IbnnHdrMethod method,
                                  size_t n_mc,
                                  uint64_t seed,
                                  double *lo,
                                  double *hi,
                                  double *length,
                                  size_t out_len);

/**
 * Imprecise credible label set of a classification set at level
 * `1 - alpha`: `mask[c]` is set to 1 for included labels and 0 otherwise.
 *
 * # Safety
 * `set` must be a live handle; `x` must point to `x_len` doubles and
 * `mask` to `n_classes` writable bytes.
 */
enum IbnnStatus ibnn_predict_credible_set(const struct IbnnPosteriorSet *set,
                                          const double *x,
                                          size_t x_len,
                                          double alpha,
                                          size_t n_mc,
                                          uint64_t seed,
                                          uint8_t *mask,
                                          size_t n_classes);

/**
 * Aleatoric and epistemic uncertainty of the predictive credal set at `x`.
 *
 * # Safety
 * `set` must be a live handle; `x` must point to `x_len` doubles;
 * `aleatoric` and `epistemic` must be writable.
 */
enum IbnnStatus ibnn_predict_uncertainty(const struct IbnnPosteriorSet *set,
                                         const double *x,
                                         size_t x_len,
                                         size_t n_mc,
                                         uint64_t seed,
                                         double *aleatoric,
                                         double *epistemic);

/**
 * Builds a credal set from `n_members` distributions over `n_classes`
 * labels, stored row-major in `probs`.
 *
 * # Safety
 * `probs` must point to `n_members * n_classes` doubles and `out` must be
 * writable.
 */
enum IbnnStatus ibnn_credal_set_new(const double *probs,
                                    size_t n_members,
                                    size_t n_classes,
                                    struct IbnnCredalSet **out);

/**
 * # Safety
 * `set` must be a live handle or NULL; it is invalid afterwards.
 */
void ibnn_credal_set_free(struct IbnnCredalSet *set);

/**
 * Lower and upper probability of the event whose labels have a nonzero
 * byte in `mask`.
 *
 * # Safety
 * `set` must be a live handle; `mask` must point to `n_classes` bytes;
 * `lower` and `upper` must be writable.
 */
enum IbnnStatus ibnn_credal_set_event_bounds(const struct IbnnCredalSet *set,
                                             const uint8_t *mask,
                                             size_t n_classes,
                                             double *lower,
                                             double *upper);

/**
 * Aleatoric (lower entropy) and epistemic (upper minus lower entropy)
 * uncertainty of a credal set.
 *
 * # Safety
 * `set` must be a live handle; `aleatoric` and `epistemic` must be
 * writable.
 */
enum IbnnStatus ibnn_credal_set_uncertainty(const struct IbnnCredalSet *set,
                                            double *aleatoric,
                                            double *epistemic);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IBNN_H */
