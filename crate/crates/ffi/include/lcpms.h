#ifndef LCPMS_H
#define LCPMS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LcpmsStatus {
  LCPMS_STATUS_OK = 0,
  LCPMS_STATUS_NULL_POINTER = 1,
  LCPMS_STATUS_INVALID_ARGUMENT = 2,
  LCPMS_STATUS_CONFIG = 3,
  LCPMS_STATUS_IO = 4,
  LCPMS_STATUS_PANIC = 5,
} LcpmsStatus;

typedef enum LcpmsKernel {
  LCPMS_KERNEL_GAUSSIAN = 0,
  LCPMS_KERNEL_EXPONENTIAL = 1,
} LcpmsKernel;

// Result of one prediction.
typedef struct LcpmsPrediction LcpmsPrediction;

// Fitted bank plus calibration data with every covariate-independent
// quantity precomputed.
typedef struct LcpmsPredictor LcpmsPredictor;

// A model supplied by the caller: returns `f(x)` for a covariate of length
// `dim`. Must be safe to call from any thread while the predictor lives.
typedef double (*LcpmsModelFn)(const double *x, size_t dim, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a predictor whose models are fitted on the training sample.
//
// `bank` is `"nw5"`, `"parametric10"`, or a JSON array of model specs such as
// `[{"type": "nadaraya_watson", "bandwidth": 0.2}]`. Covariates are row-major
// with `dim` columns; the built-in model families require `dim == 1`.
//
// # Safety
// Array arguments must point to at least the stated number of elements and
// `bank` must be a NUL-terminated string.
enum LcpmsStatus lcpms_predictor_new(const double *train_x,
                                     const double *train_y,
                                     size_t n_train,
                                     const double *calib_x,
                                     const double *calib_y,
                                     size_t n_calib,
                                     size_t dim,
                                     const char *bank,
                                     enum LcpmsKernel kernel_family,
                                     double kernel_bandwidth,
                                     struct LcpmsPredictor **out);

// Builds a predictor from caller-supplied model callbacks; `user_data` may be
// null or point to `n_models` opaque pointers passed back to each callback.
//
// # Safety
// `models` must hold `n_models` non-null function pointers that remain
// callable, from any thread, until the predictor is freed.
enum LcpmsStatus lcpms_predictor_new_callbacks(const double *calib_x,
                                               const double *calib_y,
                                               size_t n_calib,
                                               size_t dim,
                                               const LcpmsModelFn *models,
                                               void *const *user_data,
                                               size_t n_models,
                                               enum LcpmsKernel kernel_family,
                                               double kernel_bandwidth,
                                               struct LcpmsPredictor **out);

// # Safety
// `p` must be null or a handle from a `lcpms_predictor_new*` call that has
// not been freed.
void lcpms_predictor_free(struct LcpmsPredictor *p);

// Number of models in the bank, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live predictor handle.
size_t lcpms_predictor_n_models(const struct LcpmsPredictor *p);

// Label of model `k`, owned by the predictor; null when out of range.
//
// # Safety
// `p` must be null or a live predictor handle.
const char *lcpms_predictor_model_label(const struct LcpmsPredictor *p, size_t k);

// Prediction set at `x` (length `dim`). Pass `grid_len == 0` for the default
// level grid 0.01, 0.02, ..., 0.99.
//
// # Safety
// `p` must be a live predictor handle; `x` and `grid` must point to the
// stated number of elements.
enum LcpmsStatus lcpms_predict(const struct LcpmsPredictor *p,
                               const double *x,
                               size_t dim,
                               double alpha,
                               const double *grid,
                               size_t grid_len,
                               struct LcpmsPrediction **out);

// # Safety
// `p` must be null or an unfreed handle from [`lcpms_predict`].
void lcpms_prediction_free(struct LcpmsPrediction *p);

// Number of disjoint intervals in the prediction set.
//
// # Safety
// `p` must be null or a live prediction handle.
size_t lcpms_prediction_n_parts(const struct LcpmsPrediction *p);

// Endpoints of interval `index`, ascending. Endpoints may be infinite.
//
// # Safety
// `p` must be a live prediction handle; `lo` and `hi` must be writable.
enum LcpmsStatus lcpms_prediction_part(const struct LcpmsPrediction *p,
                                       size_t index,
                                       double *lo,
                                       double *hi);

// Total length of the prediction set (NaN for a null handle).
//
// # Safety
// `p` must be null or a live prediction handle.
double lcpms_prediction_measure(const struct LcpmsPrediction *p);

// Admissible level band; `flagged` is set to 1 when a grid-minimum fallback
// was used.
//
// # Safety
// `p` must be a live prediction handle; outputs must be writable.
enum LcpmsStatus lcpms_prediction_bounds(const struct LcpmsPrediction *p,
                                         double *gamma_lo,
                                         double *gamma_hi,
                                         int32_t *flagged);

// Number of admissible levels recorded in the selection trace.
//
// # Safety
// `p` must be null or a live prediction handle.
size_t lcpms_prediction_n_steps(const struct LcpmsPrediction *p);

// Trace step `index`: level, selected model (0-based) and its interval.
//
// # Safety
// `p` must be a live prediction handle; outputs must be writable.
enum LcpmsStatus lcpms_prediction_step(const struct LcpmsPrediction *p,
                                       size_t index,
                                       double *gamma,
                                       size_t *model,
                                       double *lo,
                                       double *hi);

// Runs the experiment matrix described by a JSON run configuration and
// returns the results table as CSV in `*csv_out` (free with
// [`lcpms_string_free`]).
//
// # Safety
// `config_json` must be a NUL-terminated string; `csv_out` must be writable.
enum LcpmsStatus lcpms_run_table(const char *config_json, char **csv_out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void lcpms_string_free(char *s);

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *lcpms_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *lcpms_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCPMS_H */
