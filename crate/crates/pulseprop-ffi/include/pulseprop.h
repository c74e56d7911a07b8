#ifndef PULSEPROP_H
#define PULSEPROP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_INVALID_ARGUMENT = 2,
  PP_STATUS_IO = 3,
  PP_STATUS_PARSE = 4,
  PP_STATUS_INVALID_LABEL = 5,
  PP_STATUS_TOO_SHORT = 6,
  PP_STATUS_DEGENERATE = 7,
  PP_STATUS_GRAPH = 8,
  PP_STATUS_JSON = 9,
  PP_STATUS_UTF8 = 10,
  PP_STATUS_PANIC = 11,
} PpStatus;

// Opaque zero-phase band-pass filter.
typedef struct PpBandpass PpBandpass;

// Opaque propagation graph.
typedef struct PpGraph PpGraph;

typedef struct PpPulseStats {
  double skewness;
  double kurtosis;
  double std;
} PpPulseStats;

typedef struct PpMetrics {
  double precision;
  double recall;
  double f1;
  double mcc;
  double kappa;
  double csi;
} PpMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *pp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pp_version(void);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a pointer obtained from this library and not yet freed.
void pp_string_free(char *s);

// Skewness, kurtosis and standard deviation of one pulse.
//
// # Safety
// `x` must point to `n` readable doubles; `out` must be writable.
enum PpStatus pp_pulse_stats(const double *x, size_t n, struct PpPulseStats *out);

// Design a Butterworth band-pass filter.
//
// # Safety
// `out` must be writable; on success it receives a handle to release with
// [`pp_bandpass_free`].
enum PpStatus pp_bandpass_new(double low_cut_hz,
                              double high_cut_hz,
                              size_t order,
                              double sampling_rate_hz,
                              struct PpBandpass **out);

// Zero-phase filtering of `n` samples from `x` into `y` (which may alias `x`).
//
// # Safety
// `filter` must be a live handle; `x` and `y` must each span `n` doubles.
enum PpStatus pp_bandpass_filtfilt(const struct PpBandpass *filter,
                                   const double *x,
                                   size_t n,
                                   double *y);

// Magnitude response at `f_hz`; NaN for a null handle.
//
// # Safety
// `filter` must be null or a live handle.
double pp_bandpass_magnitude(const struct PpBandpass *filter, double f_hz);

// # Safety
// `filter` must be null or a handle from [`pp_bandpass_new`] not yet freed.
void pp_bandpass_free(struct PpBandpass *filter);

// Build a binary-weight KNN-union graph over `n_rows` row-major feature
// vectors. `labels` holds 0, 1 or -1 (unlabelled) per row.
//
// # Safety
// `features` must span `n_rows * dim` doubles, `labels` `n_rows` bytes, and
// `out` must be writable; release the handle with [`pp_graph_free`].
enum PpStatus pp_graph_build(const double *features,
                             size_t n_rows,
                             size_t dim,
                             const int8_t *labels,
                             size_t n_neighbors,
                             struct PpGraph **out);

// Number of nodes; 0 for a null handle.
//
// # Safety
// `graph` must be null or a live handle.
size_t pp_graph_len(const struct PpGraph *graph);

// Propagate labels and write each node's artifact-class probability to
// `prob` (length [`pp_graph_len`]). `n_stranded`, when non-null, receives the
// count of nodes that fell back to the labelled prior.
//
// # Safety
// `graph` must be a live handle; `prob` must span `pp_graph_len` doubles.
enum PpStatus pp_graph_propagate(const struct PpGraph *graph, double *prob, size_t *n_stranded);

// # Safety
// `graph` must be null or a handle from [`pp_graph_build`] not yet freed.
void pp_graph_free(struct PpGraph *graph);

// Scalar metrics of a confusion matrix; zero-denominator metrics are 0.
//
// # Safety
// `out` must be writable.
enum PpStatus pp_metrics_from_confusion(uint64_t tp,
                                        uint64_t fp,
                                        uint64_t tn,
                                        uint64_t fn_,
                                        struct PpMetrics *out);

// Area under the ROC curve of `scores` against 0/1 `truth`.
//
// # Safety
// `scores` and `truth` must span `n` elements; `out` must be writable.
enum PpStatus pp_roc_auc(const double *scores, const int8_t *truth, size_t n, double *out);

// Run the full pipeline from a JSON configuration (unknown keys rejected,
// missing keys defaulted). On success `*report_json` receives a JSON array
// of evaluation reports, to release with [`pp_string_free`].
//
// # Safety
// `config_json` must be a NUL-terminated string; `report_json` writable.
enum PpStatus pp_pipeline_run(const char *config_json, char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PULSEPROP_H */
