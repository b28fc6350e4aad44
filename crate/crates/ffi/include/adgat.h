#ifndef ADGAT_H
#define ADGAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call. `ADGAT_STATUS_OK` is zero.
typedef enum AdgatStatus {
  ADGAT_STATUS_OK = 0,
  ADGAT_STATUS_EDGE_OUT_OF_RANGE = 1,
  ADGAT_STATUS_MISSING_FILE = 2,
  ADGAT_STATUS_COUNT_MISMATCH = 3,
  ADGAT_STATUS_LABEL_OUT_OF_RANGE = 4,
  ADGAT_STATUS_SPLIT_OVERLAP = 5,
  ADGAT_STATUS_PARSE = 6,
  ADGAT_STATUS_INFEASIBLE = 7,
  ADGAT_STATUS_SHAPE = 8,
  ADGAT_STATUS_EMPTY_SEGMENT = 9,
  ADGAT_STATUS_EMPTY_MASK = 10,
  ADGAT_STATUS_UNKNOWN = 11,
  ADGAT_STATUS_NON_SCALAR_LOSS = 12,
  ADGAT_STATUS_DEPTH_DOMAIN = 13,
  ADGAT_STATUS_FA_TOO_LARGE = 14,
  ADGAT_STATUS_WIDTH_TOO_LARGE = 15,
  ADGAT_STATUS_CONFIG = 16,
  ADGAT_STATUS_DIVERGED = 17,
  ADGAT_STATUS_NONDETERMINISTIC = 18,
  ADGAT_STATUS_MISSING_GRADIENT = 19,
  ADGAT_STATUS_IO = 20,
  ADGAT_STATUS_JSON = 21,
  ADGAT_STATUS_CSV = 22,
  // A required pointer argument was NULL.
  ADGAT_STATUS_NULL_POINTER = 100,
  // A string argument was not valid UTF-8.
  ADGAT_STATUS_INVALID_UTF8 = 101,
  // An index or size argument was out of range.
  ADGAT_STATUS_OUT_OF_RANGE = 102,
  // The library panicked; this indicates a bug.
  ADGAT_STATUS_PANIC = 103,
} AdgatStatus;

// A loaded or generated dataset.
typedef struct AdgatDataset AdgatDataset;

// The outcome of one training run.
typedef struct AdgatTrainResult AdgatTrainResult;

// One epoch of a training trace. Diagnostics that were not computed for the
// epoch are NaN.
typedef struct AdgatEpochTrace {
  size_t epoch;
  double loss;
  double acc_train;
  double acc_val;
  double acc_test;
  double smv;
  double corr;
  double grad_l1_mean;
} AdgatEpochTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on the calling thread, or NULL if
// no call has failed yet. The pointer stays valid until the next failing call
// on the same thread.
const char *adgat_last_error_message(void);

// Stable lowercase name of a status code, e.g. `"depth_domain"`. Never NULL.
const char *adgat_status_name(enum AdgatStatus status);

// Library version as a static NUL-terminated string.
const char *adgat_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a pointer returned by an `adgat_*` function documented as
// returning an owned string, not freed before.
void adgat_string_free(char *s);

// Adaptive depth for a graph with `num_nodes` nodes and `num_edges` undirected
// edges. Writes the unrounded value to `out_real` (may be NULL) and the selected
// integer depth, clamped to `[1, max_depth]`, to `out_depth`.
//
// # Safety
// `out_real` must be NULL or writable; `out_depth` must be writable.
enum AdgatStatus adgat_adaptive_depth(size_t num_nodes,
                                      size_t num_edges,
                                      size_t max_depth,
                                      double *out_real,
                                      size_t *out_depth);

// Mean pairwise normalized Euclidean distance of the rows of a row-major
// `rows x cols` matrix. Large matrices are estimated from a fixed-seed sample of
// row pairs.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be writable.
enum AdgatStatus adgat_smv(const double *data, size_t rows, size_t cols, double *out);

// Mean absolute Pearson correlation between distinct columns of a row-major
// `rows x cols` matrix. Constant columns count as uncorrelated.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be writable.
enum AdgatStatus adgat_corr(const double *data, size_t rows, size_t cols, double *out);

// Loads a dataset directory (`meta.json`, `edges.csv`, `features.csv`,
// `labels.csv`, `splits.json`).
//
// # Safety
// `dir` must be a NUL-terminated path; `out` must be writable. On success the
// caller owns `*out` and must release it with [`adgat_dataset_free`].
enum AdgatStatus adgat_dataset_load(const char *dir, struct AdgatDataset **out);

// Generates a seeded stochastic-block dataset. `params_toml` may be NULL for the
// Cora-sized defaults; otherwise it overrides any of `num_nodes`, `avg_degree`,
// `num_classes`, `feat_dim`, `homophily`, `noise`, `train`, `val`, `test`, `seed`.
//
// # Safety
// `params_toml` must be NULL or NUL-terminated; `out` must be writable.
enum AdgatStatus adgat_dataset_synthetic(const char *params_toml, struct AdgatDataset **out);

// Writes a dataset to a directory in the on-disk format read by
// [`adgat_dataset_load`].
//
// # Safety
// `ds` must be a live handle; `dir` must be NUL-terminated.
enum AdgatStatus adgat_dataset_save(const struct AdgatDataset *ds, const char *dir);

// Number of nodes, or 0 for a NULL handle.
//
// # Safety
// `ds` must be NULL or a live handle.
size_t adgat_dataset_num_nodes(const struct AdgatDataset *ds);

// Number of undirected edges as recorded in the dataset metadata, or 0 for a
// NULL handle.
//
// # Safety
// `ds` must be NULL or a live handle.
size_t adgat_dataset_num_edges(const struct AdgatDataset *ds);

// # Safety
// `ds` must be NULL or a live handle.
size_t adgat_dataset_num_classes(const struct AdgatDataset *ds);

// # Safety
// `ds` must be NULL or a live handle.
size_t adgat_dataset_feat_dim(const struct AdgatDataset *ds);

// Releases a dataset. NULL is ignored.
//
// # Safety
// `ds` must be NULL or a handle not freed before.
void adgat_dataset_free(struct AdgatDataset *ds);

// Trains a freshly initialized model. `model_toml` holds model keys (`variant`,
// `depth`, `hidden_dim`, `beta`, ...) and `hparams_toml` optimizer keys
// (`learning_rate`, `weight_decay`, `epochs`, `patience`, `seed`, ...); either
// may be NULL for defaults. The run is deterministic given its inputs.
//
// # Safety
// `ds` must be a live handle; the TOML arguments NULL or NUL-terminated; `out`
// writable. On success the caller owns `*out` and must release it with
// [`adgat_result_free`].
enum AdgatStatus adgat_train(const struct AdgatDataset *ds,
                             const char *model_toml,
                             const char *hparams_toml,
                             struct AdgatTrainResult **out);

// Number of recorded epochs, or 0 for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
size_t adgat_result_num_epochs(const struct AdgatTrainResult *res);

// Epoch with the highest validation accuracy (earliest on ties).
//
// # Safety
// `res` must be NULL or a live handle.
size_t adgat_result_best_epoch(const struct AdgatTrainResult *res);

// Validation accuracy at the best epoch, or NaN for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
double adgat_result_val_at_best(const struct AdgatTrainResult *res);

// Test accuracy at the best epoch, or NaN for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
double adgat_result_test_at_best(const struct AdgatTrainResult *res);

// Copies the trace entry for epoch `index` into `out`.
//
// # Safety
// `res` must be a live handle; `out` must be writable.
enum AdgatStatus adgat_result_trace(const struct AdgatTrainResult *res,
                                    size_t index,
                                    struct AdgatEpochTrace *out);

// Serializes the whole result (traces, best epoch, parameter digest) as JSON.
// Returns NULL on failure; release the string with [`adgat_string_free`].
//
// # Safety
// `res` must be a live handle.
char *adgat_result_to_json(const struct AdgatTrainResult *res);

// Releases a training result. NULL is ignored.
//
// # Safety
// `res` must be NULL or a handle not freed before.
void adgat_result_free(struct AdgatTrainResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADGAT_H */
