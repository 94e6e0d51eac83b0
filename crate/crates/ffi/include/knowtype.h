#ifndef KNOWTYPE_H
#define KNOWTYPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Number of knowledge types in every score vector.
#define KT_NUM_TYPES 12

typedef enum KtStatus {
  KT_STATUS_OK = 0,
  KT_STATUS_NULL_POINTER = 1,
  KT_STATUS_INVALID_UTF8 = 2,
  KT_STATUS_INVALID_ARGUMENT = 3,
  KT_STATUS_IO = 4,
  KT_STATUS_DATA = 5,
  KT_STATUS_MODEL_FORMAT = 6,
  KT_STATUS_DEGENERATE = 7,
  KT_STATUS_NON_FINITE = 8,
  KT_STATUS_CONFIG = 9,
  KT_STATUS_MISMATCH = 10,
  // The metric is undefined for the input, e.g. no positive examples.
  KT_STATUS_UNDEFINED = 11,
  KT_STATUS_PANIC = 12,
} KtStatus;

// Opaque handle to a trained classifier.
typedef struct KtModel KtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *kt_version(void);

// Description of the last failure on this thread, or null. Valid until the
// next call into the library from this thread.
const char *kt_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void kt_string_free(char *s);

// Static name of the type at `index` (0-based, canonical order), or null
// when out of range.
const char *kt_type_name(uintptr_t index);

// Loads a model file written by the `train` command.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum KtStatus kt_model_load(const char *path, struct KtModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`kt_model_load`] and not be freed twice.
void kt_model_free(struct KtModel *model);

// Report label of the model (e.g. `SVM`); free with [`kt_string_free`].
//
// # Safety
// `model` must be a live handle.
char *kt_model_label(const struct KtModel *model);

// Scores one document. `probabilities` receives [`KT_NUM_TYPES`] values in
// canonical type order; `ranking`, when not null, receives the scores used
// for ranking metrics.
//
// # Safety
// `text` must be NUL-terminated; output buffers must hold
// [`KT_NUM_TYPES`] doubles.
enum KtStatus kt_model_predict(const struct KtModel *model,
                               const char *text,
                               double *probabilities,
                               double *ranking);

// Average precision of `scores` against 0/1 `truth`.
//
// # Safety
// `scores` and `truth` must hold `n` elements; `out` must be valid.
enum KtStatus kt_auprc(const double *scores, const uint8_t *truth, uintptr_t n, double *out);

// Area under the ROC curve of `scores` against 0/1 `truth`.
//
// # Safety
// `scores` and `truth` must hold `n` elements; `out` must be valid.
enum KtStatus kt_roc_auc(const double *scores, const uint8_t *truth, uintptr_t n, double *out);

// Mean SCUMBLE of a labeled corpus file (JSONL or CSV by extension).
//
// # Safety
// `path` must be NUL-terminated; `out` must be valid.
enum KtStatus kt_corpus_scumble(const char *path, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KNOWTYPE_H */
