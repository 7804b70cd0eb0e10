#ifndef ABCRM_H
#define ABCRM_H

/* Generated by cbindgen from abcrm-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Behavior flags for `abcrm_classifier_new`.
#define ABCRM_FLAG_CELL_DEATH 1

#define ABCRM_FLAG_PU_TRAINING 2

#define ABCRM_FLAG_INCREMENTAL_BIAS 4

// Document labels accepted by `abcrm_classifier_train`.
#define ABCRM_LABEL_IRRELEVANT 0

#define ABCRM_LABEL_RELEVANT 1

// Status codes returned by every fallible function.
typedef enum AbcrmStatus {
  ABCRM_STATUS_OK = 0,
  ABCRM_STATUS_NULL_POINTER = 1,
  ABCRM_STATUS_INVALID_UTF8 = 2,
  ABCRM_STATUS_INVALID_PARAMETER = 3,
  ABCRM_STATUS_IO_ERROR = 4,
  ABCRM_STATUS_MISSING_FEATURES = 5,
} AbcrmStatus;

// Opaque classifier handle.
typedef struct AbcrmClassifier AbcrmClassifier;

// The six model parameters, mirrored for C callers.
typedef struct AbcrmParams {
  // Effector cells seeded for a newly encountered feature.
  uint32_t e0;
  // Regulator cells seeded on a first encounter in a relevant document.
  uint32_t r0_plus;
  // Regulator cells seeded on a first encounter elsewhere.
  uint32_t r0_minus;
  // Death rate of unbound effectors, in [0,1].
  double d_e;
  // Death rate of unbound regulators, in [0,1].
  double d_r;
  // Slot positions per presented feature; positive and even.
  uint32_t n_a;
} AbcrmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Create a classifier. `flags` is a bitwise OR of the `ABCRM_FLAG_*`
// constants; pass `ABCRM_FLAG_CELL_DEATH` for the canonical configuration.
// On success `*out` owns the handle, to be released with
// `abcrm_classifier_free`.
//
// # Safety
// `params` and `out` must be valid, properly aligned pointers.
enum AbcrmStatus abcrm_classifier_new(const struct AbcrmParams *params,
                                      uint64_t seed,
                                      uint32_t flags,
                                      struct AbcrmClassifier **out);

// Load a feature-set file (`stem \t tfidf \t separation \t rank_product`).
//
// # Safety
// `handle` must come from `abcrm_classifier_new` and `path` must be a
// valid NUL-terminated string.
enum AbcrmStatus abcrm_classifier_load_features(struct AbcrmClassifier *handle, const char *path);

// Select the top-k features from a corpus file's training partition and
// install them on the handle.
//
// # Safety
// `handle` must come from `abcrm_classifier_new` and `corpus_path` must be
// a valid NUL-terminated string.
enum AbcrmStatus abcrm_classifier_select_features(struct AbcrmClassifier *handle,
                                                  const char *corpus_path,
                                                  uintptr_t k);

// Feed one labeled training document (`ABCRM_LABEL_RELEVANT` or
// `ABCRM_LABEL_IRRELEVANT`) into the dynamics.
//
// # Safety
// `handle` must come from `abcrm_classifier_new` and `text` must be a
// valid NUL-terminated string.
enum AbcrmStatus abcrm_classifier_train(struct AbcrmClassifier *handle,
                                        const char *text,
                                        int32_t label);

// Classify one unlabeled document. The document joins the dynamics
// exactly like a test-stream document; the verdict is written to
// `relevant_out` (1 relevant, 0 irrelevant) and the signed margin to
// `score_out` (either may be NULL).
//
// # Safety
// `handle` must come from `abcrm_classifier_new`; `text` must be a valid
// NUL-terminated string; the out pointers, when non-NULL, must be valid.
enum AbcrmStatus abcrm_classifier_classify(struct AbcrmClassifier *handle,
                                           const char *text,
                                           int32_t *relevant_out,
                                           double *score_out);

// Write a pool checkpoint for the handle's current state.
//
// # Safety
// `handle` must come from `abcrm_classifier_new` and `path` must be a
// valid NUL-terminated string.
enum AbcrmStatus abcrm_classifier_save_pool(const struct AbcrmClassifier *handle, const char *path);

// Release a handle. NULL is accepted.
//
// # Safety
// `handle` must be NULL or a pointer returned by `abcrm_classifier_new`
// that has not been freed already.
void abcrm_classifier_free(struct AbcrmClassifier *handle);

// Static human-readable description of a status code.
const char *abcrm_status_message(enum AbcrmStatus status);

// Library version as a newly allocated string; free it with
// `abcrm_string_free`.
char *abcrm_version(void);

// Free a string allocated by this library.
//
// # Safety
// `s` must be NULL or a pointer returned by `abcrm_version`, not yet
// freed.
void abcrm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABCRM_H */
