#ifndef MINPERM_H
#define MINPERM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values match the command-line exit codes where they overlap.
 */
typedef enum MpStatus {
  MP_STATUS_OK = 0,
  MP_STATUS_INVALID_ARGUMENT = 1,
  MP_STATUS_DATA_ERROR = 2,
  MP_STATUS_NOT_CONVERGED = 3,
  MP_STATUS_NO_NEIGHBORS = 4,
  MP_STATUS_PANIC = 5,
} MpStatus;

/**
 * Opaque handle to a loaded corpus.
 */
typedef struct MpCorpus MpCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call
 * into the library from the same thread.
 */
const char *mp_last_error(void);

/**
 * Library version as a static string.
 */
const char *mp_version(void);

/**
 * Loads a JSONL corpus. `registry_path` and `api_map_path` may be null; the
 * built-in registry is used when no registry is given.
 *
 * # Safety
 * String arguments must be null or valid NUL-terminated strings; `out` must
 * be a valid pointer.
 */
enum MpStatus mp_corpus_load(const char *corpus_path,
                             const char *registry_path,
                             const char *api_map_path,
                             struct MpCorpus **out);

/**
 * Releases a corpus. Null is ignored.
 *
 * # Safety
 * `corpus` must be null or a handle from [`mp_corpus_load`] not yet freed.
 */
void mp_corpus_free(struct MpCorpus *corpus);

/**
 * Number of apps in the corpus.
 *
 * # Safety
 * `corpus` must be a live handle and `out` a valid pointer.
 */
enum MpStatus mp_corpus_len(const struct MpCorpus *corpus, size_t *out);

/**
 * Euclidean distance between two topic distributions of length `len`.
 *
 * # Safety
 * `x` and `y` must point to `len` readable doubles; `out` must be valid.
 */
enum MpStatus mp_distance(const double *x, const double *y, size_t len, double *out);

/**
 * `1 / (1 + distance)`.
 *
 * # Safety
 * Same as [`mp_distance`].
 */
enum MpStatus mp_similarity(const double *x, const double *y, size_t len, double *out);

/**
 * Runs the split/train/assess evaluation and returns the benign-test and
 * malicious-test reports as a JSON array. `config_json` uses the same keys
 * as the command-line config file; `seed` is required.
 *
 * # Safety
 * `corpus` must be a live handle, `config_json` null or a valid string and
 * `out_json` a valid pointer. Free the result with [`mp_string_free`].
 */
enum MpStatus mp_evaluate(const struct MpCorpus *corpus, const char *config_json, char **out_json);

/**
 * Trains the topic model, computes minimum permission sets for the benign
 * apps and returns them as JSON Lines (`{app_id, min_perms}`). The output is
 * also produced when the iteration hit its cap, together with
 * `NotConverged`.
 *
 * # Safety
 * Same as [`mp_evaluate`].
 */
enum MpStatus mp_minset(const struct MpCorpus *corpus, const char *config_json, char **out_jsonl);

/**
 * Similarity-weighted recommendation values from `n` neighbours. `sims`
 * holds each neighbour's similarity and `perms_json` their permission sets
 * as a JSON array of arrays. Writes a JSON object `{perm: rv}`.
 *
 * # Safety
 * `sims` must point to `n` doubles, `perms_json` must be a valid string and
 * `out_json` a valid pointer.
 */
enum MpStatus mp_recommend_values(const double *sims,
                                  size_t n,
                                  const char *perms_json,
                                  char **out_json);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void mp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINPERM_H */
