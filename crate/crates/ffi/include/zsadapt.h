#ifndef ZSADAPT_H
#define ZSADAPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZsaStatus {
  ZSA_STATUS_OK = 0,
  ZSA_STATUS_NULL_POINTER = 1,
  ZSA_STATUS_INVALID_ARGUMENT = 2,
  ZSA_STATUS_DIMENSION_MISMATCH = 3,
  ZSA_STATUS_NUMERIC = 4,
  ZSA_STATUS_IO = 5,
  ZSA_STATUS_FORMAT = 6,
  ZSA_STATUS_PANIC = 7,
} ZsaStatus;

enum ZsaMode
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  ZSA_MODE_TE = 0,
  ZSA_MODE_OC = 1,
  ZSA_MODE_FULL = 2,
  ZSA_MODE_AVG = 3,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum ZsaMode ZsaMode;
#else
typedef uint32_t ZsaMode;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

enum ZsaAggregation
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  ZSA_AGGREGATION_UNIFORM = 0,
  ZSA_AGGREGATION_MAX_PROB = 1,
  ZSA_AGGREGATION_ENTROPY_THRESHOLD = 2,
  ZSA_AGGREGATION_NORM_ENTROPY = 3,
  ZSA_AGGREGATION_RENYI = 4,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum ZsaAggregation ZsaAggregation;
#else
typedef uint32_t ZsaAggregation;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque engine handle.
 */
typedef struct ZsaEngine ZsaEngine;

/**
 * Engine settings. `mode` holds a `ZsaMode` and `aggregation` a
 * `ZsaAggregation` value; start from [`zsa_config_default`].
 */
typedef struct ZsaConfig {
  double alpha;
  double beta;
  double temperature;
  double warmup_multiplier;
  uint32_t max_projection_rank;
  uint32_t views;
  uint32_t mode;
  uint32_t aggregation;
  double keep_fraction;
  double prior_count;
} ZsaConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default settings.
 */
struct ZsaConfig zsa_config_default(void);

/**
 * Message for the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *zsa_last_error(void);

/**
 * Builds an engine from `classes × dim` row-major text embeddings.
 *
 * `config` may be null for defaults. On success `*out` owns a new engine.
 *
 * # Safety
 * `text` must point to `classes * dim` floats; `out` must be writable.
 */
enum ZsaStatus zsa_engine_new(const float *text,
                              uint32_t classes,
                              uint32_t dim,
                              const struct ZsaConfig *config,
                              struct ZsaEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must come from [`zsa_engine_new`] and not be used afterwards.
 */
void zsa_engine_free(struct ZsaEngine *engine);

/**
 * Processes one example of `n_views × dim` row-major view embeddings.
 *
 * Writes the fused distribution into `out_probs` (length `classes`) and the
 * predicted class into `out_class`; either may be null.
 *
 * # Safety
 * `engine` must be live; `views` must point to `n_views * dim` floats;
 * non-null outputs must be writable for their lengths.
 */
enum ZsaStatus zsa_engine_process(struct ZsaEngine *engine,
                                  const float *views,
                                  uint32_t n_views,
                                  double *out_probs,
                                  uint32_t out_len,
                                  uint32_t *out_class);

/**
 * Number of examples processed so far; 0 for a null engine.
 *
 * # Safety
 * `engine` must be null or live.
 */
uint64_t zsa_engine_examples_seen(const struct ZsaEngine *engine);

/**
 * Class count; 0 for a null engine.
 *
 * # Safety
 * `engine` must be null or live.
 */
uint32_t zsa_engine_class_count(const struct ZsaEngine *engine);

/**
 * Embedding dimension; 0 for a null engine.
 *
 * # Safety
 * `engine` must be null or live.
 */
uint32_t zsa_engine_dim(const struct ZsaEngine *engine);

/**
 * 1 while clustering is still kept out of the fused output, else 0.
 *
 * # Safety
 * `engine` must be null or live.
 */
int32_t zsa_engine_warmup_active(const struct ZsaEngine *engine);

/**
 * Runs a whole dataset file and returns the run report as JSON.
 *
 * Timing is omitted so identical inputs give identical strings. Free the
 * result with [`zsa_string_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_json` must be writable.
 */
enum ZsaStatus zsa_run_file(const char *path, const struct ZsaConfig *config, char **out_json);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void zsa_string_free(char *s);

/**
 * Library version, NUL-terminated and static.
 */
const char *zsa_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZSADAPT_H */
