#ifndef DIVSEQ_H
#define DIVSEQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DIVSEQ_METHOD_BS 0

#define DIVSEQ_METHOD_DBS 1

#define DIVSEQ_METHOD_LI2016 2

#define DIVSEQ_METHOD_MMI 3

#define DIVSEQ_METHOD_EXHAUSTIVE 4

#define DIVSEQ_DIVERSITY_HAMMING 0

#define DIVSEQ_DIVERSITY_CUMULATIVE 1

#define DIVSEQ_DIVERSITY_NGRAM 2

#define DIVSEQ_DIVERSITY_EMBEDDING 3

/**
 * Result code of every call.
 */
typedef enum DivseqStatus {
  DIVSEQ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DIVSEQ_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  DIVSEQ_STATUS_INVALID_UTF8 = 2,
  /**
   * Decoding settings or model parameters were rejected.
   */
  DIVSEQ_STATUS_INVALID_CONFIG = 3,
  /**
   * A file could not be read or written.
   */
  DIVSEQ_STATUS_IO = 4,
  /**
   * Input data was malformed or inconsistent.
   */
  DIVSEQ_STATUS_DATA = 5,
  /**
   * An index was past the end of a result.
   */
  DIVSEQ_STATUS_OUT_OF_RANGE = 6,
  /**
   * An internal error; the library caught a panic.
   */
  DIVSEQ_STATUS_PANIC = 7,
} DivseqStatus;

/**
 * Word vectors bound to one model's vocabulary.
 */
typedef struct DivseqEmbeddings DivseqEmbeddings;

/**
 * A trained n-gram language model.
 */
typedef struct DivseqModel DivseqModel;

/**
 * A decoded list in flattened rank order.
 */
typedef struct DivseqResult DivseqResult;

/**
 * Decoding settings. Fill with [`divseq_config_default`] and override.
 */
typedef struct DivseqConfig {
  /**
   * One of the `DIVSEQ_METHOD_*` constants.
   */
  uint32_t method;
  /**
   * One of the `DIVSEQ_DIVERSITY_*` constants.
   */
  uint32_t diversity;
  size_t beam_width;
  size_t groups;
  double lambda;
  double gamma_li;
  double lambda_mmi;
  /**
   * Temperature of the cumulative diversity function.
   */
  double temperature;
  /**
   * n for n-gram diversity.
   */
  size_t div_ngram_n;
  size_t max_len;
  /**
   * Nonzero ranks final lists by per-token log-probability.
   */
  uint8_t length_norm;
} DivseqConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *divseq_last_error(void);

/**
 * Writes the default settings: beam search, B = 4, one group, T = 10.
 *
 * # Safety
 * `out` must be null or point to writable memory for a `DivseqConfig`.
 */
enum DivseqStatus divseq_config_default(struct DivseqConfig *out);

/**
 * Trains a model on `corpus`, one whitespace-tokenized sentence per line.
 *
 * # Safety
 * `corpus` must be a NUL-terminated string and `out` writable.
 */
enum DivseqStatus divseq_model_train(const char *corpus,
                                     size_t order,
                                     double add_k,
                                     struct DivseqModel **out);

/**
 * Loads a model file written by [`divseq_model_save`] or the CLI.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum DivseqStatus divseq_model_load(const char *path, struct DivseqModel **out);

/**
 * # Safety
 * `model` must come from this library and `path` be a NUL-terminated string.
 */
enum DivseqStatus divseq_model_save(const struct DivseqModel *model, const char *path);

/**
 * Number of tokens including the reserved ones.
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
enum DivseqStatus divseq_model_vocab_size(const struct DivseqModel *model, size_t *out);

/**
 * # Safety
 * `model` must be null or a handle from this library not freed before.
 */
void divseq_model_free(struct DivseqModel *model);

/**
 * Parses word vectors (`token v1 .. vd` per line) for `model`'s
 * vocabulary. Vectors for unknown tokens are skipped.
 *
 * # Safety
 * `model` must come from this library, `text` be a NUL-terminated string
 * and `out` writable.
 */
enum DivseqStatus divseq_embeddings_parse(const struct DivseqModel *model,
                                          const char *text,
                                          struct DivseqEmbeddings **out);

/**
 * # Safety
 * `embeddings` must be null or a handle from this library not freed before.
 */
void divseq_embeddings_free(struct DivseqEmbeddings *embeddings);

/**
 * Decodes one input. `embeddings` may be null unless embedding diversity
 * is selected.
 *
 * # Safety
 * Handles must come from this library, `input` be a NUL-terminated
 * string, `config` readable and `out` writable.
 */
enum DivseqStatus divseq_decode(const struct DivseqModel *model,
                                const char *input,
                                const struct DivseqConfig *config,
                                const struct DivseqEmbeddings *embeddings,
                                struct DivseqResult **out);

/**
 * # Safety
 * `result` must come from this library and `out` be writable.
 */
enum DivseqStatus divseq_result_len(const struct DivseqResult *result, size_t *out);

/**
 * Words of the hypothesis at flattened rank `index` (0-based), without
 * EOS. The string is owned by `result`.
 *
 * # Safety
 * `result` must come from this library and `out` be writable.
 */
enum DivseqStatus divseq_result_text(const struct DivseqResult *result,
                                     size_t index,
                                     const char **out);

/**
 * Model log-probability of the hypothesis at `index`.
 *
 * # Safety
 * `result` must come from this library and `out` be writable.
 */
enum DivseqStatus divseq_result_logprob(const struct DivseqResult *result,
                                        size_t index,
                                        double *out);

/**
 * 0-based group of the hypothesis at `index`.
 *
 * # Safety
 * `result` must come from this library and `out` be writable.
 */
enum DivseqStatus divseq_result_group(const struct DivseqResult *result, size_t index, size_t *out);

/**
 * # Safety
 * `result` must be null or a handle from this library not freed before.
 */
void divseq_result_free(struct DivseqResult *result);

/**
 * Smoothed sentence BLEU of `candidate` against `n_refs` references,
 * all whitespace-tokenized.
 *
 * # Safety
 * `candidate` and each of the `n_refs` entries of `refs` must be
 * NUL-terminated strings; `out` must be writable.
 */
enum DivseqStatus divseq_sentence_bleu(const char *candidate,
                                       const char *const *refs,
                                       size_t n_refs,
                                       size_t max_n,
                                       double *out);

/**
 * distinct-n over `len` whitespace-tokenized sentences.
 *
 * # Safety
 * Each of the `len` entries of `sentences` must be a NUL-terminated
 * string; `out` must be writable.
 */
enum DivseqStatus divseq_distinct_n(const char *const *sentences,
                                    size_t len,
                                    size_t n,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIVSEQ_H */
