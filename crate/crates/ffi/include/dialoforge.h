#ifndef DIALOFORGE_H
#define DIALOFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DfModelKind {
  DF_MODEL_KIND_MEMORIZER = 0,
  DF_MODEL_KIND_LINEAR = 1,
} DfModelKind;

typedef enum DfSplit {
  DF_SPLIT_TRAIN = 0,
  DF_SPLIT_VAL = 1,
  DF_SPLIT_TEST = 2,
} DfSplit;

/**
 * Result code of every fallible call.
 */
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  DF_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  DF_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid ontology, config or argument value.
   */
  DF_STATUS_VALIDATION = 3,
  /**
   * Failure while running a pipeline stage.
   */
  DF_STATUS_RUNTIME = 4,
  /**
   * File system error.
   */
  DF_STATUS_IO = 5,
  /**
   * Index or size outside the valid range.
   */
  DF_STATUS_OUT_OF_RANGE = 6,
  /**
   * The library panicked; the handle arguments should be considered lost.
   */
  DF_STATUS_PANIC = 7,
} DfStatus;

/**
 * Opaque generated (or perturbed) dataset together with its ontology.
 */
typedef struct DfDataset DfDataset;

/**
 * Opaque encoded dataset.
 */
typedef struct DfEncoded DfEncoded;

/**
 * Opaque trained model.
 */
typedef struct DfModel DfModel;

/**
 * Opaque validated ontology.
 */
typedef struct DfOntology DfOntology;

typedef struct DfGeneratorConfig {
  size_t n_dialogues;
  double p_chitchat;
  double p_mind_change;
  double p_domain_change;
  size_t max_stack_depth;
  uint64_t seed;
  double split_train;
  double split_val;
  double split_test;
  double p_volunteer;
  double p_follow_up;
} DfGeneratorConfig;

typedef struct DfErrorConfig {
  double p_intent;
  double p_action;
  double p_slot;
  double relabel_weight;
  double unk_weight;
  uint64_t seed;
  /**
   * Non-zero leaves val and test untouched.
   */
  int32_t train_only;
} DfErrorConfig;

typedef struct DfLinearConfig {
  size_t epochs;
  double learning_rate;
  double l2;
  size_t batch_size;
  double threshold;
  uint64_t seed;
} DfLinearConfig;

typedef struct DfMetrics {
  size_t rows;
  double micro_precision;
  double micro_recall;
  double micro_f1;
  double macro_precision;
  double macro_recall;
  double macro_f1;
} DfMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *df_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next library call on the same thread.
 */
const char *df_last_error(void);

/**
 * Release a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void df_string_free(char *s);

/**
 * Parse and validate an ontology JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum DfStatus df_ontology_from_json(const char *json, struct DfOntology **out);

/**
 * Load a bundled preset (`simple`, `medium`, `hard`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum DfStatus df_ontology_preset(const char *name, struct DfOntology **out);

/**
 * # Safety
 * `ontology` must be NULL or a handle from this library not yet freed.
 */
void df_ontology_free(struct DfOntology *ontology);

/**
 * Number of domains and atomic actions.
 *
 * # Safety
 * `ontology` must be a live handle; the out pointers must be valid for writes.
 */
enum DfStatus df_ontology_counts(const struct DfOntology *ontology,
                                 size_t *n_domains,
                                 size_t *n_actions);

/**
 * Id of the `index`-th catalog action; free with [`df_string_free`].
 *
 * # Safety
 * `ontology` must be a live handle; `out` must be valid for writes.
 */
enum DfStatus df_ontology_action_name(const struct DfOntology *ontology, size_t index, char **out);

/**
 * Hex SHA-256 of the ontology; free with [`df_string_free`].
 *
 * # Safety
 * `ontology` must be a live handle; `out` must be valid for writes.
 */
enum DfStatus df_ontology_hash(const struct DfOntology *ontology, char **out);

/**
 * Default generator settings, or a preset's settings when `preset` is
 * not NULL.
 *
 * # Safety
 * `preset` must be NULL or a NUL-terminated string; `out` must be valid
 * for writes.
 */
enum DfStatus df_generator_config_default(const char *preset, struct DfGeneratorConfig *out);

/**
 * Generate a dataset.
 *
 * # Safety
 * `ontology` and `cfg` must be valid; `out` must be valid for writes.
 */
enum DfStatus df_generate(const struct DfOntology *ontology,
                          const struct DfGeneratorConfig *cfg,
                          struct DfDataset **out);

/**
 * # Safety
 * `dataset` must be NULL or a handle from this library not yet freed.
 */
void df_dataset_free(struct DfDataset *dataset);

/**
 * Dialogue and turn counts of one split.
 *
 * # Safety
 * `dataset` must be a live handle; out pointers must be valid for writes.
 */
enum DfStatus df_dataset_split_size(const struct DfDataset *dataset,
                                    enum DfSplit split,
                                    size_t *n_dialogues,
                                    size_t *n_turns);

/**
 * Write the dataset directory (split files and manifest) to `dir`.
 *
 * # Safety
 * `dataset` must be a live handle; `dir` a NUL-terminated path.
 */
enum DfStatus df_dataset_write_dir(const struct DfDataset *dataset, const char *dir);

/**
 * Perturbed copy of `dataset`; `n_perturbed` (may be NULL) receives the
 * number of changed labels.
 *
 * # Safety
 * `dataset` and `cfg` must be valid; `out` must be valid for writes.
 */
enum DfStatus df_dataset_inject(const struct DfDataset *dataset,
                                const struct DfErrorConfig *cfg,
                                struct DfDataset **out,
                                size_t *n_perturbed);

/**
 * Encode every split with a history window of `window` system turns.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be valid for writes.
 */
enum DfStatus df_dataset_encode(const struct DfDataset *dataset,
                                size_t window,
                                struct DfEncoded **out);

/**
 * # Safety
 * `encoded` must be NULL or a handle from this library not yet freed.
 */
void df_encoded_free(struct DfEncoded *encoded);

/**
 * Row count of a split plus the state and target widths.
 *
 * # Safety
 * `encoded` must be a live handle; out pointers must be valid for writes.
 */
enum DfStatus df_encoded_shape(const struct DfEncoded *encoded,
                               enum DfSplit split,
                               size_t *rows,
                               size_t *state_width,
                               size_t *target_width);

/**
 * Copy one encoded row as 0/1 bytes into caller buffers of exactly the
 * state and target widths.
 *
 * # Safety
 * `state` must hold `state_len` bytes and `target` `target_len` bytes.
 */
enum DfStatus df_encoded_row(const struct DfEncoded *encoded,
                             enum DfSplit split,
                             size_t row,
                             uint8_t *state,
                             size_t state_len,
                             uint8_t *target,
                             size_t target_len);

/**
 * Default linear training settings.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DfStatus df_linear_config_default(struct DfLinearConfig *out);

/**
 * Train a model on one split. `linear` may be NULL for defaults and is
 * ignored for the memorizer.
 *
 * # Safety
 * `encoded` must be a live handle; `out` must be valid for writes.
 */
enum DfStatus df_model_train(const struct DfEncoded *encoded,
                             enum DfSplit split,
                             enum DfModelKind kind,
                             const struct DfLinearConfig *linear,
                             struct DfModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void df_model_free(struct DfModel *model);

/**
 * Predict one state given as `state_len` 0/1 bytes; writes the target as
 * `target_len` 0/1 bytes.
 *
 * # Safety
 * `state` must hold `state_len` bytes and `target` `target_len` bytes.
 */
enum DfStatus df_model_predict(const struct DfModel *model,
                               const uint8_t *state,
                               size_t state_len,
                               uint8_t *target,
                               size_t target_len);

/**
 * Score a model on one split.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum DfStatus df_model_evaluate(const struct DfModel *model,
                                const struct DfEncoded *encoded,
                                enum DfSplit split,
                                struct DfMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIALOFORGE_H */
