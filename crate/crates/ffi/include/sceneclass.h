#ifndef SCENECLASS_H
#define SCENECLASS_H

/* Generated from the sceneclass-ffi Rust sources; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum sceneclass_status {
  /**
   * The call succeeded.
   */
  SCENECLASS_OK = 0,
  /**
   * A computation failed (separation, rank deficiency, divergence).
   */
  SCENECLASS_RUNTIME_ERROR = 1,
  /**
   * The inputs or configuration are at fault (missing file, bad schema).
   */
  SCENECLASS_INPUT_ERROR = 2,
  /**
   * A required pointer argument was null.
   */
  SCENECLASS_NULL_ARGUMENT = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  SCENECLASS_INVALID_UTF8 = 4,
} sceneclass_status;

/**
 * Trajectory recordings: scene metadata plus per-agent tracks.
 */
typedef struct sceneclass_bundle sceneclass_bundle;

/**
 * The per-pedestrian feature matrix (13 columns).
 */
typedef struct sceneclass_matrix sceneclass_matrix;

/**
 * A fitted two-cluster environment model.
 */
typedef struct sceneclass_model sceneclass_model;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Valid until
 * the next failing call on the same thread; never null.
 */
const char *sceneclass_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sceneclass_version(void);

/**
 * Free a string returned by this library. Null is allowed.
 */
void sceneclass_string_free(char *s);

/**
 * Load a normalized trajectory CSV plus its scene-metadata JSON files.
 */
enum sceneclass_status sceneclass_bundle_load_normalized(const char *csv_path,
                                                         const char *const *scene_paths,
                                                         size_t scene_count,
                                                         struct sceneclass_bundle **out);

/**
 * Generate synthetic scenes from a built-in preset ("road" or "campus").
 * Each scene becomes its own dataset; scene `i` uses `seed + i`.
 */
enum sceneclass_status sceneclass_bundle_synth_preset(const char *preset,
                                                      size_t scenes,
                                                      uint64_t seed,
                                                      struct sceneclass_bundle **out);

/**
 * Generate synthetic scenes from regime parameters given as JSON.
 */
enum sceneclass_status sceneclass_bundle_synth_json(const char *params_json,
                                                    size_t scenes,
                                                    struct sceneclass_bundle **out);

/**
 * Number of scenes in the bundle; 0 if `bundle` is null.
 */
size_t sceneclass_bundle_scene_count(const struct sceneclass_bundle *bundle);

/**
 * Number of tracks in the bundle; 0 if `bundle` is null.
 */
size_t sceneclass_bundle_track_count(const struct sceneclass_bundle *bundle);

/**
 * Write the bundle in the normalized CSV schema.
 */
enum sceneclass_status sceneclass_bundle_write_csv(const struct sceneclass_bundle *bundle,
                                                   const char *path);

/**
 * Destroy a bundle. Null is allowed.
 */
void sceneclass_bundle_free(struct sceneclass_bundle *bundle);

/**
 * Extract the per-pedestrian feature matrix from a bundle.
 * `thresholds_json` overrides analysis thresholds; pass null for defaults.
 */
enum sceneclass_status sceneclass_matrix_extract(const struct sceneclass_bundle *bundle,
                                                 const char *thresholds_json,
                                                 struct sceneclass_matrix **out);

/**
 * Number of rows; 0 if `matrix` is null.
 */
size_t sceneclass_matrix_rows(const struct sceneclass_matrix *matrix);

/**
 * Number of feature columns (constant).
 */
size_t sceneclass_matrix_feature_count(void);

/**
 * Write the matrix as CSV.
 */
enum sceneclass_status sceneclass_matrix_write_csv(const struct sceneclass_matrix *matrix,
                                                   const char *path);

/**
 * Read a matrix previously written by `sceneclass_matrix_write_csv`.
 */
enum sceneclass_status sceneclass_matrix_read_csv(const char *path, struct sceneclass_matrix **out);

/**
 * Destroy a matrix. Null is allowed.
 */
void sceneclass_matrix_free(struct sceneclass_matrix *matrix);

/**
 * Screen outliers, standardize, and fit the two-cluster model.
 * `per_dataset_iqr` selects per-dataset outlier fences instead of pooled.
 */
enum sceneclass_status sceneclass_model_fit(const struct sceneclass_matrix *matrix,
                                            uint64_t seed,
                                            uint32_t restarts,
                                            bool per_dataset_iqr,
                                            struct sceneclass_model **out);

/**
 * Save a model as JSON.
 */
enum sceneclass_status sceneclass_model_save(const struct sceneclass_model *model,
                                             const char *path);

/**
 * Load a model saved by `sceneclass_model_save`.
 */
enum sceneclass_status sceneclass_model_load(const char *path, struct sceneclass_model **out);

/**
 * Label a matrix with a fitted model. On success `*out_json` holds a JSON
 * report (per-row labels, per-dataset majorities, per-feature diagnostics);
 * free it with `sceneclass_string_free`.
 */
enum sceneclass_status sceneclass_model_classify_json(const struct sceneclass_model *model,
                                                      const struct sceneclass_matrix *matrix,
                                                      char **out_json);

/**
 * Destroy a model. Null is allowed.
 */
void sceneclass_model_free(struct sceneclass_model *model);

/**
 * Cluster the matrix, then fit the binomial model explaining the cluster
 * label from the pedestrian features. On success `*out_json` holds the
 * model-selection report; free it with `sceneclass_string_free`.
 */
enum sceneclass_status sceneclass_glm_json(const struct sceneclass_matrix *matrix,
                                           uint64_t seed,
                                           uint32_t restarts,
                                           bool per_dataset_iqr,
                                           char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCENECLASS_H */
