/* C interface for the remedia assignment engine. */

#pragma once

/* Generated with cbindgen:0.26.0 */

/* Generated by cbindgen from the remedia-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Solver dispatch requested through the C API.
 */
typedef enum RemediaSolver {
  REMEDIA_SOLVER_AUTO = 0,
  REMEDIA_SOLVER_GREEDY = 1,
  REMEDIA_SOLVER_GRADIENT = 2,
  REMEDIA_SOLVER_HYBRID = 3,
} RemediaSolver;

/**
 * Status codes for every fallible entry point.
 */
typedef enum RemediaStatus {
  REMEDIA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  REMEDIA_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  REMEDIA_STATUS_INVALID_UTF8 = 2,
  /**
   * File access failed.
   */
  REMEDIA_STATUS_IO = 3,
  /**
   * Input data or configuration was rejected.
   */
  REMEDIA_STATUS_INVALID_INPUT = 4,
  /**
   * The solver could not produce a result.
   */
  REMEDIA_STATUS_SOLVE = 5,
  /**
   * Unexpected internal failure (a bug; see `remedia_last_error`).
   */
  REMEDIA_STATUS_INTERNAL = 6,
} RemediaStatus;

/**
 * Opaque result of one assignment run.
 */
typedef struct RemediaAssignment RemediaAssignment;

/**
 * Opaque run configuration handle.
 */
typedef struct RemediaConfig RemediaConfig;

/**
 * Opaque content repository handle.
 */
typedef struct RemediaPool RemediaPool;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Latest error message for this thread, or null if none was recorded.
 * The returned copy must be released with `remedia_string_free`.
 */
char *remedia_last_error(void);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by this library and
 * not yet freed.
 */
void remedia_string_free(char *s);

/**
 * Create a configuration with library defaults. Never fails.
 */
struct RemediaConfig *remedia_config_new(void);

/**
 * Load a configuration from a TOML file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum RemediaStatus remedia_config_load(const char *path, struct RemediaConfig **out);

/**
 * Override the run seed.
 *
 * # Safety
 * `config` must be a live handle from this library.
 */
enum RemediaStatus remedia_config_set_seed(struct RemediaConfig *config, uint64_t seed);

/**
 * Select which solver handles every learner.
 *
 * # Safety
 * `config` must be a live handle from this library.
 */
enum RemediaStatus remedia_config_set_solver(struct RemediaConfig *config,
                                             enum RemediaSolver solver);

/**
 * Release a configuration handle. Null is a no-op.
 *
 * # Safety
 * `config` must be null or a live handle from this library.
 */
void remedia_config_free(struct RemediaConfig *config);

/**
 * Load a content repository from CSV
 * (`content_id,duration_min,level,skill_1..skill_K`).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum RemediaStatus remedia_pool_load(const char *path, struct RemediaPool **out);

/**
 * Number of content items in the repository; 0 for a null handle.
 *
 * # Safety
 * `pool` must be null or a live handle from this library.
 */
uintptr_t remedia_pool_size(const struct RemediaPool *pool);

/**
 * Release a repository handle. Null is a no-op.
 *
 * # Safety
 * `pool` must be null or a live handle from this library.
 */
void remedia_pool_free(struct RemediaPool *pool);

/**
 * Solve one slate per learner. `learners_path` points to the learners CSV
 * (`learner_id,theta,skill_1..skill_K`); `prereqs_path` may be null for no
 * prerequisite constraints.
 *
 * # Safety
 * All non-null pointers must be valid; handles must be live handles from
 * this library; `out` must be a valid pointer to receive the handle.
 */
enum RemediaStatus remedia_assign(const struct RemediaConfig *config,
                                  const struct RemediaPool *pool,
                                  const char *learners_path,
                                  const char *prereqs_path,
                                  struct RemediaAssignment **out);

/**
 * Number of learners solved; 0 for a null handle.
 *
 * # Safety
 * `assignment` must be null or a live handle from this library.
 */
uintptr_t remedia_assignment_count(const struct RemediaAssignment *assignment);

/**
 * Number of (learner, skill) pairs no repository content can cover;
 * 0 for a null handle.
 *
 * # Safety
 * `assignment` must be null or a live handle from this library.
 */
uintptr_t remedia_assignment_uncovered(const struct RemediaAssignment *assignment);

/**
 * Full slates document (selections, traces, config hash) as JSON. Returns
 * null for a null handle; release with `remedia_string_free`.
 *
 * # Safety
 * `assignment` must be null or a live handle from this library.
 */
char *remedia_assignment_slates_json(const struct RemediaAssignment *assignment);

/**
 * Slack report (uncovered learner-skill pairs) as JSON. Returns null for a
 * null handle; release with `remedia_string_free`.
 *
 * # Safety
 * `assignment` must be null or a live handle from this library.
 */
char *remedia_assignment_slack_json(const struct RemediaAssignment *assignment);

/**
 * Release an assignment handle. Null is a no-op.
 *
 * # Safety
 * `assignment` must be null or a live handle from this library.
 */
void remedia_assignment_free(struct RemediaAssignment *assignment);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
