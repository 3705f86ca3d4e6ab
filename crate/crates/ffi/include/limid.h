#ifndef LIMID_H
#define LIMID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LimidFormat {
  LIMID_FORMAT_LP = 0,
  LIMID_FORMAT_MPS = 1,
} LimidFormat;

typedef enum LimidFormulation {
  LIMID_FORMULATION_ORIGINAL = 0,
  LIMID_FORMULATION_IMPROVED = 1,
} LimidFormulation;

typedef enum LimidStatus {
  LIMID_STATUS_OK = 0,
  LIMID_STATUS_NULL_ARGUMENT = 1,
  LIMID_STATUS_INVALID_UTF8 = 2,
  LIMID_STATUS_PARSE_ERROR = 3,
  LIMID_STATUS_VALIDATION_ERROR = 4,
  LIMID_STATUS_CAPACITY_EXCEEDED = 5,
  LIMID_STATUS_MODEL_MISMATCH = 6,
  LIMID_STATUS_PANIC = 7,
} LimidStatus;

/**
 * A validated diagram together with its effective paths.
 */
typedef struct LimidDiagram LimidDiagram;

/**
 * A formulation built from a [`LimidDiagram`].
 */
typedef struct LimidModel LimidModel;

/**
 * Size accounting of a built model.
 */
typedef struct LimidStats {
  uint64_t n_binary;
  uint64_t n_continuous;
  uint64_t n_constraints;
  uint64_t n_bounds;
  uint64_t one_hot_rows;
  uint64_t local_rows;
  uint64_t lower_bound_rows;
  uint64_t probability_cut_rows;
  uint64_t headline_total;
} LimidStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *limid_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed before.
 */
void limid_string_free(char *s);

/**
 * Parses and validates a JSON diagram document and enumerates its paths.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LimidStatus limid_diagram_from_json(const char *json, struct LimidDiagram **out);

/**
 * # Safety
 * `d` must be NULL or a handle from [`limid_diagram_from_json`].
 */
void limid_diagram_free(struct LimidDiagram *d);

/**
 * Number of effective paths.
 *
 * # Safety
 * `d` must be a live diagram handle; `out` must be writable.
 */
enum LimidStatus limid_diagram_path_count(const struct LimidDiagram *d, uint64_t *out);

/**
 * Builds a formulation with default options: lower-bound rows chosen
 * automatically for the original form, probability row on for the improved.
 *
 * # Safety
 * `d` must be a live diagram handle; `out` must be writable.
 */
enum LimidStatus limid_model_build(const struct LimidDiagram *d,
                                   enum LimidFormulation kind,
                                   struct LimidModel **out);

/**
 * # Safety
 * `m` must be NULL or a handle from [`limid_model_build`].
 */
void limid_model_free(struct LimidModel *m);

/**
 * # Safety
 * `m` must be a live model handle; `out` must be writable.
 */
enum LimidStatus limid_model_stats(const struct LimidModel *m, struct LimidStats *out);

/**
 * Renders the model as LP or MPS text into a new string.
 *
 * # Safety
 * `m` must be a live model handle; `out` must be writable.
 */
enum LimidStatus limid_model_write(const struct LimidModel *m, enum LimidFormat format, char **out);

/**
 * Exhaustive search with the default strategy cap. The optimal strategy is
 * written as JSON to `strategy_json` unless it is NULL.
 *
 * # Safety
 * `d` must be a live diagram handle; `eu` must be writable.
 */
enum LimidStatus limid_solve_brute(const struct LimidDiagram *d, double *eu, char **strategy_json);

/**
 * Single policy update from `restarts` random strategies drawn from `seed`.
 *
 * # Safety
 * `d` must be a live diagram handle; `eu` must be writable.
 */
enum LimidStatus limid_solve_spu(const struct LimidDiagram *d,
                                 uint64_t restarts,
                                 uint64_t seed,
                                 double *eu,
                                 char **strategy_json);

/**
 * Maps a `name value` solution file of `m` back to a strategy and its
 * expected utility.
 *
 * # Safety
 * `d` and `m` must be live handles, `m` built from `d`; `solution` must be
 * a NUL-terminated string; `eu` must be writable.
 */
enum LimidStatus limid_read_solution(const struct LimidDiagram *d,
                                     const struct LimidModel *m,
                                     const char *solution,
                                     double *eu,
                                     char **strategy_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIMID_H */
