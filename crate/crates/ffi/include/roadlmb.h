#ifndef ROADLMB_H
#define ROADLMB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RlmbStatus {
  RLMB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RLMB_STATUS_NULL_POINTER = 1,
  /**
   * A string was not UTF-8, or a scalar argument was out of range.
   */
  RLMB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * JSON input did not parse or failed validation.
   */
  RLMB_STATUS_PARSE = 3,
  /**
   * The filter rejected the call, for example a non-consecutive step.
   */
  RLMB_STATUS_FILTER = 4,
  /**
   * The output buffer is too small; the required length was written.
   */
  RLMB_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Internal error; the handle should be freed.
   */
  RLMB_STATUS_PANIC = 6,
} RlmbStatus;

/**
 * Filter handle.
 */
typedef struct RlmbFilter RlmbFilter;

/**
 * Road map handle.
 */
typedef struct RlmbMap RlmbMap;

/**
 * One extracted track.
 */
typedef struct RlmbEstimate {
  /**
   * Step at which the track was born.
   */
  uint64_t label_time;
  /**
   * Ordinal among the births of that step.
   */
  uint32_t label_index;
  double existence;
  double x;
  double y;
  double v;
  double phi;
  double omega;
} RlmbEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rlmb_last_error(void);

/**
 * Library version, static storage.
 */
const char *rlmb_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void rlmb_string_free(char *s);

/**
 * Builds a map from a lane document (`lanes`, `lane_links`, `links`) or, if the
 * JSON has a `rectangles` array, from explicit rectangles.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RlmbStatus rlmb_map_from_json(const char *json, struct RlmbMap **out);

/**
 * # Safety
 * `map` must come from [`rlmb_map_from_json`] and not be used afterwards.
 */
void rlmb_map_free(struct RlmbMap *map);

/**
 * Number of rectangles in the map; 0 for a null handle.
 *
 * # Safety
 * `map` must be null or a live handle.
 */
size_t rlmb_map_len(const struct RlmbMap *map);

/**
 * Ids of the rectangles containing `(x, y)`, ascending. Writes the number of
 * ids to `out_len`; returns `BUFFER_TOO_SMALL` if it exceeds `capacity`.
 *
 * # Safety
 * `ids` must hold `capacity` elements (may be null when `capacity` is 0).
 */
enum RlmbStatus rlmb_map_containing(const struct RlmbMap *map,
                                    double x,
                                    double y,
                                    uint32_t *ids,
                                    size_t capacity,
                                    size_t *out_len);

/**
 * Creates a filter. `config_json` and `sensors_json` may be null for the
 * defaults (one radar with id 0); `map` may be null to run without a road map.
 * The map is shared, so it may be freed after this call.
 *
 * # Safety
 * Strings must be NUL-terminated; `map` null or live; `out` writable.
 */
enum RlmbStatus rlmb_filter_new(const char *config_json,
                                const char *sensors_json,
                                const struct RlmbMap *map,
                                struct RlmbFilter **out);

/**
 * # Safety
 * `filter` must come from [`rlmb_filter_new`] and not be used afterwards.
 */
void rlmb_filter_free(struct RlmbFilter *filter);

/**
 * Runs one step with a single scan of `count` detections from `sensor_id`
 * (`xs[i]`, `ys[i]`). Extracted tracks are written to `estimates`; their number
 * goes to `out_count`. Returns `BUFFER_TOO_SMALL` when `capacity` is too small;
 * the filter state has still advanced in that case.
 *
 * # Safety
 * `xs` and `ys` must hold `count` values; `estimates` must hold `capacity`.
 */
enum RlmbStatus rlmb_filter_step(struct RlmbFilter *filter,
                                 uint64_t timestamp,
                                 uint32_t sensor_id,
                                 const double *xs,
                                 const double *ys,
                                 size_t count,
                                 struct RlmbEstimate *estimates,
                                 size_t capacity,
                                 size_t *out_count);

/**
 * Number of Bernoulli tracks currently held, extracted or not.
 *
 * # Safety
 * `filter` must be null or a live handle.
 */
size_t rlmb_filter_track_count(const struct RlmbFilter *filter);

/**
 * Serializes the filter state as JSON into `*out`; free with [`rlmb_string_free`].
 *
 * # Safety
 * `filter` must be live; `out` writable.
 */
enum RlmbStatus rlmb_filter_checkpoint_json(const struct RlmbFilter *filter, char **out);

/**
 * Replaces the filter state with a checkpoint produced by
 * [`rlmb_filter_checkpoint_json`].
 *
 * # Safety
 * `filter` must be live; `json` NUL-terminated.
 */
enum RlmbStatus rlmb_filter_restore_json(struct RlmbFilter *filter, const char *json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROADLMB_H */
