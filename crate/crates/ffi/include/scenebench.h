#ifndef SCENEBENCH_H
#define SCENEBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_ARGUMENT = 1,
  SB_STATUS_INVALID_UTF8 = 2,
  SB_STATUS_INVALID_INPUT = 3,
  /**
   * The operation ran but did not produce a result, e.g. a plan that could
   * not be realized. The error text is the feedback message.
   */
  SB_STATUS_FAILED = 4,
  SB_STATUS_PANIC = 5,
} SbStatus;

typedef struct SbCatalog SbCatalog;

typedef struct SbScene SbScene;

typedef struct SbTask SbTask;

/**
 * Table top rectangle and height, in meters.
 */
typedef struct SbBounds {
  double x_min;
  double x_max;
  double y_min;
  double y_max;
  double z_top;
} SbBounds;

/**
 * Yawed box: center, full dimensions and yaw in radians.
 */
typedef struct SbBox {
  double center[3];
  double dims[3];
  double yaw;
} SbBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sb_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void sb_string_free(char *s);

const char *sb_version(void);

/**
 * Parses a catalog from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SbStatus sb_catalog_from_json(const char *json, struct SbCatalog **out);

/**
 * # Safety
 * `catalog` must be null or a live handle.
 */
void sb_catalog_free(struct SbCatalog *catalog);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `catalog` must be null or a live handle.
 */
size_t sb_catalog_len(const struct SbCatalog *catalog);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SbStatus sb_scene_from_json(const char *json, struct SbScene **out);

/**
 * Builds a checked scene from a plan: validation, layout, placement and the
 * settle check. With `SB_STATUS_FAILED` the last error holds the feedback.
 *
 * # Safety
 * `plan_json` must be a NUL-terminated string; `catalog` and `bounds` must be
 * valid; `out` must be writable.
 */
enum SbStatus sb_scene_from_plan(const char *plan_json,
                                 const struct SbCatalog *catalog,
                                 const struct SbBounds *bounds,
                                 uint64_t seed,
                                 struct SbScene **out);

/**
 * # Safety
 * `scene` must be null or a live handle.
 */
void sb_scene_free(struct SbScene *scene);

/**
 * Canonical JSON text; free with `sb_string_free`.
 *
 * # Safety
 * `scene` must be a live handle; `out` must be writable.
 */
enum SbStatus sb_scene_to_json(const struct SbScene *scene, char **out);

/**
 * # Safety
 * `scene` must be null or a live handle.
 */
size_t sb_scene_object_count(const struct SbScene *scene);

/**
 * Counts overlapping pairs among table-level objects at the given margin.
 *
 * # Safety
 * `scene` must be a live handle; `out` must be writable.
 */
enum SbStatus sb_scene_collision_count(const struct SbScene *scene, double margin, size_t *out);

/**
 * Settles the scene and writes whether it is stable. When unstable and
 * `feedback` is non-null, the feedback message is written there (free with
 * `sb_string_free`); otherwise null is written.
 *
 * # Safety
 * `scene` must be a live handle; `stable` must be writable; `feedback` may be
 * null.
 */
enum SbStatus sb_scene_check_stability(const struct SbScene *scene,
                                       double threshold,
                                       bool *stable,
                                       char **feedback);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SbStatus sb_task_from_json(const char *json, struct SbTask **out);

/**
 * # Safety
 * `task` must be null or a live handle.
 */
void sb_task_free(struct SbTask *task);

/**
 * Graded score and success of a task over a state history. `history_json`
 * is a JSON array of states (oldest first, final state last); null scores
 * the scene's own initial state.
 *
 * # Safety
 * `task` and `scene` must be live handles; `history_json` may be null;
 * `score` and `succeeded` must be writable.
 */
enum SbStatus sb_task_score(const struct SbTask *task,
                            const struct SbScene *scene,
                            const char *history_json,
                            double *score,
                            bool *succeeded);

/**
 * Geodesic angle between two rotations given as `[w, x, y, z]`. Inputs are
 * normalized first; a zero quaternion is rejected.
 *
 * # Safety
 * `a` and `b` must point to four doubles; `out` must be writable.
 */
enum SbStatus sb_quat_distance(const double (*a)[4], const double (*b)[4], double *out);

/**
 * Whether two yawed boxes overlap once each is inflated by `margin`.
 *
 * # Safety
 * `a` and `b` must be valid; `out` must be writable.
 */
enum SbStatus sb_boxes_overlap(const struct SbBox *a,
                               const struct SbBox *b,
                               double margin,
                               bool *out);

/**
 * Spectral arc-length smoothness of a uniformly sampled speed profile.
 *
 * # Safety
 * `speeds` must point to `len` doubles; `out` must be writable.
 */
enum SbStatus sb_sparc(const double *speeds, size_t len, double dt, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCENEBENCH_H */
