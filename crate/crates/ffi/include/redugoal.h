#ifndef REDUGOAL_H
#define REDUGOAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum RgStatus {
  RG_OK = 0,
  RG_NULL_POINTER = 1,
  RG_INVALID_ARGUMENT = 2,
  RG_DIMENSION_MISMATCH = 3,
  RG_OUT_OF_LIMITS = 4,
  RG_UNSUPPORTED_CHAIN = 5,
  RG_PRECONDITION = 6,
  RG_NOT_FOUND = 7,
  RG_EMPTY = 8,
  RG_IO = 9,
  RG_PARSE = 10,
  RG_GENERATION = 11,
  RG_BUFFER_TOO_SMALL = 12,
  RG_PANIC = 13,
} RgStatus;

typedef enum RgStrategy {
  RG_STRATEGY_CLOSEST = 0,
  RG_STRATEGY_RANDOM = 1,
} RgStrategy;

// Opaque kinematic chain.
typedef struct RgChain RgChain;

// Opaque obstacle scene together with the robot geometry checked against it.
typedef struct RgScene RgScene;

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *rg_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void rg_string_free(char *s);

// Loads a chain preset by name (`ur5`, `ur5-elbow-limited`, `ur5-vine`) or
// from a JSON file.
//
// # Safety
// `name_or_path` must be a NUL-terminated string; `out` must be writable.
enum RgStatus rg_chain_load(const char *name_or_path, struct RgChain **out);

// # Safety
// `chain` must be null or a handle from [`rg_chain_load`], not yet freed.
void rg_chain_free(struct RgChain *chain);

// Number of joints, or 0 for a null handle.
//
// # Safety
// `chain` must be null or a live handle.
size_t rg_chain_dof(const struct RgChain *chain);

// Upper bound on the equivalent configurations of any single configuration.
//
// # Safety
// `chain` must be null or a live handle.
size_t rg_chain_max_equivalent_count(const struct RgChain *chain);

// Tool pose for `q`: position (x, y, z) and unit quaternion (w, x, y, z).
//
// # Safety
// `q` must hold `n` values, `position` 3 and `quaternion` 4.
enum RgStatus rg_forward_kinematics(const struct RgChain *chain,
                                    const double *q,
                                    size_t n,
                                    double *position,
                                    double *quaternion);

// All in-limit configurations `q + 2πk` (including `q` itself when it is
// within limits), written row-major into `out`.
//
// # Safety
// `q` must hold `n` values; `out` must hold `capacity * dof` values.
enum RgStatus rg_equivalent_configurations(const struct RgChain *chain,
                                           const double *q,
                                           size_t n,
                                           double *out,
                                           size_t capacity,
                                           size_t *out_count);

// Closed-form inverse kinematics for a pose given as position (x, y, z) and
// quaternion (w, x, y, z). Solutions are wrapped into the joint limits.
//
// # Safety
// `position` must hold 3 values, `quaternion` 4; `out` must hold
// `capacity * dof` values.
enum RgStatus rg_inverse_kinematics(const struct RgChain *chain,
                                    const double *position,
                                    const double *quaternion,
                                    double *out,
                                    size_t capacity,
                                    size_t *out_count);

// The goal configurations of a task goal (JSON), ordered by rank: the first
// row is the configuration closest to `start`.
//
// # Safety
// `goal_json` must be a NUL-terminated string; `start` must hold `n` values;
// `out` must hold `capacity * dof` values.
enum RgStatus rg_goal_set(const struct RgChain *chain,
                          const char *goal_json,
                          const double *start,
                          size_t n,
                          double *out,
                          size_t capacity,
                          size_t *out_count);

// Builds a scene from `source`: `cubicles` or `vine` (generated with `seed`),
// a scene spec or scene JSON file, or inline scene JSON.
//
// # Safety
// `source` must be a NUL-terminated string; `out` must be writable.
enum RgStatus rg_scene_load(const char *source, uint64_t seed, struct RgScene **out);

// # Safety
// `scene` must be null or a handle from [`rg_scene_load`], not yet freed.
void rg_scene_free(struct RgScene *scene);

// Number of task goals a generated scene carries (0 for plain scenes).
//
// # Safety
// `scene` must be null or a live handle.
size_t rg_scene_task_count(const struct RgScene *scene);

// Task goal `index` of a generated scene as JSON; free with [`rg_string_free`].
//
// # Safety
// `scene` must be a live handle; `out_json` must be writable.
enum RgStatus rg_scene_task_json(const struct RgScene *scene, size_t index, char **out_json);

// Plans from `start` to the goal configurations of `goal_json`, keeping `k`
// of them picked by `strategy` (`k == 0` keeps all). The result is written
// as JSON to `out_json`; free it with [`rg_string_free`]. An unsolved query
// is not an error: check the `success` field.
//
// # Safety
// Handles must be live; `goal_json` NUL-terminated; `start` must hold `n`
// values; `out_json` must be writable.
enum RgStatus rg_plan_json(const struct RgScene *scene,
                           const struct RgChain *chain,
                           const double *start,
                           size_t n,
                           const char *goal_json,
                           size_t k,
                           enum RgStrategy strategy,
                           double budget_ms,
                           uint64_t seed,
                           char **out_json);

// Time for one straight joint-space segment of displacement `delta`, with
// all joints synchronized to the slowest one.
//
// # Safety
// `delta`, `v_max` and `a_max` must each hold `n` values; `out` must be writable.
enum RgStatus rg_segment_time(const double *delta,
                              const double *v_max,
                              const double *a_max,
                              size_t n,
                              double *out);

// Execution time of a path of `count` waypoints stored row-major.
//
// # Safety
// `waypoints` must hold `count * n` values; `v_max` and `a_max` `n` each.
enum RgStatus rg_execution_time(const double *waypoints,
                                size_t count,
                                const double *v_max,
                                const double *a_max,
                                size_t n,
                                double *out);

#endif  /* REDUGOAL_H */
