/* C interface to the rlplan planning and uncertainty primitives. */

#ifndef RLPLAN_H
#define RLPLAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum RlpStatus {
  RLP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RLP_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of range or a buffer too small.
   */
  RLP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Geometry failed: degenerate line, projection outside the corridor,
   * infeasible plan duration.
   */
  RLP_STATUS_GEOMETRY = 3,
  /**
   * A covariance was not usable or a confidence level out of (0, 1).
   */
  RLP_STATUS_UNCERTAINTY = 4,
  /**
   * A file could not be read or did not contain a checkpoint.
   */
  RLP_STATUS_IO = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  RLP_STATUS_PANIC = 6,
} RlpStatus;

/**
 * A sampled reference line; build with [`rlp_line_build`], release with
 * [`rlp_line_free`].
 */
typedef struct RlpLine RlpLine;

/**
 * A policy network loaded from a checkpoint; release with
 * [`rlp_policy_free`].
 */
typedef struct RlpPolicy RlpPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message of the last failure on this thread into `buf`
 * (NUL-terminated, truncated to `cap` bytes) and return the full message
 * length in bytes, excluding the NUL. Call with a null `buf` or zero `cap`
 * to query the required length.
 */
uintptr_t rlp_last_error(char *buf, uintptr_t cap);

/**
 * Build a reference line through `n_points` waypoints given as interleaved
 * `x0, y0, x1, y1, ...`, resampled every `ds`.
 */
enum RlpStatus rlp_line_build(const double *xy,
                              uintptr_t n_points,
                              double ds,
                              struct RlpLine **out);

void rlp_line_free(struct RlpLine *line);

/**
 * Total arc length of the line.
 */
enum RlpStatus rlp_line_length(const struct RlpLine *line, double *out);

/**
 * Convert a Frenet state (`double[6]`) to a pose (`double[5]`).
 */
enum RlpStatus rlp_frenet_to_cartesian(const struct RlpLine *line,
                                       const double *state,
                                       double *pose_out);

/**
 * Project a pose (`double[5]`) onto the line as a Frenet state
 * (`double[6]`). Fails if the pose lies more than `corridor` off the line.
 */
enum RlpStatus rlp_cartesian_to_frenet(const struct RlpLine *line,
                                       const double *pose,
                                       double corridor,
                                       double *state_out);

/**
 * Plan jerk-minimal lateral/longitudinal profiles from `from`
 * (`double[6]`) for a goal (`double[4]` as `t_target, d_target,
 * sigma_advance, s_dot_target`), sampled every `delta` out to `horizon`.
 * Writes up to `cap` doubles of consecutive states (6 each) into
 * `states_out` and stores the number of states in `n_out`; fails without
 * writing if `cap` is too small.
 */
enum RlpStatus rlp_plan(const double *from,
                        const double *goal,
                        double delta,
                        double horizon,
                        double *states_out,
                        uintptr_t cap,
                        uintptr_t *n_out);

/**
 * One constant-velocity prediction step of a covariance (`double[16]`
 * row-major over `s, d, s_dot, d_dot`) with process noise diagonal
 * `q_diag` (`double[4]`) added.
 */
enum RlpStatus rlp_covariance_propagate(const double *sigma,
                                        double delta,
                                        const double *q_diag,
                                        double *sigma_out);

/**
 * Confidence ellipse (`double[3]` as `a, b, angle`) of the position block
 * of a covariance (`double[16]` row-major) at confidence mass `conf`.
 */
enum RlpStatus rlp_confidence_ellipse(const double *sigma, double conf, double *ellipse_out);

/**
 * Convex polygon containing the Minkowski sum of an oriented rectangle and
 * an ellipse (`double[3]` as `a, b, angle`). Writes interleaved vertex
 * coordinates into `xy_out` (at most `cap` doubles; 40 always suffices)
 * and the vertex count into `n_out`. A zero ellipse yields the four
 * rectangle corners exactly.
 */
enum RlpStatus rlp_inflate_footprint(double cx,
                                     double cy,
                                     double heading,
                                     double length,
                                     double width,
                                     const double *ellipse,
                                     double *xy_out,
                                     uintptr_t cap,
                                     uintptr_t *n_out);

/**
 * Load a policy network from a checkpoint file.
 */
enum RlpStatus rlp_policy_load(const char *path, struct RlpPolicy **out);

void rlp_policy_free(struct RlpPolicy *policy);

/**
 * Number of observation features the policy expects.
 */
enum RlpStatus rlp_policy_obs_len(const struct RlpPolicy *policy, uintptr_t *out);

/**
 * Number of action coordinates the policy emits.
 */
enum RlpStatus rlp_policy_act_len(const struct RlpPolicy *policy, uintptr_t *out);

/**
 * Run the policy on `obs_len` observation features and write its
 * normalized action (each coordinate in [-1, 1]) into `act_out`, which
 * must hold at least the policy's action width. Scaling normalized
 * coordinates to physical ranges is up to the caller.
 */
enum RlpStatus rlp_policy_act(const struct RlpPolicy *policy,
                              const double *obs,
                              uintptr_t obs_len,
                              double *act_out,
                              uintptr_t cap);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RLPLAN_H */
