#ifndef FORUMBOT_H
#define FORUMBOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FbReason {
  FB_REASON_OK = 0,
  FB_REASON_DANGEROUS = 1,
  FB_REASON_RATE_LIMITED = 2,
  FB_REASON_COOLDOWN = 3,
  FB_REASON_ROLE_DENIED = 4,
} FbReason;

typedef enum FbStatus {
  FB_STATUS_OK = 0,
  FB_STATUS_NULL_ARGUMENT = 1,
  FB_STATUS_INVALID_UTF8 = 2,
  FB_STATUS_INVALID_ARGUMENT = 3,
  FB_STATUS_UNKNOWN_ROBOT_KIND = 4,
  FB_STATUS_ROBOT_BUSY = 5,
  FB_STATUS_SPEED_LIMIT = 6,
  FB_STATUS_NEGATIVE_MAGNITUDE = 7,
  FB_STATUS_PRIMITIVE_UNAVAILABLE = 8,
  FB_STATUS_STORE_ERROR = 9,
  FB_STATUS_COMMAND_FAILED = 10,
  FB_STATUS_NOT_FOUND = 11,
  FB_STATUS_PANIC = 99,
} FbStatus;

/**
 * Opaque simulated robot.
 */
typedef struct FbRobot FbRobot;

/**
 * Opaque safety guard with its own rate and cooldown history.
 */
typedef struct FbSafetyGuard FbSafetyGuard;

typedef struct FbPose {
  double x;
  double y;
  /**
   * Radians in (-pi, pi].
   */
  double heading;
  /**
   * Simulated seconds.
   */
  double clock;
  double busy_until;
} FbPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread.
 */
const char *fb_last_error(void);

/**
 * Static name of a status code.
 */
const char *fb_status_name(enum FbStatus status);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. NULL is ignored.
 */
void fb_string_free(char *s);

/**
 * Creates a robot of kind `"go2"` or `"g1"` at the origin.
 *
 * # Safety
 * `kind` must be a valid C string; `out` must be writable.
 */
enum FbStatus fb_robot_new(const char *kind, struct FbRobot **out);

/**
 * # Safety
 * `robot` must come from [`fb_robot_new`] and not be used afterwards.
 */
void fb_robot_free(struct FbRobot *robot);

/**
 * Directory that `img_to_volc` uploads into.
 *
 * # Safety
 * `robot` must be a live handle; `dir` a valid C string.
 */
enum FbStatus fb_robot_set_blob_dir(struct FbRobot *robot, const char *dir);

/**
 * `direction` is one of forward, backward, strafe_left, strafe_right,
 * turn_left, turn_right. Magnitude is metres or degrees.
 *
 * # Safety
 * `robot` must be a live handle; `direction` a valid C string.
 */
enum FbStatus fb_robot_act_move(struct FbRobot *robot,
                                const char *direction,
                                double magnitude,
                                double speed);

/**
 * Calls a primitive by name with JSON params (NULL means `{}`). The
 * observation text goes to `out` when it is not NULL.
 *
 * # Safety
 * `robot` must be a live handle; strings valid; `out` NULL or writable.
 */
enum FbStatus fb_robot_invoke(struct FbRobot *robot,
                              const char *name,
                              const char *params_json,
                              char **out);

/**
 * Moves the simulated clock forward.
 *
 * # Safety
 * `robot` must be a live handle.
 */
enum FbStatus fb_robot_advance(struct FbRobot *robot, double secs);

/**
 * Jumps the clock to the end of the running action.
 *
 * # Safety
 * `robot` must be a live handle.
 */
enum FbStatus fb_robot_wait_idle(struct FbRobot *robot);

/**
 * # Safety
 * `robot` must be a live handle; `out` writable.
 */
enum FbStatus fb_robot_pose(const struct FbRobot *robot, struct FbPose *out);

/**
 * Event log as JSON lines, one attempted primitive call per line.
 *
 * # Safety
 * `robot` must be a live handle; `out` writable.
 */
enum FbStatus fb_robot_event_log(const struct FbRobot *robot, char **out);

/**
 * Runs a natural-language command through the rule-based planner. The
 * transcript is written to `out` whether or not the command succeeded;
 * failure returns `CommandFailed`.
 *
 * # Safety
 * `robot` must be a live handle; `command` valid; `out` writable.
 */
enum FbStatus fb_robot_execute(struct FbRobot *robot, const char *command, char **out);

/**
 * Builds a guard from a TOML policy, or the default policy when
 * `policy_toml` is NULL.
 *
 * # Safety
 * `policy_toml` NULL or a valid C string; `out` writable.
 */
enum FbStatus fb_safety_new(const char *policy_toml, struct FbSafetyGuard **out);

/**
 * # Safety
 * `guard` must come from [`fb_safety_new`] and not be used afterwards.
 */
void fb_safety_free(struct FbSafetyGuard *guard);

/**
 * Checks a command. Allowed commands count towards the rate limit and
 * cooldown. `now_unix` is seconds since the epoch. `out_detail` may be NULL.
 *
 * # Safety
 * `guard` must be live; strings valid; `out_reason` writable.
 */
enum FbStatus fb_safety_evaluate(struct FbSafetyGuard *guard,
                                 const char *command,
                                 uint64_t account_id,
                                 const char *role,
                                 const char *robot,
                                 double now_unix,
                                 enum FbReason *out_reason,
                                 char **out_detail);

/**
 * Prefixes `content` with an agent metadata block, replacing any existing
 * one. `status` is info, success, failure or in_progress.
 *
 * # Safety
 * All strings valid; `out` writable.
 */
enum FbStatus fb_meta_inject(const char *content,
                             const char *agent_type,
                             const char *agent_id,
                             const char *status,
                             char **out);

/**
 * Parses the metadata block into JSON
 * `{"agent_type","agent_id","status","body"}`. `NotFound` when the post
 * carries no block.
 *
 * # Safety
 * `content` valid; `out` writable.
 */
enum FbStatus fb_meta_parse(const char *content, char **out);

/**
 * Whether a human post addresses `pattern` in its title or body. Posts
 * carrying agent metadata never match.
 *
 * # Safety
 * Strings valid; `out` writable.
 */
enum FbStatus fb_mentions(const char *title, const char *content, const char *pattern, bool *out);

/**
 * Rule-based command extraction: the text after `mention`. `NotFound`
 * when there is none.
 *
 * # Safety
 * Strings valid; `out` writable.
 */
enum FbStatus fb_extract_command(const char *content, const char *mention, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORUMBOT_H */
