#ifndef BELLJUMP_H
#define BELLJUMP_H

/* Generated by cbindgen from the belljump-ffi crate. Do not edit; regenerate with `cargo build -p belljump-ffi --features generate-header`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum BjStatus {
  BJ_STATUS_OK = 0,
  // A required pointer argument was NULL.
  BJ_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  BJ_STATUS_INVALID_UTF8 = 2,
  // A value argument was out of range (bad time window, label index,
  // threshold, or unknown builtin name).
  BJ_STATUS_INVALID_ARGUMENT = 3,
  // Model JSON failed to parse or described inconsistent operators.
  BJ_STATUS_MODEL_REJECTED = 4,
  // The engine failed mid-computation; see `bj_last_error`.
  BJ_STATUS_ENGINE_FAILURE = 5,
  // An output buffer is shorter than the label count.
  BJ_STATUS_BUFFER_TOO_SMALL = 6,
  // A panic was caught at the boundary.
  BJ_STATUS_PANIC = 7,
} BjStatus;

// Opaque model handle: generator, measurement, initial state, and the node
// threshold, spectrally decomposed once at creation.
typedef struct BjModel BjModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a static string, `major.minor.patch`.
const char *bj_version(void);

// Message for the most recent failing call on this thread, or NULL if the
// most recent call succeeded. The pointer is invalidated by the next call.
const char *bj_last_error(void);

// Create a handle for a bundled model by name. `node_epsilon` is the node
// threshold relative to the squared norm of the initial state, in (0, 1);
// 1e-12 is the conventional choice.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum BjStatus bj_model_builtin(const char *name, double node_epsilon, struct BjModel **out);

// Create a handle from model JSON (the `model export` format of the CLI).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum BjStatus bj_model_from_json(const char *json, double node_epsilon, struct BjModel **out);

// Release a model handle. NULL is ignored.
//
// # Safety
// `model` must have come from a model constructor and not be used afterward.
void bj_model_free(struct BjModel *model);

// Dimension of the underlying space; 0 for NULL.
//
// # Safety
// `model` must be a live handle or NULL.
size_t bj_model_dim(const struct BjModel *model);

// Number of configuration labels; 0 for NULL.
//
// # Safety
// `model` must be a live handle or NULL.
size_t bj_model_label_count(const struct BjModel *model);

// Name of the model; borrowed from the handle. NULL for NULL.
//
// # Safety
// `model` must be a live handle or NULL.
const char *bj_model_name(const struct BjModel *model);

// Label text for one configuration index; borrowed from the handle. NULL
// when the handle is NULL or the index is out of range.
//
// # Safety
// `model` must be a live handle or NULL.
const char *bj_model_label_name(const struct BjModel *model, size_t index);

// Write the weight of every label at time `t` into `weights`, which must
// hold at least `bj_model_label_count` entries. The weights are nonnegative
// and sum to the squared norm of the initial state.
//
// # Safety
// `model` must be a live handle; `weights` must point to `len` doubles.
enum BjStatus bj_distribution(const struct BjModel *model, double t, double *weights, size_t len);

// Jump rate from label `from` to label `to` at time `t`. When `from` is on
// the node set at `t` the rate is reported as positive infinity.
//
// # Safety
// `model` must be a live handle; `rate` must be a valid pointer.
enum BjStatus bj_jump_rate(const struct BjModel *model,
                           double t,
                           size_t from,
                           size_t to,
                           double *rate);

// Sample one trajectory and return it as a JSON document (index, status,
// events as `[time, label]` pairs, final time). The same arguments always
// produce the same bytes.
//
// # Safety
// `model` must be a live handle; `json_out` must be a valid pointer. Free
// the result with `bj_string_free`.
enum BjStatus bj_simulate_trajectory(const struct BjModel *model,
                                     double t0,
                                     double t_end,
                                     uint64_t seed,
                                     uint64_t index,
                                     size_t max_jumps,
                                     char **json_out);

// Run an ensemble of `n` trajectories and return the aggregate report as a
// JSON document: empirical occupancy at each checkpoint against the exact
// weights, total-variation gaps, jump-count statistics, and explosion and
// absorption counters. `checkpoints` may be NULL when `n_checkpoints` is 0.
// The same arguments always produce the same bytes.
//
// # Safety
// `model` must be a live handle; `checkpoints` must point to `n_checkpoints`
// doubles when nonzero; `json_out` must be a valid pointer. Free the result
// with `bj_string_free`.
enum BjStatus bj_run_ensemble(const struct BjModel *model,
                              double t0,
                              double t_end,
                              uint64_t seed,
                              uint64_t n,
                              const double *checkpoints,
                              size_t n_checkpoints,
                              size_t max_jumps,
                              char **json_out);

// Release a string returned through a `char **` out parameter. NULL is
// ignored.
//
// # Safety
// `s` must have come from this library and not be used afterward.
void bj_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLJUMP_H */
