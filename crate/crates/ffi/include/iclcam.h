#ifndef ICLCAM_H
#define ICLCAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IclStatus {
  ICL_STATUS_OK = 0,
  ICL_STATUS_NULL_ARGUMENT = 1,
  ICL_STATUS_INVALID_UTF8 = 2,
  ICL_STATUS_PARSE = 3,
  ICL_STATUS_VALIDATION = 4,
  ICL_STATUS_NOT_SPD = 5,
  ICL_STATUS_DEGENERATE = 6,
  ICL_STATUS_SIMULATION_ABORT = 7,
  ICL_STATUS_NOT_EXCITED = 8,
  ICL_STATUS_IO = 9,
  ICL_STATUS_OUT_OF_RANGE = 10,
  ICL_STATUS_PANIC = 11,
} IclStatus;

/**
 * Opaque scenario configuration.
 */
typedef struct IclConfig IclConfig;

/**
 * Opaque run log.
 */
typedef struct IclRunLog IclRunLog;

/**
 * Opaque sweep table.
 */
typedef struct IclSweep IclSweep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *icl_last_error_message(void);

/**
 * Default scenario. Never NULL.
 */
struct IclConfig *icl_config_default(void);

/**
 * Parses and validates a JSON scenario.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IclStatus icl_config_from_json(const char *json, struct IclConfig **out);

/**
 * Loads a JSON scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IclStatus icl_config_load(const char *path, struct IclConfig **out);

/**
 * Serializes the config as JSON. Free the result with [`icl_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle or NULL.
 */
char *icl_config_to_json(const struct IclConfig *cfg);

/**
 * Sets the orthogonality gain; rejected (config unchanged) if negative.
 *
 * # Safety
 * `cfg` must be a live handle or NULL.
 */
enum IclStatus icl_config_set_gamma(struct IclConfig *cfg, double gamma);

/**
 * Sets the noise seed.
 *
 * # Safety
 * `cfg` must be a live handle or NULL.
 */
enum IclStatus icl_config_set_seed(struct IclConfig *cfg, uint64_t seed);

/**
 * Sets the pixel noise standard deviation; rejected if negative.
 *
 * # Safety
 * `cfg` must be a live handle or NULL.
 */
enum IclStatus icl_config_set_pixel_sigma(struct IclConfig *cfg, double sigma);

/**
 * # Safety
 * `cfg` must be a handle from this library, or NULL, and not used afterwards.
 */
void icl_config_free(struct IclConfig *cfg);

/**
 * Runs the closed loop. On [`IclStatus::SimulationAbort`] `*out` still
 * receives the partial log when one exists (otherwise NULL).
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum IclStatus icl_run(const struct IclConfig *cfg, struct IclRunLog **out);

/**
 * # Safety
 * `log` must be a live handle or NULL.
 */
size_t icl_run_log_len(const struct IclRunLog *log);

/**
 * # Safety
 * `log` must be a live handle or NULL.
 */
size_t icl_run_log_feature_count(const struct IclRunLog *log);

/**
 * True if the run stopped before its horizon.
 *
 * # Safety
 * `log` must be a live handle or NULL.
 */
bool icl_run_log_aborted(const struct IclRunLog *log);

/**
 * Norm of the final goal position; NaN for an empty log or NULL.
 *
 * # Safety
 * `log` must be a live handle or NULL.
 */
double icl_run_log_final_position_error(const struct IclRunLog *log);

/**
 * # Safety
 * `log` must be a live handle or NULL.
 */
double icl_run_log_total_cost(const struct IclRunLog *log);

/**
 * # Safety
 * `log` must be a live handle or NULL.
 */
double icl_run_log_average_condition(const struct IclRunLog *log);

/**
 * Time at which every feature's history stack was excited.
 *
 * # Safety
 * `log` must be a live handle and `tau` a valid pointer.
 */
enum IclStatus icl_run_log_tau(const struct IclRunLog *log, double *tau);

/**
 * Time and true goal position (camera frame) of row `index`.
 *
 * # Safety
 * `log` must be a live handle, `t` a valid pointer and `p_c_g` point to 3 doubles.
 */
enum IclStatus icl_run_log_row(const struct IclRunLog *log, size_t index, double *t, double *p_c_g);

/**
 * Batch estimate of the goal-to-feature distance for `feature`.
 *
 * # Safety
 * `log` must be a live handle and `d` a valid pointer.
 */
enum IclStatus icl_run_log_batch_estimate(const struct IclRunLog *log, size_t feature, double *d);

/**
 * Writes the run table, summary and figures into directory `dir`.
 *
 * # Safety
 * `log` must be a live handle and `dir` a NUL-terminated string.
 */
enum IclStatus icl_run_log_write(const struct IclRunLog *log, const char *dir);

/**
 * # Safety
 * `log` must be a handle from this library, or NULL, and not used afterwards.
 */
void icl_run_log_free(struct IclRunLog *log);

/**
 * Runs the scenario once per gain in `gammas[0..len]`. Individual run
 * failures are recorded in the table rather than returned.
 *
 * # Safety
 * `cfg` must be a live handle, `gammas` point to `len` doubles and `out` be valid.
 */
enum IclStatus icl_sweep(const struct IclConfig *cfg,
                         const double *gammas,
                         size_t len,
                         struct IclSweep **out);

/**
 * # Safety
 * `sweep` must be a live handle or NULL.
 */
size_t icl_sweep_len(const struct IclSweep *sweep);

/**
 * Reads row `index`. Returns [`IclStatus::SimulationAbort`] (with the
 * gamma still written) if that run failed.
 *
 * # Safety
 * `sweep` must be a live handle; the out pointers must be valid.
 */
enum IclStatus icl_sweep_row(const struct IclSweep *sweep,
                             size_t index,
                             double *gamma,
                             double *avg_cond,
                             double *final_pos_err,
                             double *total_cost);

/**
 * Writes the sweep table and its figure into directory `dir`.
 *
 * # Safety
 * `sweep` must be a live handle and `dir` a NUL-terminated string.
 */
enum IclStatus icl_sweep_write(const struct IclSweep *sweep, const char *dir);

/**
 * # Safety
 * `sweep` must be a handle from this library, or NULL, and not used afterwards.
 */
void icl_sweep_free(struct IclSweep *sweep);

/**
 * Planner gains for weights `q`, `r` (row-major 3×3), gain `gamma` and
 * unit normal `n`. Writes the row-major Riccati solution to `s_out` and
 * the feedback matrix to `k_out`.
 *
 * # Safety
 * `q`, `r`, `s_out`, `k_out` must point to 9 doubles and `n` to 3.
 */
enum IclStatus icl_build_gains(const double *q,
                               const double *r,
                               double gamma,
                               const double *n,
                               double *s_out,
                               double *k_out);

/**
 * # Safety
 * `s` must come from this library (e.g. [`icl_config_to_json`]) or be NULL.
 */
void icl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICLCAM_H */
