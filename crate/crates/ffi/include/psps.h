#ifndef PSPS_H
#define PSPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PspsStatus {
  PSPS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PSPS_STATUS_NULL = 1,
  PSPS_STATUS_UTF8 = 2,
  PSPS_STATUS_PARSE = 3,
  PSPS_STATUS_INVALID_ARG = 4,
  PSPS_STATUS_INFEASIBLE = 5,
  /**
   * The solver stopped on a limit before proving optimality.
   */
  PSPS_STATUS_SOLVER_LIMIT = 6,
  PSPS_STATUS_INTERNAL = 7,
} PspsStatus;

typedef enum PspsProblem {
  PSPS_PROBLEM_OPS = 0,
  PSPS_PROBLEM_SCOPS = 1,
} PspsProblem;

/**
 * Opaque network handle.
 */
typedef struct PspsNetwork PspsNetwork;

/**
 * Opaque solve result handle.
 */
typedef struct PspsResult PspsResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses native network JSON into `*out`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PspsStatus psps_network_from_json(const char *json, struct PspsNetwork **out);

/**
 * Parses Matpower case text into `*out`.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum PspsStatus psps_network_from_matpower(const char *text, struct PspsNetwork **out);

/**
 * # Safety
 * `network` must come from this library and not be used afterwards. Null is ignored.
 */
void psps_network_free(struct PspsNetwork *network);

/**
 * Replaces every line risk with the seeded synthetic risk profile.
 *
 * # Safety
 * `network` must be a live handle.
 */
enum PspsStatus psps_network_apply_seeded_risk(struct PspsNetwork *network, uint64_t seed);

/**
 * Number of lines, or 0 for a null handle.
 *
 * # Safety
 * `network` must be a live handle or null.
 */
size_t psps_network_line_count(const struct PspsNetwork *network);

/**
 * Solves OPS or SC-OPS (against every non-bridge single-line outage) with
 * the built-in solver. `pflex` overrides every generator's flexibility;
 * pass NaN to keep the per-generator values. An infeasible or
 * limit-stopped solve still stores a result in `*out` and returns
 * `PSPS_STATUS_INFEASIBLE` or `PSPS_STATUS_SOLVER_LIMIT`.
 *
 * # Safety
 * `network` must be a live handle and `out` a valid pointer.
 */
enum PspsStatus psps_solve(const struct PspsNetwork *network,
                           enum PspsProblem problem,
                           double alpha,
                           double beta,
                           double pflex,
                           struct PspsResult **out);

/**
 * # Safety
 * `result` must come from this library and not be used afterwards. Null is ignored.
 */
void psps_result_free(struct PspsResult *result);

/**
 * The status `psps_solve` returned for this result.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
enum PspsStatus psps_result_status(const struct PspsResult *result);

/**
 * Objective (total energized risk), or NaN when there is no plan.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double psps_result_objective(const struct PspsResult *result);

/**
 * Energized risk as a fraction of total risk, or NaN when there is no plan.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double psps_result_active_risk(const struct PspsResult *result);

/**
 * The result as the same JSON document `psps solve` writes, or null on a
 * null handle. Free with [`psps_string_free`].
 *
 * # Safety
 * `result` must be a live handle or null.
 */
char *psps_result_to_json(const struct PspsResult *result);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void psps_string_free(char *s);

/**
 * Message for the last failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *psps_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSPS_H */
