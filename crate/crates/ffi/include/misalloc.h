#ifndef MISALLOC_H
#define MISALLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MISALLOC_TIE_BREAK_ERROR 0

#define MISALLOC_TIE_BREAK_INDEX 1

#define MISALLOC_ANCHORS_FIXED 0

#define MISALLOC_ANCHORS_INTERVAL 1

/**
 * Result of every fallible call.
 */
typedef enum MisallocStatus {
  MISALLOC_STATUS_OK = 0,
  MISALLOC_STATUS_INVALID_INPUT = 1,
  MISALLOC_STATUS_DOMAIN = 2,
  MISALLOC_STATUS_INFEASIBLE = 3,
  MISALLOC_STATUS_NON_CONVERGENCE = 4,
  MISALLOC_STATUS_COST_TIE = 5,
  MISALLOC_STATUS_DEGENERATE = 6,
  MISALLOC_STATUS_EMPTY_INTERVAL = 7,
  MISALLOC_STATUS_TOO_LARGE = 8,
  MISALLOC_STATUS_ROW = 9,
  MISALLOC_STATUS_IO = 10,
  MISALLOC_STATUS_NULL_POINTER = 11,
  MISALLOC_STATUS_BUFFER_TOO_SMALL = 12,
  MISALLOC_STATUS_PANIC = 13,
} MisallocStatus;

/**
 * A robust-bounds problem.
 */
typedef struct MisallocBoundsProblem MisallocBoundsProblem;

/**
 * Markets facing one ceiling with a fixed supply.
 */
typedef struct MisallocMarkets MisallocMarkets;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last error message on this thread, or null if the last call
 * succeeded. Release with [`misalloc_string_free`].
 */
char *misalloc_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, released once.
 */
void misalloc_string_free(char *s);

/**
 * Library version, static storage.
 */
const char *misalloc_version(void);

/**
 * Builds markets from a JSON array of market specs; caps are demand at `ceiling`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MisallocStatus misalloc_markets_from_json(const char *json,
                                               double ceiling,
                                               double supply,
                                               struct MisallocMarkets **out);

/**
 * # Safety
 * `h` must be null or a handle from [`misalloc_markets_from_json`], released once.
 */
void misalloc_markets_free(struct MisallocMarkets *h);

/**
 * Number of markets, 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t misalloc_markets_len(const struct MisallocMarkets *h);

/**
 * Surplus-maximizing split of the supply; writes quantities and the common
 * shadow price.
 *
 * # Safety
 * `h` must be live; `q_out` must hold `len` doubles; `price_out` may be null.
 */
enum MisallocStatus misalloc_efficient_allocation(const struct MisallocMarkets *h,
                                                  double *q_out,
                                                  size_t len,
                                                  double *price_out);

/**
 * Delivery-cost-minimizing allocation under the ceiling.
 *
 * # Safety
 * `h` must be live; `q_out` must hold `len` doubles.
 */
enum MisallocStatus misalloc_controlled_allocation(const struct MisallocMarkets *h,
                                                   uint32_t tie_break,
                                                   double *q_out,
                                                   size_t len);

/**
 * Surplus-minimizing feasible allocation and its cutoff value.
 *
 * # Safety
 * `h` must be live; `q_out` must hold `len` doubles; `cutoff_out` may be null.
 */
enum MisallocStatus misalloc_worst_case_allocation(const struct MisallocMarkets *h,
                                                   double *q_out,
                                                   size_t len,
                                                   double *cutoff_out);

/**
 * Surplus lost by `q` relative to the efficient split.
 *
 * # Safety
 * `h` must be live; `q` must hold `len` doubles; `loss_out` must be writable.
 */
enum MisallocStatus misalloc_misallocation_loss(const struct MisallocMarkets *h,
                                                const double *q,
                                                size_t len,
                                                double *loss_out);

/**
 * Parses a bounds problem from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MisallocStatus misalloc_bounds_problem_from_json(const char *json,
                                                      struct MisallocBoundsProblem **out);

/**
 * # Safety
 * `h` must be null or a handle from [`misalloc_bounds_problem_from_json`], released once.
 */
void misalloc_bounds_problem_free(struct MisallocBoundsProblem *h);

/**
 * Lower and upper bounds on misallocation loss.
 *
 * # Safety
 * `h` must be live; `lower_out` and `upper_out` must be writable.
 */
enum MisallocStatus misalloc_solve_bounds(const struct MisallocBoundsProblem *h,
                                          uint32_t anchors,
                                          uint64_t seed,
                                          double *lower_out,
                                          double *upper_out);

/**
 * Full bounds result as JSON, including extremal curves. Release the string
 * with [`misalloc_string_free`].
 *
 * # Safety
 * `h` must be live; `json_out` must be writable.
 */
enum MisallocStatus misalloc_solve_bounds_json(const struct MisallocBoundsProblem *h,
                                               uint32_t anchors,
                                               uint64_t seed,
                                               char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MISALLOC_H */
