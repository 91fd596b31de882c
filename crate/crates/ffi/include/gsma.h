#ifndef GSMA_H
#define GSMA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum GsmaStatus {
  GSMA_STATUS_OK = 0,
  GSMA_STATUS_NULL_ARGUMENT = 1,
  /**
   * Malformed matrices, configuration or files.
   */
  GSMA_STATUS_INVALID_INPUT = 2,
  /**
   * The iteration failed or a shifted operator was singular.
   */
  GSMA_STATUS_SOLVER_FAILURE = 3,
  GSMA_STATUS_IO = 4,
  GSMA_STATUS_INDEX_OUT_OF_RANGE = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  GSMA_STATUS_PANIC = 6,
} GsmaStatus;

/**
 * Pencil `λEv = Av` with `E` a symmetric projection.
 */
typedef struct GsmaPencil GsmaPencil;

/**
 * Converged modes and their JSON report.
 */
typedef struct GsmaSolution GsmaSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gsma_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *gsma_last_error(void);

/**
 * Pencil from real column-major `m×m` arrays.
 *
 * # Safety
 * `e` and `a` must point to `m·m` doubles; `out` must be writable.
 */
enum GsmaStatus gsma_pencil_from_dense(size_t m,
                                       const double *e,
                                       const double *a,
                                       struct GsmaPencil **out);

/**
 * Pencil from complex column-major `m×m` arrays of interleaved pairs.
 *
 * # Safety
 * `e` and `a` must point to `2·m·m` doubles; `out` must be writable.
 */
enum GsmaStatus gsma_pencil_from_dense_complex(size_t m,
                                               const double *e,
                                               const double *a,
                                               struct GsmaPencil **out);

/**
 * Pencil from a problem manifest; composite models are assembled into
 * their monolithic pencil.
 *
 * # Safety
 * `manifest` must be a NUL-terminated path; `out` must be writable.
 */
enum GsmaStatus gsma_pencil_load(const char *manifest, struct GsmaPencil **out);

/**
 * Order of the pencil, zero for a null handle.
 *
 * # Safety
 * `pencil` must be null or a live handle.
 */
size_t gsma_pencil_dim(const struct GsmaPencil *pencil);

/**
 * # Safety
 * `pencil` must be null or a handle not yet freed.
 */
void gsma_pencil_free(struct GsmaPencil *pencil);

/**
 * Runs an algorithm described by JSON, for example
 * `{"algorithm": 6, "initial": {"kind": "canonical", "n": 2},
 *   "selectors": [{"kind": "nearest", "target": [1.0, 0.0]}]}`.
 *
 * # Safety
 * `pencil` must be a live handle, `spec_json` NUL-terminated and `out`
 * writable.
 */
enum GsmaStatus gsma_solve(const struct GsmaPencil *pencil,
                           const char *spec_json,
                           struct GsmaSolution **out);

/**
 * Number of modes, zero for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t gsma_solution_mode_count(const struct GsmaSolution *solution);

/**
 * Eigenvalue of mode `k`.
 *
 * # Safety
 * `solution` must be a live handle; `re` and `im` writable.
 */
enum GsmaStatus gsma_solution_eigenvalue(const struct GsmaSolution *solution,
                                         size_t k,
                                         double *re,
                                         double *im);

/**
 * Copies the unit right vector of mode `k` as interleaved pairs; `len`
 * must be at least twice the pencil order.
 *
 * # Safety
 * `solution` must be a live handle and `out` must hold `len` doubles.
 */
enum GsmaStatus gsma_solution_right_vector(const struct GsmaSolution *solution,
                                           size_t k,
                                           double *out,
                                           size_t len);

/**
 * Per-mode JSON report, owned by the solution.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const char *gsma_solution_report_json(const struct GsmaSolution *solution);

/**
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void gsma_solution_free(struct GsmaSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GSMA_H */
