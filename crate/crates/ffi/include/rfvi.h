#ifndef RFVI_H
#define RFVI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible function.
 */
typedef enum {
  RFVI_STATUS_OK = 0,
  RFVI_STATUS_NULL_POINTER = 1,
  RFVI_STATUS_INVALID_ARGUMENT = 2,
  RFVI_STATUS_NUMERICAL = 3,
  RFVI_STATUS_IO = 4,
  RFVI_STATUS_FORMAT = 5,
  RFVI_STATUS_BUFFER_TOO_SMALL = 6,
  RFVI_STATUS_PANIC = 7,
} RfviStatus;

typedef enum {
  RFVI_METHOD_PROJECTION = 0,
  RFVI_METHOD_KORPELEVICH = 1,
  RFVI_METHOD_POPOV = 2,
} RfviMethod;

/**
 * A problem instance.
 */
typedef struct RfviProblem RfviProblem;

/**
 * The trace of one run.
 */
typedef struct RfviTrace RfviTrace;

/**
 * Parameters of [`rfvi_run`].
 */
typedef struct {
  RfviMethod method;
  /**
   * Constant batch size; 0 selects the `max(1, ⌈log₁₀ k⌉)` schedule.
   */
  size_t batch;
  /**
   * Polyak relaxation in (0, 2).
   */
  double beta;
  size_t iterations;
  uint64_t seed;
  /**
   * Record every this many iterations (plus the first and last); 0 means 1.
   */
  size_t record_every;
  /**
   * Use the larger initial step `1/(4(L+μ))` for projection and Popov.
   */
  bool bigstep;
} RfviRunParams;

/**
 * One recorded iteration; absent values are NaN.
 */
typedef struct {
  size_t k;
  double alpha;
  double sq_dist_solution;
  double dist_set_or_violation;
  double feas_residual;
  uint64_t f_evals;
} RfviRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *rfvi_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rfvi_version(void);

/**
 * Generates a two-player matrix game with quadratic constraints.
 * `full_scale` selects 100 variables and 10⁴ constraints per agent instead
 * of 20 and 10³.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
RfviStatus rfvi_problem_matrix_game(double mu,
                                    double lipschitz,
                                    uint64_t seed,
                                    bool full_scale,
                                    RfviProblem **out);

/**
 * Builds the imitation game with exploration levels `ξ ~ U[0, xi_max]`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
RfviStatus rfvi_problem_imitation(double xi_max, RfviProblem **out);

/**
 * Loads an instance file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
RfviStatus rfvi_problem_load(const char *path, RfviProblem **out);

/**
 * Saves an instance file.
 *
 * # Safety
 * `problem` must be a live handle; `path` a NUL-terminated string.
 */
RfviStatus rfvi_problem_save(const RfviProblem *problem, const char *path);

/**
 * Total dimension of the joint decision; 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t rfvi_problem_dim(const RfviProblem *problem);

/**
 * Number of agents; 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t rfvi_problem_num_agents(const RfviProblem *problem);

/**
 * Strong monotonicity and Lipschitz constants of the mapping.
 *
 * # Safety
 * `problem` must be a live handle; `mu` and `lipschitz` writable.
 */
RfviStatus rfvi_problem_constants(const RfviProblem *problem, double *mu, double *lipschitz);

/**
 * Copies the known solution into `out[0..dim]`.
 *
 * # Safety
 * `problem` must be a live handle; `out` must hold `len` doubles.
 */
RfviStatus rfvi_problem_solution(const RfviProblem *problem, double *out, size_t len);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void rfvi_problem_free(RfviProblem *problem);

/**
 * Runs one trial of a method.
 *
 * # Safety
 * `problem` must be a live handle, `params` readable, `out` writable.
 */
RfviStatus rfvi_run(const RfviProblem *problem, const RfviRunParams *params, RfviTrace **out);

/**
 * Number of recorded iterations; 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t rfvi_trace_len(const RfviTrace *trace);

/**
 * Copies record `index` into `out`.
 *
 * # Safety
 * `trace` must be a live handle; `out` writable.
 */
RfviStatus rfvi_trace_record(const RfviTrace *trace, size_t index, RfviRecord *out);

/**
 * Copies the final iterate into `out[0..dim]`.
 *
 * # Safety
 * `trace` must be a live handle; `out` must hold `len` doubles.
 */
RfviStatus rfvi_trace_final_x(const RfviTrace *trace, double *out, size_t len);

/**
 * Smallest feasibility residual over all iterations; NaN when none was
 * computed or the handle is null.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
double rfvi_trace_min_feas_residual(const RfviTrace *trace);

/**
 * # Safety
 * `trace` must be null or a handle not yet freed.
 */
void rfvi_trace_free(RfviTrace *trace);

/**
 * Popov parameter `τ(μ, L)`; NaN for invalid constants.
 */
double rfvi_popov_tau(double mu, double lipschitz);

/**
 * `q = β(2−β)/(c·M_g²)`; fails unless `q < 1`.
 *
 * # Safety
 * `out` must be writable.
 */
RfviStatus rfvi_compute_q(double beta, double c, double mg, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFVI_H */
