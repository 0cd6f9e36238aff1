#ifndef LIFECYCLE_SIM_H
#define LIFECYCLE_SIM_H

/* Generated by cbindgen; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every FFI call.
 */
typedef enum lcs_status {
  LCS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LCS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A parameter violated its domain (sigma, beta, rates, incomes...).
   */
  LCS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The environment has non-positive lifetime wealth.
   */
  LCS_STATUS_INFEASIBLE = 3,
  /**
   * Evaluation outside the function's domain (e.g. zero consumption).
   */
  LCS_STATUS_DOMAIN_ERROR = 4,
  /**
   * The output buffer is smaller than the number of periods.
   */
  LCS_STATUS_BUFFER_TOO_SMALL = 5,
} lcs_status;

/**
 * Opaque problem handle: preferences plus a budget environment.
 */
typedef struct LcsProblem LcsProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a problem handle.
 *
 * # Safety
 * `incomes` must point to `n_incomes` readable doubles and `out` to a
 * writable pointer slot. On success `*out` owns the handle and must be
 * released with [`lcs_problem_free`].
 */
enum lcs_status lcs_problem_new(double sigma,
                                double beta,
                                double initial_wealth,
                                const double *incomes,
                                uintptr_t n_incomes,
                                double period_rate,
                                struct LcsProblem **out);

/**
 * Attach an interest-earnings tax to the problem.
 *
 * # Safety
 * `problem` must be a live handle from [`lcs_problem_new`].
 */
enum lcs_status lcs_problem_set_interest_tax(struct LcsProblem *problem,
                                             double tax_rate,
                                             bool rebate_on_borrowing);

/**
 * Release a handle; null is ignored.
 *
 * # Safety
 * `problem` must be null or a handle from [`lcs_problem_new`] not yet
 * freed.
 */
void lcs_problem_free(struct LcsProblem *problem);

/**
 * Number of periods in the problem.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum lcs_status lcs_problem_horizon(const struct LcsProblem *problem, uintptr_t *out);

/**
 * Lifetime wealth discounted at the after-tax rate.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum lcs_status lcs_lifetime_wealth(const struct LcsProblem *problem, double *out);

/**
 * Closed-form optimal plan; writes one consumption per period.
 *
 * # Safety
 * `out_consumptions` must point to at least `capacity` writable doubles.
 */
enum lcs_status lcs_solve(const struct LcsProblem *problem,
                          double *out_consumptions,
                          uintptr_t capacity);

/**
 * Grid-search oracle for two-period problems.
 *
 * # Safety
 * `out_c1` and `out_c2` must be writable.
 */
enum lcs_status lcs_solve_numeric(const struct LcsProblem *problem,
                                  uintptr_t grid_resolution,
                                  double *out_c1,
                                  double *out_c2);

/**
 * Largest-magnitude Euler residual of a candidate plan.
 *
 * # Safety
 * `consumptions` must point to `len` readable doubles; `out` writable.
 */
enum lcs_status lcs_euler_residual(const struct LcsProblem *problem,
                                   const double *consumptions,
                                   uintptr_t len,
                                   double *out);

/**
 * Signed fractional budget gap of a candidate plan.
 *
 * # Safety
 * `consumptions` must point to `len` readable doubles; `out` writable.
 */
enum lcs_status lcs_budget_residual(const struct LcsProblem *problem,
                                    const double *consumptions,
                                    uintptr_t len,
                                    double *out);

/**
 * Both saving-rate definitions for a two-period plan (c1, c2).
 *
 * # Safety
 * The two output pointers must be writable.
 */
enum lcs_status lcs_saving_rates(const struct LcsProblem *problem,
                                 double c1,
                                 double c2,
                                 double *out_wealth_inclusive,
                                 double *out_income_only);

/**
 * CRRA period utility.
 *
 * # Safety
 * `out` must be writable.
 */
enum lcs_status lcs_utility(double consumption, double sigma, double *out);

/**
 * Marginal utility c^(-sigma).
 *
 * # Safety
 * `out` must be writable.
 */
enum lcs_status lcs_marginal_utility(double consumption, double sigma, double *out);

/**
 * After-tax rate r(1 - tau); pass a negative tax rate for "no tax".
 *
 * # Safety
 * `out` must be writable.
 */
enum lcs_status lcs_effective_rate(double rate, double tax_rate, double *out);

/**
 * Static description of a status code.
 */
const char *lcs_status_message(enum lcs_status status);

/**
 * Library version as a static C string.
 */
const char *lcs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIFECYCLE_SIM_H */
