#ifndef TRIALMON_H
#define TRIALMON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrialmonStatus {
  TRIALMON_STATUS_OK = 0,
  TRIALMON_STATUS_NULL_POINTER = 1,
  TRIALMON_STATUS_INVALID_ARGUMENT = 2,
  TRIALMON_STATUS_UNREACHABLE = 3,
  TRIALMON_STATUS_NO_SOLUTION = 4,
  TRIALMON_STATUS_NUMERICAL = 5,
  TRIALMON_STATUS_BUFFER_TOO_SMALL = 6,
  TRIALMON_STATUS_PANIC = 99,
} TrialmonStatus;

/**
 * A trial design together with its recruitment schedule.
 */
typedef struct TrialmonDesign TrialmonDesign;

/**
 * A stopping rule with its boundary table cached up to `max_n`.
 */
typedef struct TrialmonRule TrialmonRule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *trialmon_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *trialmon_version(void);

/**
 * Regularised incomplete beta function `I_x(a, b)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TrialmonStatus trialmon_reg_inc_beta(double a, double b, double x, double *out);

/**
 * Creates a rule and caches its boundary for group sizes up to `max_n`.
 *
 * # Safety
 * `out` must be valid for writes. Release the handle with [`trialmon_rule_free`].
 */
enum TrialmonStatus trialmon_rule_new(double cure_threshold,
                                      double posterior_prob_threshold,
                                      double prior_a,
                                      double prior_b,
                                      uint32_t max_n,
                                      struct TrialmonRule **out);

/**
 * The default rule: beta(4.5, 0.5) prior, stop when Pr(cure < 0.9) > 0.95.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TrialmonStatus trialmon_rule_default(uint32_t max_n, struct TrialmonRule **out);

/**
 * # Safety
 * `rule` must come from this library and not be used afterwards. Null is ignored.
 */
void trialmon_rule_free(struct TrialmonRule *rule);

/**
 * Largest group size cached in the rule.
 *
 * # Safety
 * `rule` and `out` must be valid.
 */
enum TrialmonStatus trialmon_rule_max_n(const struct TrialmonRule *rule, uint32_t *out);

/**
 * Posterior probability that the cure rate is below the threshold and
 * whether the group stops.
 *
 * # Safety
 * `rule`, `out_stop` and `out_prob` must be valid.
 */
enum TrialmonStatus trialmon_should_stop(const struct TrialmonRule *rule,
                                         uint32_t analysed,
                                         uint32_t failures,
                                         bool *out_stop,
                                         double *out_prob);

/**
 * Minimum failures to stop for `n = 1..=len`, written to `out[n - 1]`;
 * -1 where no number of failures stops the group.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum TrialmonStatus trialmon_boundary(const struct TrialmonRule *rule, int32_t *out, size_t len);

/**
 * Probability of stopping at `n` when the true cure rate is `true_cure`.
 *
 * # Safety
 * `rule` and `out` must be valid.
 */
enum TrialmonStatus trialmon_stop_prob(const struct TrialmonRule *rule,
                                       uint32_t n,
                                       double true_cure,
                                       double *out);

/**
 * Stop probability at `n` averaged uniformly over cure rates in `[lower, upper]`.
 *
 * # Safety
 * `rule` and `out` must be valid.
 */
enum TrialmonStatus trialmon_avg_stop_prob(const struct TrialmonRule *rule,
                                           uint32_t n,
                                           double lower,
                                           double upper,
                                           double *out);

/**
 * Probability, given the current data, that the rule is met once `total_n`
 * patients have outcomes.
 *
 * # Safety
 * `rule` and `out` must be valid.
 */
enum TrialmonStatus trialmon_predictive_stop_prob(const struct TrialmonRule *rule,
                                                  uint32_t analysed,
                                                  uint32_t failures,
                                                  uint32_t total_n,
                                                  double *out);

/**
 * Beta prior with the given mean and `Pr(p < threshold) = tail_prob`.
 *
 * # Safety
 * `out_a` and `out_b` must be valid.
 */
enum TrialmonStatus trialmon_elicit_beta(double mean,
                                         double threshold,
                                         double tail_prob,
                                         double *out_a,
                                         double *out_b);

/**
 * Single-group sample size after loss-to-follow-up inflation.
 *
 * # Safety
 * `out` must be valid.
 */
enum TrialmonStatus trialmon_sample_size(double target,
                                         double unacceptable,
                                         double power,
                                         double alpha,
                                         double ltfu,
                                         uint64_t *out);

/**
 * The default design and recruitment schedule.
 *
 * # Safety
 * `out` must be valid. Release with [`trialmon_design_free`].
 */
enum TrialmonStatus trialmon_design_default(struct TrialmonDesign **out);

/**
 * # Safety
 * `design` must come from this library and not be used afterwards. Null is ignored.
 */
void trialmon_design_free(struct TrialmonDesign *design);

/**
 * Number of strategies (control included).
 *
 * # Safety
 * `design` and `out` must be valid.
 */
enum TrialmonStatus trialmon_design_strategy_count(const struct TrialmonDesign *design,
                                                   size_t *out);

/**
 * Projected patients per group with outcome data at `month`, one entry per
 * strategy, plus the trial total.
 *
 * # Safety
 * `counts` must be valid for `len` writes and `out_total` for one.
 */
enum TrialmonStatus trialmon_design_project(const struct TrialmonDesign *design,
                                            double month,
                                            uint32_t *counts,
                                            size_t len,
                                            uint32_t *out_total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIALMON_H */
