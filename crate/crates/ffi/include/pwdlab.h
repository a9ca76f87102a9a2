#ifndef PWDLAB_H
#define PWDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum PwdStatus {
  PWD_STATUS_OK = 0,
  PWD_STATUS_NULL_POINTER = 1,
  PWD_STATUS_INVALID_UTF8 = 2,
  PWD_STATUS_INVALID_ARGUMENT = 3,
  PWD_STATUS_CONFIG = 4,
  PWD_STATUS_BUDGET_EXHAUSTED = 5,
  PWD_STATUS_FAILED = 6,
  PWD_STATUS_PANIC = 7,
} PwdStatus;

/**
 * The outcome of running a scenario. Opaque to C.
 */
typedef struct PwdReport PwdReport;

/**
 * A scenario description. Opaque to C.
 */
typedef struct PwdScenario PwdScenario;

/**
 * Labeler parameters: `a_i` is the chance of emitting label `i` on a
 * positive base label, `b_i` on a negative one. The guesses they were built
 * from ride along.
 */
typedef struct PwdLabParams {
  double a0;
  double a1;
  double b0;
  double b1;
  double xi;
  double p_hat;
  double q_hat;
} PwdLabParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *pwd_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pwd_string_free(char *s);

/**
 * Parses a scenario from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PwdStatus pwd_scenario_from_json(const char *json, struct PwdScenario **out_handle);

/**
 * Loads a scenario shipped with the library by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum PwdStatus pwd_scenario_bundled(const char *name, struct PwdScenario **out_handle);

/**
 * Overrides the trial count and master seed.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum PwdStatus pwd_scenario_configure(struct PwdScenario *scenario, size_t trials, uint64_t seed);

/**
 * # Safety
 * `scenario` must be null or a live handle; it is invalid afterwards.
 */
void pwd_scenario_free(struct PwdScenario *scenario);

/**
 * Runs every trial of a scenario.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum PwdStatus pwd_run(const struct PwdScenario *scenario, struct PwdReport **out_report);

/**
 * Trial count, success count and success fraction of a report.
 *
 * # Safety
 * `report` must be a live handle; the outputs must be writable.
 */
enum PwdStatus pwd_report_summary(const struct PwdReport *report,
                                  size_t *trials,
                                  size_t *successes,
                                  double *fraction);

/**
 * The report as CSV. Owned by the report; do not free.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *pwd_report_csv(const struct PwdReport *report);

/**
 * # Safety
 * `report` must be null or a live handle; it is invalid afterwards.
 */
void pwd_report_free(struct PwdReport *report);

/**
 * Labeler parameters for guesses `p_hat`, `q_hat` separated by at least `xi`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PwdStatus pwd_lab_parameters(double p_hat,
                                  double q_hat,
                                  double xi,
                                  struct PwdLabParams *out_params);

/**
 * Flip rates `(eta0, eta1)` the labeler induces when the true positive rates
 * are `p` and `q`.
 *
 * # Safety
 * `params` must be readable; the outputs must be writable.
 */
enum PwdStatus pwd_noise_rates(double p,
                               double q,
                               const struct PwdLabParams *params,
                               double *eta0,
                               double *eta1);

/**
 * `KL(P || Q)` in bits for two distributions given as JSON specs.
 *
 * # Safety
 * Both strings must be NUL-terminated; `out` must be writable.
 */
enum PwdStatus pwd_kl(const char *p_json, const char *q_json, double *out_bits);

/**
 * Runs a property suite (or `all`) and returns the results as a JSON string
 * to be released with [`pwd_string_free`]. `passed` is set to whether every
 * suite passed.
 *
 * # Safety
 * `suite` must be NUL-terminated; the outputs must be writable.
 */
enum PwdStatus pwd_verify(const char *suite, uint64_t seed, char **json_out, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PWDLAB_H */
