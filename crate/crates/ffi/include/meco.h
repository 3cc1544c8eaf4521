#ifndef MECO_H
#define MECO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MecoPolicy {
  MECO_POLICY_P2_OPTIMAL = 0,
  MECO_POLICY_P1_OPTIMAL = 1,
  MECO_POLICY_SUBOPTIMAL = 2,
  MECO_POLICY_BASELINE = 3,
} MecoPolicy;

typedef enum MecoStatus {
  MECO_STATUS_OK = 0,
  MECO_STATUS_NULL_POINTER = 1,
  MECO_STATUS_INFEASIBLE = 2,
  MECO_STATUS_PARSE = 3,
  MECO_STATUS_NUMERIC = 4,
  MECO_STATUS_INVALID_INPUT = 5,
  MECO_STATUS_DOMAIN = 6,
  MECO_STATUS_BUFFER_TOO_SMALL = 7,
  MECO_STATUS_IO = 8,
  MECO_STATUS_PANIC = 99,
} MecoStatus;

/**
 * Opaque solve report handle.
 */
typedef struct MecoReport MecoReport;

/**
 * Opaque scenario handle.
 */
typedef struct MecoScenario MecoScenario;

/**
 * System constants. A non-finite or non-positive `cloud_capacity` means
 * an unbounded cloud.
 */
typedef struct MecoSystem {
  double slot;
  double bandwidth;
  double noise;
  double cloud_capacity;
} MecoSystem;

typedef struct MecoUser {
  double beta;
  double cycles_per_bit;
  double energy_per_cycle;
  double h2;
  double data_bits;
  double cpu_speed;
} MecoUser;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * Valid until the next failing call on the same thread.
 */
const char *meco_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *meco_version(void);

/**
 * Builds a scenario from plain structs.
 *
 * # Safety
 * `users` must point to `n_users` readable elements; `out` must be writable.
 */
enum MecoStatus meco_scenario_new(struct MecoSystem system,
                                  const struct MecoUser *users,
                                  size_t n_users,
                                  struct MecoScenario **out);

/**
 * Parses a scenario JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MecoStatus meco_scenario_from_json(const char *json, struct MecoScenario **out);

/**
 * Draws a scenario from a generator-spec JSON document, or from the
 * desk preset if `spec_json` is null, with the given seed.
 *
 * # Safety
 * `spec_json` must be null or NUL-terminated; `out` must be writable.
 */
enum MecoStatus meco_scenario_generate(const char *spec_json,
                                       uint64_t seed,
                                       struct MecoScenario **out);

/**
 * Number of users, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t meco_scenario_len(const struct MecoScenario *s);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void meco_scenario_free(struct MecoScenario *s);

/**
 * Solves `s` with `policy`.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MecoStatus meco_solve(const struct MecoScenario *s,
                           enum MecoPolicy policy,
                           struct MecoReport **out);

/**
 * Weighted total energy in joules, or NaN for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
double meco_report_objective(const struct MecoReport *r);

/**
 * Writes the slot and cloud prices.
 *
 * # Safety
 * `r` must be a live handle; `lambda` and `mu` must be writable.
 */
enum MecoStatus meco_report_dual(const struct MecoReport *r, double *lambda, double *mu);

/**
 * Copies offloaded bits and slot times into caller buffers of `len`
 * elements each. `len` must be at least the number of users.
 *
 * # Safety
 * `ell` and `t` must be writable for `len` elements.
 */
enum MecoStatus meco_report_allocation(const struct MecoReport *r,
                                       double *ell,
                                       double *t,
                                       size_t len);

/**
 * The full report as JSON. Release with [`meco_string_free`].
 *
 * # Safety
 * `r` must be null or a live handle.
 */
char *meco_report_to_json(const struct MecoReport *r);

/**
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void meco_report_free(struct MecoReport *r);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void meco_string_free(char *s);

/**
 * Principal branch of the Lambert W function.
 *
 * # Safety
 * `out` must be writable.
 */
enum MecoStatus meco_lambert_w0(double z, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MECO_H */
