#ifndef SEAOBS_H
#define SEAOBS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SeaobsStatus {
  SEAOBS_STATUS_OK = 0,
  SEAOBS_STATUS_NULL_POINTER = 1,
  SEAOBS_STATUS_INVALID_UTF8 = 2,
  SEAOBS_STATUS_CONFIG = 3,
  SEAOBS_STATUS_NUMERICAL = 4,
  SEAOBS_STATUS_IO = 5,
  SEAOBS_STATUS_OUT_OF_RANGE = 6,
  SEAOBS_STATUS_PANIC = 7,
} SeaobsStatus;

/**
 * The trace and metrics of a finished run.
 */
typedef struct SeaobsRun SeaobsRun;

/**
 * A scenario configuration.
 */
typedef struct SeaobsScenario SeaobsScenario;

/**
 * One trace row.
 */
typedef struct SeaobsRecord {
  double t;
  double nu[3];
  double nu_measured[3];
  double nu_filtered[3];
  double eta[3];
  double tau_d[3];
  double tau_hat[3];
  double z[3];
} SeaobsRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a scenario with the reference parameters.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SeaobsStatus seaobs_scenario_default(struct SeaobsScenario **out);

/**
 * Parses a scenario from a JSON document; missing fields take reference values.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid writable storage.
 */
enum SeaobsStatus seaobs_scenario_from_json(const char *json, struct SeaobsScenario **out);

/**
 * Applies a `dotted.path=value` override.
 *
 * # Safety
 * `scenario` must be a live handle and `spec` a NUL-terminated string.
 */
enum SeaobsStatus seaobs_scenario_override(struct SeaobsScenario *scenario, const char *spec);

/**
 * Derives all random streams from one base seed.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum SeaobsStatus seaobs_scenario_set_seed(struct SeaobsScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void seaobs_scenario_free(struct SeaobsScenario *scenario);

/**
 * Simulates the scenario.
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid writable storage.
 */
enum SeaobsStatus seaobs_run(const struct SeaobsScenario *scenario, struct SeaobsRun **out);

/**
 * Number of trace records.
 *
 * # Safety
 * `run` must be a live handle and `len` valid writable storage.
 */
enum SeaobsStatus seaobs_run_len(const struct SeaobsRun *run, size_t *len);

/**
 * Copies record `index` into `record`.
 *
 * # Safety
 * `run` must be a live handle and `record` valid writable storage.
 */
enum SeaobsStatus seaobs_run_record(const struct SeaobsRun *run,
                                    size_t index,
                                    struct SeaobsRecord *record);

/**
 * Post-transient mean absolute relative error per channel. Channels whose
 * disturbance is identically zero are reported as NaN.
 *
 * # Safety
 * `run` must be a live handle and `out` must point to three writable doubles.
 */
enum SeaobsStatus seaobs_run_mean_relative_error(const struct SeaobsRun *run, double *out);

/**
 * Writes `trace.csv`, `metrics.json` and `manifest.json` into `dir`.
 *
 * # Safety
 * `run` must be a live handle and `dir` a NUL-terminated path.
 */
enum SeaobsStatus seaobs_run_write(const struct SeaobsRun *run, const char *dir);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void seaobs_run_free(struct SeaobsRun *run);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *seaobs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *seaobs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEAOBS_H */
