#ifndef IONCAV_H
#define IONCAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IoncavStatus {
  IONCAV_STATUS_OK = 0,
  IONCAV_STATUS_NULL_POINTER = 1,
  IONCAV_STATUS_INVALID_UTF8 = 2,
  IONCAV_STATUS_CONFIG = 3,
  IONCAV_STATUS_VALIDATION = 4,
  IONCAV_STATUS_NUMERICAL = 5,
  IONCAV_STATUS_COMPARISON = 6,
  IONCAV_STATUS_IO = 7,
  IONCAV_STATUS_PANIC = 8,
} IoncavStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct IoncavConfig IoncavConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ioncav_last_error(void);

/**
 * Library version as a static string.
 */
const char *ioncav_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void ioncav_string_free(char *s);

/**
 * Cooperativity `g0² / (2 κ γ)`; rates in rad/s.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum IoncavStatus ioncav_cooperativity(double g0, double kappa, double gamma, double *out);

double ioncav_emission_probability(double c0);

/**
 * Fraction of cavity decay leaving through the high-transmission mirror;
 * inputs in ppm.
 */
double ioncav_mirror_outcoupling(double t_ht, double t_lt, double loss);

double ioncav_g_bar_from_observed(double g_obs);

/**
 * Cavity field decay rate (rad/s) from finesse and length (m).
 */
double ioncav_kappa_from_geometry(double finesse, double length);

double ioncav_absorption_chain(double c0,
                               double branching,
                               double clebsch,
                               double prep,
                               double incoupling,
                               double micromotion_reduction);

/**
 * Parse a JSON config document.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum IoncavStatus ioncav_config_from_json(const char *json, struct IoncavConfig **out);

/**
 * Config with every block at its default for the named experiment
 * (`"emit_histogram"`, `"g2"`, ...).
 *
 * # Safety
 * `experiment` must be a nul-terminated string and `out` a valid pointer.
 */
enum IoncavStatus ioncav_config_default(const char *experiment,
                                        uint64_t seed,
                                        struct IoncavConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library that was not freed.
 */
void ioncav_config_free(struct IoncavConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum IoncavStatus ioncav_config_set_seed(struct IoncavConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum IoncavStatus ioncav_config_set_trajectories(struct IoncavConfig *cfg, size_t n);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum IoncavStatus ioncav_config_validate(const struct IoncavConfig *cfg);

/**
 * Run the experiment, writing artifacts into `out_dir`. On success
 * `summary_json` receives the run summary (free with
 * [`ioncav_string_free`]); it may be null if not wanted.
 *
 * # Safety
 * `cfg` must be a live handle, `out_dir` a nul-terminated string and
 * `summary_json` null or a valid pointer.
 */
enum IoncavStatus ioncav_run(const struct IoncavConfig *cfg,
                             const char *out_dir,
                             char **summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONCAV_H */
