/* C interface for the starksense chain-sensing toolkit. */

#ifndef STARKSENSE_H
#define STARKSENSE_H

/* Generated by cbindgen from the starksense-capi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum StarksenseStatus {
  STARKSENSE_STATUS_OK = 0,
  STARKSENSE_STATUS_NULL_POINTER = 1,
  STARKSENSE_STATUS_INVALID_ARGUMENT = 2,
  STARKSENSE_STATUS_INVALID_DIMENSION = 3,
  STARKSENSE_STATUS_PATTERN_NOT_FOUND = 4,
  STARKSENSE_STATUS_SINGULAR_READOUT = 5,
  STARKSENSE_STATUS_DEGENERATE_POSTERIOR = 6,
  STARKSENSE_STATUS_NON_CONVERGENCE = 7,
  STARKSENSE_STATUS_INTERNAL = 8,
} StarksenseStatus;

/**
 * Opaque probe handle: chain geometry, initial pattern, and the outcome
 * basis dimension are fixed at construction.
 */
typedef struct StarksenseProbe StarksenseProbe;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Toolkit version as a NUL-terminated static string.
 */
const char *starksense_version(void);

/**
 * Create a probe. `initial_sites` lists the 1-based occupied sites
 * (`initial_len` of them, equal to `excitations`). On success writes a heap
 * handle to `out`; release it with `starksense_probe_free`.
 *
 * # Safety
 * `initial_sites` must point to `initial_len` readable `u32`s (or be NULL
 * with `initial_len == 0`); `out` must be a valid, writable pointer.
 */
enum StarksenseStatus starksense_probe_new(uint32_t sites,
                                           uint32_t excitations,
                                           double hopping_mhz,
                                           const uint32_t *initial_sites,
                                           size_t initial_len,
                                           struct StarksenseProbe **out);

/**
 * Release a probe handle. NULL is a no-op.
 *
 * # Safety
 * `probe` must be NULL or a handle from `starksense_probe_new` that has not
 * already been freed.
 */
void starksense_probe_free(struct StarksenseProbe *probe);

/**
 * Number of measurement outcomes (the subspace dimension).
 *
 * # Safety
 * `probe` must be a live handle; `out` must be valid and writable.
 */
enum StarksenseStatus starksense_probe_dim(const struct StarksenseProbe *probe, size_t *out);

/**
 * Closed-system outcome distribution at (gradient, t). `out` must hold
 * `starksense_probe_dim` doubles.
 *
 * # Safety
 * `probe` must be a live handle; `out` must point to `out_len` writable
 * doubles.
 */
enum StarksenseStatus starksense_probe_distribution(const struct StarksenseProbe *probe,
                                                    double gradient_mhz,
                                                    double t_ns,
                                                    double *out,
                                                    size_t out_len);

/**
 * Per-site occupancy at (gradient, t). `out` must hold `sites` doubles.
 *
 * # Safety
 * `probe` must be a live handle; `out` must point to `out_len` writable
 * doubles.
 */
enum StarksenseStatus starksense_probe_site_populations(const struct StarksenseProbe *probe,
                                                        double gradient_mhz,
                                                        double t_ns,
                                                        double *out,
                                                        size_t out_len);

/**
 * Quantum (`out_qfi`) and computational-basis classical (`out_cfi`) Fisher
 * information in MHz^-2 at (gradient, t). Either output may be NULL.
 *
 * # Safety
 * `probe` must be a live handle; each non-NULL output must be writable.
 */
enum StarksenseStatus starksense_probe_fisher(const struct StarksenseProbe *probe,
                                              double gradient_mhz,
                                              double t_ns,
                                              double *out_qfi,
                                              double *out_cfi);

/**
 * Repeated multi-time Bayesian estimation of the gradient. Shots are split
 * equally over `times_ns`; the posterior grid spans [grid_min, grid_max]
 * with `grid_step`. Writes the mean MAP estimate and its SD over
 * `repetitions` seeded trials.
 *
 * # Safety
 * `probe` must be a live handle; `times_ns` must point to `n_times` readable
 * doubles; `out_mean` and `out_sd` must be valid and writable.
 */
enum StarksenseStatus starksense_probe_estimate(const struct StarksenseProbe *probe,
                                                double true_gradient_mhz,
                                                const double *times_ns,
                                                size_t n_times,
                                                uint64_t total_shots,
                                                double grid_min,
                                                double grid_max,
                                                double grid_step,
                                                uint64_t repetitions,
                                                uint64_t seed,
                                                double *out_mean,
                                                double *out_sd);

/**
 * Bhattacharyya coefficient between two length-`len` distributions.
 *
 * # Safety
 * `p` and `q` must each point to `len` readable doubles; `out` must be valid
 * and writable.
 */
enum StarksenseStatus starksense_walk_fidelity(const double *p,
                                               const double *q,
                                               size_t len,
                                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STARKSENSE_H */
