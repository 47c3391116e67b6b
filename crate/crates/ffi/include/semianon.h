#ifndef SEMIANON_H
#define SEMIANON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Values accepted by the `dynamic` parameters.
typedef enum SemianonDynamic {
  // Population-local clocks (rate `alpha n / z` within the population).
  SEMIANON_DYNAMIC_MODIFIED = 0,
  // Standard log-linear learning (every agent at rate 1).
  SEMIANON_DYNAMIC_STANDARD = 1,
  // Clocks divided by the cross-population count at the resource.
  SEMIANON_DYNAMIC_PRIOR = 2,
} SemianonDynamic;

// Result of every fallible call.
typedef enum SemianonStatus {
  SEMIANON_STATUS_OK = 0,
  SEMIANON_STATUS_NULL_POINTER = 1,
  // Bad argument, game or state.
  SEMIANON_STATUS_INVALID_ARGUMENT = 2,
  // Scenario text could not be parsed or validated.
  SEMIANON_STATUS_CONFIG = 3,
  // State space or series truncation above its cap.
  SEMIANON_STATUS_TOO_LARGE = 4,
  // Iteration did not converge or a target is unreachable.
  SEMIANON_STATUS_NUMERICAL = 5,
  // The output buffer is shorter than required; the needed length is
  // still written where the call has a length out-pointer.
  SEMIANON_STATUS_BUFFER_TOO_SMALL = 6,
  // A Rust panic was caught at the boundary.
  SEMIANON_STATUS_PANIC = 7,
} SemianonStatus;

// Opaque game handle.
typedef struct SemianonGame SemianonGame;

// Opaque kernel handle; owns its state space.
typedef struct SemianonKernel SemianonKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static nul-terminated string.
const char *semianon_version(void);

// Message of the last failing call on this thread (empty if none). The
// pointer stays valid until the next failing call on the same thread.
const char *semianon_last_error(void);

// Build the game described by a scenario (TOML text). An unset `beta` in
// the scenario means zero.
//
// # Safety
// `toml` must be a nul-terminated string and `game` a valid out-pointer.
enum SemianonStatus semianon_game_from_scenario(const char *toml, struct SemianonGame **game);

// The three-population congestion game: populations of `n1`, `n2`, `n3`
// agents, the third contributing no welfare.
//
// # Safety
// `game` must be a valid out-pointer.
enum SemianonStatus semianon_game_congestion3(uint32_t n1,
                                              uint32_t n2,
                                              uint32_t n3,
                                              double alpha,
                                              double beta,
                                              struct SemianonGame **game);

// Copy of `game` at another rationality.
//
// # Safety
// `game` must be a live handle and `result` a valid out-pointer.
enum SemianonStatus semianon_game_with_beta(const struct SemianonGame *game,
                                            double beta,
                                            struct SemianonGame **result);

// Total agents, populations and the game's rationality.
//
// # Safety
// `game` must be a live handle; any out-pointer may be null to skip it.
enum SemianonStatus semianon_game_info(const struct SemianonGame *game,
                                       uint32_t *agents,
                                       size_t *populations,
                                       double *beta);

// Release a game; null is ignored.
//
// # Safety
// `game` must come from this library and not be used afterwards.
void semianon_game_free(struct SemianonGame *game);

// Smallest rationality whose stationary expected potential reaches
// `fraction` of the maximum under `dynamic`.
//
// # Safety
// `game` must be a live handle and `beta` a valid out-pointer.
enum SemianonStatus semianon_calibrate_beta(const struct SemianonGame *game,
                                            int32_t dynamic,
                                            double fraction,
                                            double *beta);

// Rationality sufficient for expected potential within `eps` of the
// maximum, for `m` populations, `s` actions and Lipschitz constant `lambda`.
//
// # Safety
// `beta` must be a valid out-pointer.
enum SemianonStatus semianon_beta_lower_bound(size_t m,
                                              size_t s,
                                              double lambda,
                                              double eps,
                                              double *beta);

// Enumerate the game's states and build its one-step kernel.
//
// # Safety
// `game` must be a live handle and `kernel` a valid out-pointer.
enum SemianonStatus semianon_kernel_build(const struct SemianonGame *game,
                                          int32_t dynamic,
                                          struct SemianonKernel **kernel);

// Release a kernel; null is ignored.
//
// # Safety
// `kernel` must come from this library and not be used afterwards.
void semianon_kernel_free(struct SemianonKernel *kernel);

// Number of states, and the clock rate converting uniformized ticks to time.
//
// # Safety
// `kernel` must be a live handle; out-pointers may be null to skip them.
enum SemianonStatus semianon_kernel_info(const struct SemianonKernel *kernel,
                                         size_t *states,
                                         double *global_rate);

// One-step transition probability between state indices.
//
// # Safety
// `kernel` must be a live handle and `value` a valid out-pointer.
enum SemianonStatus semianon_kernel_entry(const struct SemianonKernel *kernel,
                                          size_t from,
                                          size_t to,
                                          double *value);

// Potential of every state, in state order.
//
// # Safety
// `kernel` must be a live handle and `values` hold `len` doubles.
enum SemianonStatus semianon_kernel_potentials(const struct SemianonKernel *kernel,
                                               double *values,
                                               size_t len);

// Flat action counts of state `index` (population-major) into `counts`;
// `needed` receives the count length.
//
// # Safety
// `kernel` must be a live handle, `counts` hold `len` values and `needed`
// be null or a valid out-pointer.
enum SemianonStatus semianon_kernel_state(const struct SemianonKernel *kernel,
                                          size_t index,
                                          uint32_t *counts,
                                          size_t len,
                                          size_t *needed);

// Stationary distribution: closed form for the modified and standard
// dynamics, a numerical solve for the prior one.
//
// # Safety
// `kernel` must be a live handle and `probs` hold `len` doubles.
enum SemianonStatus semianon_kernel_stationary(const struct SemianonKernel *kernel,
                                               double *probs,
                                               size_t len);

// Distribution after `ticks` uniformized clock ticks from `initial`
// (continuous time `ticks / global_rate`). `initial` and `result` both
// hold `len` doubles, which must equal the state count; they may alias.
//
// # Safety
// `kernel` must be a live handle and both arrays hold `len` doubles.
enum SemianonStatus semianon_kernel_evolve(const struct SemianonKernel *kernel,
                                           const double *initial,
                                           double ticks,
                                           double *result,
                                           size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMIANON_H */
