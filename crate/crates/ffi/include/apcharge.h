#ifndef APCHARGE_H
#define APCHARGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum ApcStatus {
  APC_STATUS_OK = 0,
  APC_STATUS_NULL_POINTER = 1,
  APC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad configuration value or unparsable TOML.
   */
  APC_STATUS_CONFIG = 3,
  APC_STATUS_IO = 4,
  /**
   * Simulation or training failure.
   */
  APC_STATUS_RUNTIME = 5,
  APC_STATUS_PANIC = 6,
  /**
   * Output buffer too small; the required size was still reported.
   */
  APC_STATUS_BUFFER_TOO_SMALL = 7,
} ApcStatus;

typedef enum ApcAgent {
  APC_AGENT_DQN = 0,
  APC_AGENT_TRL = 1,
  APC_AGENT_MPC = 2,
  APC_AGENT_GREEDY = 3,
  APC_AGENT_RANDOM = 4,
  APC_AGENT_NO_POLICY = 5,
} ApcAgent;

/**
 * Simulation configuration.
 */
typedef struct ApcConfig ApcConfig;

/**
 * One seeded environment.
 */
typedef struct ApcEnv ApcEnv;

/**
 * A controller bound to the environment it was created for.
 */
typedef struct ApcPolicy ApcPolicy;

/**
 * Start-of-slot view of the access point. `last_arrival` is NaN before the first slot.
 */
typedef struct ApcObservation {
  uint64_t slot;
  size_t user;
  double user_gain;
  double battery;
  double last_arrival;
  size_t device_count;
} ApcObservation;

typedef struct ApcSlotOutcome {
  uint64_t slot;
  /**
   * Executed power, mW.
   */
  double power;
  /**
   * Served user's rate, bit/s.
   */
  double rate;
  /**
   * 1/W; zero unless both user types are satisfied.
   */
  double efficiency;
  /**
   * Energy harvested by the panel, mJ.
   */
  double arrival;
  size_t activated;
  bool all_devices;
  bool user_satisfied;
} ApcSlotOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *apc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns its full length. Returns 0 when
 * the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t apc_last_error_message(char *buf, size_t len);

/**
 * Built-in defaults.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ApcStatus apc_config_new_default(struct ApcConfig **out);

/**
 * Parses and validates TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ApcStatus apc_config_from_toml(const char *toml, struct ApcConfig **out);

/**
 * Reads, parses and validates a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ApcStatus apc_config_load(const char *path, struct ApcConfig **out);

/**
 * Serialises the configuration with every default filled in.
 * Call with a null `buf` to learn the size via `needed`.
 *
 * # Safety
 * `config` must come from this library; `buf` null or `len` writable bytes;
 * `needed` null or valid.
 */
enum ApcStatus apc_config_to_toml(const struct ApcConfig *config,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

/**
 * Replaces the configured seed list with `count` seeds.
 *
 * # Safety
 * `config` must come from this library; `seeds` must point to `count` values.
 */
enum ApcStatus apc_config_set_seeds(struct ApcConfig *config, const uint64_t *seeds, size_t count);

/**
 * # Safety
 * `config` must be null or come from this library and not be used afterwards.
 */
void apc_config_free(struct ApcConfig *config);

/**
 * Environment for `seed` under the configuration's scenario and physics.
 *
 * # Safety
 * `config` must come from this library; `out` must be valid.
 */
enum ApcStatus apc_env_new(const struct ApcConfig *config, uint64_t seed, struct ApcEnv **out);

/**
 * # Safety
 * `env` and `out` must be valid.
 */
enum ApcStatus apc_env_observe(const struct ApcEnv *env, struct ApcObservation *out);

/**
 * Copies the true device battery levels (mJ). `count` receives the number
 * of devices; a short buffer yields `APC_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `env` valid; `buf` null or `len` writable values; `count` null or valid.
 */
enum ApcStatus apc_env_device_batteries(const struct ApcEnv *env,
                                        double *buf,
                                        size_t len,
                                        size_t *count);

/**
 * Advances one slot with `power` mW (clamped to the battery and `P_max`).
 *
 * # Safety
 * `env` must be valid; `out` null or valid.
 */
enum ApcStatus apc_env_step(struct ApcEnv *env, double power, struct ApcSlotOutcome *out);

/**
 * # Safety
 * `env` must be null or come from this library and not be used afterwards.
 */
void apc_env_free(struct ApcEnv *env);

/**
 * Builds `agent` for the network inside `env`, seeded with `seed`.
 *
 * # Safety
 * `config`, `env` and `out` must be valid.
 */
enum ApcStatus apc_policy_new(const struct ApcConfig *config,
                              const struct ApcEnv *env,
                              enum ApcAgent agent,
                              uint64_t seed,
                              struct ApcPolicy **out);

/**
 * Power the policy would spend in the environment's current slot, without stepping.
 *
 * # Safety
 * `policy`, `env` and `power` must be valid.
 */
enum ApcStatus apc_policy_decide(struct ApcPolicy *policy, const struct ApcEnv *env, double *power);

/**
 * One full slot: observe, decide, step, and feed the outcome back to the policy.
 *
 * # Safety
 * `policy` and `env` must be valid; `out` null or valid.
 */
enum ApcStatus apc_policy_step(struct ApcPolicy *policy,
                               struct ApcEnv *env,
                               struct ApcSlotOutcome *out);

/**
 * # Safety
 * `policy` must be null or come from this library and not be used afterwards.
 */
void apc_policy_free(struct ApcPolicy *policy);

/**
 * Runs the configured experiment with `workers` threads (0: all cores) and
 * writes `episodes.csv`, `summary.csv` and `summary.txt` into `output_dir`.
 *
 * # Safety
 * `config` valid; `output_dir` a NUL-terminated string.
 */
enum ApcStatus apc_run_experiment(const struct ApcConfig *config,
                                  const char *output_dir,
                                  size_t workers);

/**
 * Runs the configuration's `[sweep]` and writes the sweep CSVs into `output_dir`.
 *
 * # Safety
 * `config` valid; `output_dir` a NUL-terminated string.
 */
enum ApcStatus apc_run_sweep(const struct ApcConfig *config,
                             const char *output_dir,
                             size_t workers);

/**
 * Shannon rate (bit/s) for `power_mw`, linear gain, bandwidth (Hz) and noise (W).
 */
double apc_data_rate(double power_mw, double gain, double bandwidth, double noise_w);

/**
 * Power (mW) that just meets `rate_requirement`, capped by battery and `max_power`.
 */
double apc_no_policy_power(double user_gain,
                           double rate_requirement,
                           double bandwidth,
                           double noise_w,
                           double battery,
                           double max_power);

/**
 * `1000 / power_mw` (1/W) when both user types are satisfied, else 0.
 */
double apc_energy_efficiency(bool all_devices, bool user_satisfied, double power_mw);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APCHARGE_H */
