#ifndef OECT_H
#define OECT_H

/* Generated by cbindgen at build time; do not edit. */

#include <stdint.h>
#include <stddef.h>
#include <stdbool.h>

typedef enum OectStatus {
  OECT_STATUS_OK = 0,
  OECT_STATUS_NULL_POINTER = 1,
  OECT_STATUS_INVALID_ARGUMENT = 2,
  OECT_STATUS_NUMERICAL = 3,
  OECT_STATUS_PARSE = 4,
  OECT_STATUS_PANIC = 5,
} OectStatus;

/**
 * Toolkit configuration handle.
 */
typedef struct OectConfig OectConfig;

/**
 * Immutable device-state handle.
 */
typedef struct OectDevice OectDevice;

/**
 * `Rs + (Rp || Cp)` component values in ohm, ohm and farad.
 */
typedef struct OectCircuit {
  double rs;
  double rp;
  double cp;
} OectCircuit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after success.
 * The pointer stays valid until the next call into this library from the
 * same thread.
 */
const char *oect_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *oect_version(void);

/**
 * Bundled default configuration.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum OectStatus oect_config_default(struct OectConfig **out);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be valid for writing.
 */
enum OectStatus oect_config_from_toml(const char *toml, struct OectConfig **out);

/**
 * # Safety
 * `config` must be null or a handle from this library not yet freed.
 */
void oect_config_free(struct OectConfig *config);

/**
 * Pristine (spin-coated only) device from the configuration.
 *
 * # Safety
 * `config` must be a live handle; `out` must be valid for writing.
 */
enum OectStatus oect_device_pristine(const struct OectConfig *config, struct OectDevice **out);

/**
 * # Safety
 * `device` must be null or a handle from this library not yet freed.
 */
void oect_device_free(struct OectDevice *device);

/**
 * Total capacitance in farad.
 *
 * # Safety
 * `device` must be a live handle; `out` must be valid for writing.
 */
enum OectStatus oect_device_capacitance(const struct OectDevice *device, double *out);

/**
 * Drain current in ampere at (`vg`, `vd`); `vd` must be <= 0.
 *
 * # Safety
 * `device` must be a live handle; `out` must be valid for writing.
 */
enum OectStatus oect_device_drain_current(const struct OectDevice *device,
                                          double vg,
                                          double vd,
                                          double *out);

/**
 * Transconductance in siemens at (`vg`, `vd`).
 *
 * # Safety
 * `device` must be a live handle; `out` must be valid for writing.
 */
enum OectStatus oect_device_transconductance(const struct OectDevice *device,
                                             double vg,
                                             double vd,
                                             double *out);

/**
 * Peak transconductance over the configuration's gate sweep and drain bias.
 *
 * # Safety
 * Handles must be live; `out_gm` and `out_vg` must be valid for writing.
 */
enum OectStatus oect_device_peak_gm(const struct OectDevice *device,
                                    const struct OectConfig *config,
                                    double *out_gm,
                                    double *out_vg);

/**
 * One electropolymerization step. Thickness noise is drawn from the stream
 * identified by (`seed`, `device_index`, `step`). The input handle is left
 * untouched; the grown device is returned as a new handle.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writing.
 */
enum OectStatus oect_device_apply_ep_step(const struct OectDevice *device,
                                          const struct OectConfig *config,
                                          double potential_v,
                                          double duration_s,
                                          uint64_t seed,
                                          uint64_t device_index,
                                          uint64_t step,
                                          struct OectDevice **out);

/**
 * Impedance of `circuit` at `n` frequencies (Hz), written to `out_re` and
 * `out_im` (ohm).
 *
 * # Safety
 * All arrays must hold `n` elements.
 */
enum OectStatus oect_eis_simulate(struct OectCircuit circuit,
                                  const double *freqs_hz,
                                  uintptr_t n,
                                  double *out_re,
                                  double *out_im);

/**
 * Fits `Rs + (Rp || Cp)` to `n` impedance points. `guess` may be null.
 *
 * # Safety
 * Input arrays must hold `n` elements; `out` and `out_residual` must be
 * valid for writing.
 */
enum OectStatus oect_eis_fit(const double *freqs_hz,
                             const double *re_ohm,
                             const double *im_ohm,
                             uintptr_t n,
                             const struct OectCircuit *guess,
                             struct OectCircuit *out,
                             double *out_residual);

/**
 * Spike count of a pulse train through an RC stage with `tau = rs * cp`,
 * skipping the configured leading fraction of pulses.
 *
 * # Safety
 * `config` must be a live handle; `out` must be valid for writing.
 */
enum OectStatus oect_pulse_spike_count(const struct OectConfig *config,
                                       double rs_ohm,
                                       double cp_f,
                                       double frequency_hz,
                                       uintptr_t n_pulses,
                                       double threshold,
                                       uintptr_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OECT_H */
