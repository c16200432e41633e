#ifndef MRMC_H
#define MRMC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status code returned by every fallible function.
 */
typedef enum MrmcStatus {
  MRMC_STATUS_OK = 0,
  MRMC_STATUS_NULL_POINTER = 1,
  MRMC_STATUS_INVALID_ARGUMENT = 2,
  MRMC_STATUS_CONFIG = 3,
  MRMC_STATUS_NUMERICAL = 4,
  MRMC_STATUS_IO = 5,
  MRMC_STATUS_PANIC = 6,
  MRMC_STATUS_BUFFER_TOO_SMALL = 7,
} MrmcStatus;

/*
 Opaque scenario configuration.
 */
typedef struct MrmcConfig MrmcConfig;

/*
 Opaque result of one optimisation run.
 */
typedef struct MrmcResult MrmcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread, or NULL. The pointer
 stays valid until the next call into the library from the same thread.
 */
const char *mrmc_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mrmc_version(void);

/*
 New configuration holding the reference defaults. Free with
 [`mrmc_config_free`].
 */
struct MrmcConfig *mrmc_config_default(void);

/*
 Parse a configuration from TOML text.

 # Safety
 `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MrmcStatus mrmc_config_from_toml(const char *toml, struct MrmcConfig **out);

/*
 Set one key using config-file syntax, e.g. `("sigma2_si", "-30 dB")`.
 The configuration is unchanged on failure.

 # Safety
 `cfg` must come from this library; `key` and `value` must be
 NUL-terminated strings.
 */
enum MrmcStatus mrmc_config_set(struct MrmcConfig *cfg, const char *key, const char *value);

/*
 QoS thresholds (bits/s/Hz) implied by the configuration's SNRs.

 # Safety
 All pointers must be valid.
 */
enum MrmcStatus mrmc_qos_thresholds(const struct MrmcConfig *cfg, double *r_ul, double *r_dl);

/*
 # Safety
 `cfg` must come from this library (or be NULL) and not be used afterwards.
 */
void mrmc_config_free(struct MrmcConfig *cfg);

/*
 Draw channels from `seed` and run the joint design.

 # Safety
 `cfg` must come from this library and `out` must be valid. Free the
 result with [`mrmc_result_free`].
 */
enum MrmcStatus mrmc_run(const struct MrmcConfig *cfg, uint64_t seed, struct MrmcResult **out);

/*
 Final I_CWSM, or NaN for a NULL handle.

 # Safety
 `res` must come from [`mrmc_run`] or be NULL.
 */
double mrmc_result_i_cwsm(const struct MrmcResult *res);

/*
 Final I_FD, or NaN for a NULL handle.

 # Safety
 `res` must come from [`mrmc_run`] or be NULL.
 */
double mrmc_result_i_fd(const struct MrmcResult *res);

/*
 Outer iterations executed, or 0 for a NULL handle.

 # Safety
 `res` must come from [`mrmc_run`] or be NULL.
 */
size_t mrmc_result_iterations(const struct MrmcResult *res);

/*
 Copy the per-iteration I_CWSM trace into `buf`. `len` is the buffer
 capacity on input and the trace length on output; a short buffer yields
 `BufferTooSmall` with `len` set to the required size.

 # Safety
 `buf` must hold `*len` doubles (it may be NULL when `*len` is 0).
 */
enum MrmcStatus mrmc_result_trace(const struct MrmcResult *res, double *buf, size_t *len);

/*
 Copy the `K x M_r` radar code matrix, column-major, as separate real
 and imaginary arrays of `len = K * M_r` entries.

 # Safety
 `re` and `im` must each hold `len` doubles.
 */
enum MrmcStatus mrmc_result_code(const struct MrmcResult *res, double *re, double *im, size_t len);

/*
 # Safety
 `res` must come from [`mrmc_run`] (or be NULL) and not be used afterwards.
 */
void mrmc_result_free(struct MrmcResult *res);

/*
 Nearest vector with energy `p_r` and peak-to-average ratio at most
 `gamma` (linear). Input and output arrays may alias.

 # Safety
 All four arrays must hold `len` doubles.
 */
enum MrmcStatus mrmc_par_project(const double *re,
                                 const double *im,
                                 size_t len,
                                 double p_r,
                                 double gamma,
                                 double *out_re,
                                 double *out_im);

/*
 Run the built-in oracle suite and report how many checks passed and
 failed. Returns `Ok` even when checks fail; inspect `failed`.

 # Safety
 Both pointers must be valid.
 */
enum MrmcStatus mrmc_verify(uint64_t seed, size_t *passed, size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRMC_H */
