#ifndef DIFFPOST_H
#define DIFFPOST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpLikelihood {
  DP_LIKELIHOOD_TAU_OVER_LAMBDA = 0,
  DP_LIKELIHOOD_TAU_SQ_OVER_LAMBDA = 1,
  DP_LIKELIHOOD_MATCHED = 2,
} DpLikelihood;

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_ARGUMENT = 2,
  DP_STATUS_SHAPE_MISMATCH = 3,
  DP_STATUS_DIVERGED = 4,
  DP_STATUS_IO = 5,
  DP_STATUS_FORMAT = 6,
  DP_STATUS_CONFIG = 7,
  DP_STATUS_PANIC = 8,
  DP_STATUS_OTHER = 9,
} DpStatus;

typedef struct DpOperator DpOperator;

typedef struct DpPrior DpPrior;

typedef struct DpSamples DpSamples;

typedef struct DpSchedule DpSchedule;

/**
 * Sampler parameters; start from `dp_sampler_config_default`.
 */
typedef struct DpSamplerConfig {
  size_t steps_per_scale;
  size_t start_index;
  double lambda;
  size_t n_chains;
  size_t split_index;
  bool deterministic;
  uint64_t seed;
  size_t extended_iters;
  enum DpLikelihood likelihood;
  /**
   * Only read for `Matched`.
   */
  double noise_var;
  double divergence_limit;
  /**
   * 1 = sequential, 0 = one thread per core.
   */
  size_t threads;
} DpSamplerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dp_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when no error has been recorded.
 */
size_t dp_last_error_message(char *buf, size_t len);

void dp_clear_error(void);

enum DpStatus dp_schedule_geometric(double sigma_min,
                                    double sigma_max,
                                    size_t n,
                                    struct DpSchedule **out);

/**
 * Schedule from explicit σ_1 < … < σ_N.
 */
enum DpStatus dp_schedule_from_sigmas(const double *sigmas, size_t n, struct DpSchedule **out);

enum DpStatus dp_schedule_len(const struct DpSchedule *schedule, size_t *out);

/**
 * σ_i for 0 ≤ i ≤ N (σ_0 = 0).
 */
enum DpStatus dp_schedule_sigma(const struct DpSchedule *schedule, size_t i, double *out);

void dp_schedule_free(struct DpSchedule *schedule);

/**
 * Fills `grid` (height·width bytes, 1 = acquired) with a variable-density mask.
 */
enum DpStatus dp_mask_variable_density(size_t height,
                                       size_t width,
                                       double fraction,
                                       size_t center,
                                       double exponent,
                                       double min_distance,
                                       uint64_t seed,
                                       uint8_t *grid);

/**
 * Operator P·F·S for a k-space `mask` (height·width bytes, nonzero = acquired)
 * and `coils` synthetic coil maps (1 = single unit coil).
 */
enum DpStatus dp_operator_new(size_t height,
                              size_t width,
                              const uint8_t *mask,
                              size_t coils,
                              struct DpOperator **out);

/**
 * Number of complex measurements produced by the operator.
 */
enum DpStatus dp_operator_measurement_len(const struct DpOperator *op, size_t *out);

/**
 * y = A x. `x` holds height·width complex values, `y` measurement_len.
 */
enum DpStatus dp_operator_apply(const struct DpOperator *op, const double *x, double *y);

/**
 * x = Aᴴ y.
 */
enum DpStatus dp_operator_adjoint(const struct DpOperator *op, const double *y, double *x);

/**
 * y = A x + η with η ~ CN(0, noise_sd²), reproducible in `seed`.
 */
enum DpStatus dp_operator_simulate(const struct DpOperator *op,
                                   const double *x,
                                   double noise_sd,
                                   uint64_t seed,
                                   double *y);

void dp_operator_free(struct DpOperator *op);

/**
 * Independent CN(mean_p, variance_p) per pixel.
 */
enum DpStatus dp_prior_gaussian(size_t height,
                                size_t width,
                                const double *mean,
                                const double *variance,
                                struct DpPrior **out);

/**
 * Gaussian mixture from its TOML file.
 */
enum DpStatus dp_prior_gmm_load(const char *file, struct DpPrior **out);

/**
 * Trained score network; `schedule` must be the one it was trained on.
 */
enum DpStatus dp_prior_checkpoint_load(const char *file,
                                       const struct DpSchedule *schedule,
                                       struct DpPrior **out);

/**
 * s(x, index) into `out` (height·width complex values).
 */
enum DpStatus dp_prior_score(const struct DpPrior *prior,
                             const struct DpSchedule *schedule,
                             size_t height,
                             size_t width,
                             const double *x,
                             size_t index,
                             double *out);

void dp_prior_free(struct DpPrior *prior);

struct DpSamplerConfig dp_sampler_config_default(void);

/**
 * Annealed Langevin posterior sampling; `y` holds measurement_len complex values.
 */
enum DpStatus dp_sample(const struct DpSchedule *schedule,
                        const struct DpPrior *prior,
                        const struct DpOperator *op,
                        const double *y,
                        const struct DpSamplerConfig *config,
                        struct DpSamples **out);

/**
 * Noise-free MAP path; `config.deterministic` must be set. Writes height·width complex values.
 */
enum DpStatus dp_map(const struct DpSchedule *schedule,
                     const struct DpPrior *prior,
                     const struct DpOperator *op,
                     const double *y,
                     const struct DpSamplerConfig *config,
                     double *x);

enum DpStatus dp_samples_count(const struct DpSamples *samples, size_t *out);

enum DpStatus dp_samples_shape(const struct DpSamples *samples, size_t *height, size_t *width);

/**
 * Sample `k` as height·width complex values.
 */
enum DpStatus dp_samples_get(const struct DpSamples *samples, size_t k, double *x);

/**
 * Sample mean (MMSE estimate) as height·width complex values.
 */
enum DpStatus dp_samples_mmse(const struct DpSamples *samples, double *x);

/**
 * Per-pixel sample variance of the magnitudes (height·width doubles).
 */
enum DpStatus dp_samples_variance(const struct DpSamples *samples, double *out);

void dp_samples_free(struct DpSamples *samples);

/**
 * PSNR in dB of `x` against `reference` (normalized magnitudes, peak of the reference).
 */
enum DpStatus dp_psnr(size_t height,
                      size_t width,
                      const double *x,
                      const double *reference,
                      double *out);

/**
 * SSIM of `x` against `reference` (needs at least 7×7 pixels).
 */
enum DpStatus dp_ssim(size_t height,
                      size_t width,
                      const double *x,
                      const double *reference,
                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFPOST_H */
