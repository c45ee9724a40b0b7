#ifndef BDARMA_H
#define BDARMA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define BDARMA_VARIANT_BASELINE 0

#define BDARMA_VARIANT_FIXED_EFFECT 1

#define BDARMA_VARIANT_INTERVENTION 2

/**
 * Result code of every fallible call.
 */
typedef enum BdarmaStatus {
  BDARMA_STATUS_OK = 0,
  BDARMA_STATUS_NULL_POINTER = 1,
  BDARMA_STATUS_INVALID_ARGUMENT = 2,
  BDARMA_STATUS_NUMERICAL = 3,
  BDARMA_STATUS_IO = 4,
  BDARMA_STATUS_INITIALIZATION = 5,
  BDARMA_STATUS_PANIC = 6,
} BdarmaStatus;

/**
 * Posterior draws returned by [`bdarma_model_sample`].
 */
typedef struct BdarmaDraws BdarmaDraws;

/**
 * A model bound to its data and covariates.
 */
typedef struct BdarmaModel BdarmaModel;

/**
 * Sampler settings; start from [`bdarma_sampler_options_default`].
 */
typedef struct BdarmaSamplerOptions {
  size_t chains;
  size_t warmup;
  size_t draws;
  uint64_t seed;
  double target_accept;
  size_t max_tree_depth;
} BdarmaSamplerOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bdarma_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `buf_len > 0`). Returns the full message
 * length plus one.
 *
 * # Safety
 * `buf` must be null or point to `buf_len` writable bytes.
 */
size_t bdarma_last_error(char *buf, size_t buf_len);

/**
 * Helmert ilr coordinates of a composition: `parts` inputs, `parts - 1`
 * outputs.
 *
 * # Safety
 * `y` must hold `parts` doubles and `out` room for `parts - 1`.
 */
enum BdarmaStatus bdarma_ilr(const double *y, size_t parts, double *out);

/**
 * Inverse Helmert ilr: `dim` coordinates to a composition of `dim + 1`
 * parts.
 *
 * # Safety
 * `z` must hold `dim` doubles and `out` room for `dim + 1`.
 */
enum BdarmaStatus bdarma_ilr_inv(const double *z, size_t dim, double *out);

/**
 * Aitchison distance between two compositions.
 *
 * # Safety
 * `x` and `y` must hold `parts` doubles; `out` must be writable.
 */
enum BdarmaStatus bdarma_aitchison_distance(const double *x,
                                            const double *y,
                                            size_t parts,
                                            double *out);

/**
 * Transition weight at time `t` for onset `tau`, speed `kappa` and last
 * pre-break index `ell`; zero for `t <= ell`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BdarmaStatus bdarma_gate(double t, double tau, double kappa, double ell, double *out);

/**
 * Dirichlet log density of `y` with concentrations `alpha`.
 *
 * # Safety
 * `y` and `alpha` must hold `parts` doubles; `out` must be writable.
 */
enum BdarmaStatus bdarma_dirichlet_log_pdf(const double *y,
                                           const double *alpha,
                                           size_t parts,
                                           double *out);

/**
 * Dirichlet log density of `y` at `lambda * mu`.
 *
 * # Safety
 * `mu` and `y` must hold `parts` doubles; `out` must be writable.
 */
enum BdarmaStatus bdarma_plugin_log_score(const double *mu,
                                          double lambda,
                                          const double *y,
                                          size_t parts,
                                          double *out);

/**
 * Energy score of `n_draws` predictive compositions (row-major,
 * `n_draws x parts`) against `y`. `plugin` selects the `1/M^2` pairwise
 * estimator instead of the unbiased one.
 *
 * # Safety
 * `draws` must hold `n_draws * parts` doubles, `y` `parts` doubles;
 * `out` must be writable.
 */
enum BdarmaStatus bdarma_energy_score(const double *draws,
                                      size_t n_draws,
                                      const double *y,
                                      size_t parts,
                                      bool plugin,
                                      double *out);

/**
 * Binds a model to data. `y` is `len x parts`, `x_mean` is
 * `len x k_mean` and `x_prec` is `len x k_prec` (include a column of ones
 * for the precision intercept). `break_index` is the last pre-break time
 * (1-based) and must be 0 for the baseline variant.
 *
 * # Safety
 * Array arguments must hold the stated number of doubles; `out` must be
 * writable. The returned handle is released with [`bdarma_model_free`].
 */
enum BdarmaStatus bdarma_model_new(uint32_t variant,
                                   size_t parts,
                                   size_t len,
                                   const double *y,
                                   size_t k_mean,
                                   const double *x_mean,
                                   size_t k_prec,
                                   const double *x_prec,
                                   size_t break_index,
                                   struct BdarmaModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`bdarma_model_new`] and not be used afterwards.
 */
void bdarma_model_free(struct BdarmaModel *model);

/**
 * Number of model parameters; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t bdarma_model_n_params(const struct BdarmaModel *model);

/**
 * Name of parameter `index` (for example `b[1]` or `Delta`), copied as
 * with [`bdarma_last_error`]. `required` receives the name length plus
 * one.
 *
 * # Safety
 * `model` must be a live handle, `buf` null or `buf_len` writable bytes,
 * `required` null or writable.
 */
enum BdarmaStatus bdarma_model_param_name(const struct BdarmaModel *model,
                                          size_t index,
                                          char *buf,
                                          size_t buf_len,
                                          size_t *required);

/**
 * Log posterior at constrained parameters given in parameter-name order.
 * Out-of-support values give `-inf`, not an error.
 *
 * # Safety
 * `params` must hold `n` doubles; `out` must be writable.
 */
enum BdarmaStatus bdarma_model_log_posterior(const struct BdarmaModel *model,
                                             const double *params,
                                             size_t n,
                                             double *out);

/**
 * Log density over unconstrained coordinates (Jacobian included) and its
 * gradient, the quantity the sampler explores.
 *
 * # Safety
 * `theta` and `grad` must hold `n` doubles; `out` must be writable.
 */
enum BdarmaStatus bdarma_model_log_density_grad(const struct BdarmaModel *model,
                                                const double *theta,
                                                size_t n,
                                                double *grad,
                                                double *out);

/**
 * Default sampler settings.
 */
struct BdarmaSamplerOptions bdarma_sampler_options_default(void);

/**
 * Samples the posterior. `options` may be null for the defaults.
 *
 * # Safety
 * `model` must be a live handle, `options` null or valid, `out`
 * writable. The result is released with [`bdarma_draws_free`].
 */
enum BdarmaStatus bdarma_model_sample(const struct BdarmaModel *model,
                                      const struct BdarmaSamplerOptions *options,
                                      struct BdarmaDraws **out);

/**
 * Releases draws; null is ignored.
 *
 * # Safety
 * `draws` must come from [`bdarma_model_sample`] and not be used
 * afterwards.
 */
void bdarma_draws_free(struct BdarmaDraws *draws);

/**
 * Number of rows (chains times draws) and parameters.
 *
 * # Safety
 * `draws` must be a live handle; `rows` and `cols` writable.
 */
enum BdarmaStatus bdarma_draws_shape(const struct BdarmaDraws *draws, size_t *rows, size_t *cols);

/**
 * Copies the draws row-major, chain-major, into `out` (`len` must equal
 * rows times cols).
 *
 * # Safety
 * `draws` must be a live handle and `out` hold `len` doubles.
 */
enum BdarmaStatus bdarma_draws_values(const struct BdarmaDraws *draws, double *out, size_t len);

/**
 * Copies the log posterior of every draw (`len` must equal rows).
 *
 * # Safety
 * `draws` must be a live handle and `out` hold `len` doubles.
 */
enum BdarmaStatus bdarma_draws_lp(const struct BdarmaDraws *draws, double *out, size_t len);

/**
 * Largest split R-hat (direction coordinates excluded) and the number of
 * divergent transitions.
 *
 * # Safety
 * `draws` must be a live handle; `max_rhat` and `divergences` writable.
 */
enum BdarmaStatus bdarma_draws_diagnostics(const struct BdarmaDraws *draws,
                                           double *max_rhat,
                                           size_t *divergences);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDARMA_H */
