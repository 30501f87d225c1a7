#ifndef RMNP_H
#define RMNP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RmnpStatus {
  RMNP_STATUS_OK = 0,
  RMNP_STATUS_NULL_POINTER = 1,
  RMNP_STATUS_DIMENSION = 2,
  RMNP_STATUS_INVALID_ARGUMENT = 3,
  RMNP_STATUS_NUMERICAL = 4,
  RMNP_STATUS_PANIC = 5,
} RmnpStatus;

typedef enum RmnpOptimizerKind {
  RMNP_OPTIMIZER_KIND_RMNP = 0,
  RMNP_OPTIMIZER_KIND_MUON = 1,
  RMNP_OPTIMIZER_KIND_ADAM_W = 2,
  RMNP_OPTIMIZER_KIND_MOMENTUM_SGD = 3,
} RmnpOptimizerKind;

/**
 * Opaque dense row-major matrix.
 */
typedef struct RmnpMatrix RmnpMatrix;

/**
 * Opaque mixed-strategy optimizer.
 */
typedef struct RmnpOptimizer RmnpOptimizer;

typedef struct RmnpDominance {
  double r_avg;
  double r_min;
  double r_max;
  /**
   * Some ratio exceeded the cap and was clamped.
   */
  bool clamped;
  /**
   * Some row had zero diagonal and zero off-diagonal mass.
   */
  bool degenerate;
} RmnpDominance;

/**
 * Optimizer hyperparameters. Newton-Schulz coefficients are fixed to the
 * library defaults.
 */
typedef struct RmnpOptimizerConfig {
  enum RmnpOptimizerKind kind;
  double lr_matrix;
  double lr_adamw;
  double beta;
  double adamw_beta1;
  double adamw_beta2;
  double weight_decay;
  bool rms_scaling;
  double eps;
  double rn_eps;
} RmnpOptimizerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or an empty
 * string. The pointer stays valid until the next failing call on the same
 * thread.
 */
const char *rmnp_last_error(void);

/**
 * Creates a `rows`×`cols` matrix. `data` holds `rows*cols` row-major values,
 * or is null for a zero matrix.
 *
 * # Safety
 * `data` must be null or point to `rows*cols` readable doubles; `out` must
 * point to writable storage for one pointer.
 */
enum RmnpStatus rmnp_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct RmnpMatrix **out);

/**
 * Releases a matrix. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle from this library that has not been freed.
 */
void rmnp_matrix_free(struct RmnpMatrix *m);

/**
 * Row count, or 0 for null.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t rmnp_matrix_rows(const struct RmnpMatrix *m);

/**
 * Column count, or 0 for null.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t rmnp_matrix_cols(const struct RmnpMatrix *m);

/**
 * Copies the row-major entries into `buf`, which must hold exactly `len`
 * values.
 *
 * # Safety
 * `m` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum RmnpStatus rmnp_matrix_copy_data(const struct RmnpMatrix *m, double *buf, size_t len);

/**
 * Row-wise ℓ2 normalization into a new matrix. Rows with norm ≤ `eps` become zero.
 *
 * # Safety
 * `v` must be a live handle; `out` must point to writable storage.
 */
enum RmnpStatus rmnp_row_normalize(const struct RmnpMatrix *v, double eps, struct RmnpMatrix **out);

/**
 * Five-step Newton-Schulz orthogonalization into a new matrix.
 *
 * # Safety
 * `v` must be a live handle; `out` must point to writable storage.
 */
enum RmnpStatus rmnp_newton_schulz5(const struct RmnpMatrix *v, struct RmnpMatrix **out);

/**
 * Frobenius, (1,2) and (∞,2) norms. Any output pointer may be null.
 *
 * # Safety
 * `v` must be a live handle; non-null outputs must be writable.
 */
enum RmnpStatus rmnp_norms(const struct RmnpMatrix *v,
                           double *frobenius,
                           double *one_two,
                           double *inf_two);

/**
 * Diagonal-dominance summary of `v`'s row Gram matrix, with ratios above
 * `cap` clamped.
 *
 * # Safety
 * `v` must be a live handle; `out` must be writable.
 */
enum RmnpStatus rmnp_dominance(const struct RmnpMatrix *v, double cap, struct RmnpDominance *out);

/**
 * Library defaults for `kind`.
 */
struct RmnpOptimizerConfig rmnp_optimizer_config_default(enum RmnpOptimizerKind kind);

/**
 * Creates an optimizer over `count` parameters of shapes `rows[i]`×`cols[i]`.
 * Parameters with both dimensions above one use the matrix optimizer; the
 * rest use AdamW.
 *
 * # Safety
 * `config` must be readable; `rows` and `cols` must hold `count` values;
 * `out` must be writable.
 */
enum RmnpStatus rmnp_optimizer_new(const struct RmnpOptimizerConfig *config,
                                   const size_t *rows,
                                   const size_t *cols,
                                   size_t count,
                                   struct RmnpOptimizer **out);

/**
 * Releases an optimizer. Null is ignored.
 *
 * # Safety
 * `opt` must be null or a handle from this library that has not been freed.
 */
void rmnp_optimizer_free(struct RmnpOptimizer *opt);

/**
 * Applies one step to `params` in place using `grads`. Both arrays hold
 * `count` handles in the order the optimizer was created with. On error the
 * parameters are left unchanged.
 *
 * # Safety
 * `opt` must be live; `params` and `grads` must each hold `count` live,
 * distinct handles.
 */
enum RmnpStatus rmnp_optimizer_step(struct RmnpOptimizer *opt,
                                    struct RmnpMatrix *const *params,
                                    const struct RmnpMatrix *const *grads,
                                    size_t count,
                                    double lr_matrix,
                                    double lr_adamw);

/**
 * Cosine schedule with linear warmup over the first 10% of `total_steps`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RmnpStatus rmnp_schedule_lr(double base_lr, uint64_t total_steps, uint64_t t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RMNP_H */
