#ifndef JOT_H
#define JOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum JotStatus {
  JOT_STATUS_OK = 0,
  JOT_STATUS_INVALID_ARGUMENT = 1,
  JOT_STATUS_NULL_POINTER = 2,
  JOT_STATUS_NON_CONVERGENCE = 3,
  JOT_STATUS_NUMERICAL = 4,
  JOT_STATUS_CAPACITY = 5,
  JOT_STATUS_BUFFER_TOO_SMALL = 6,
  JOT_STATUS_PANIC = 7,
} JotStatus;

typedef enum JotScalingKind {
  JOT_SCALING_KIND_LARGEST_JUMP = 0,
  JOT_SCALING_KIND_FIXED = 1,
  JOT_SCALING_KIND_GAMMA = 2,
  JOT_SCALING_KIND_ZETA_GAMMA = 3,
} JotScalingKind;

typedef enum JotTruncationKind {
  JOT_TRUNCATION_KIND_FIXED_COUNT = 0,
  JOT_TRUNCATION_KIND_RELATIVE_FLOOR = 1,
  JOT_TRUNCATION_KIND_RELATIVE_MASS = 2,
  JOT_TRUNCATION_KIND_TAIL_MASS = 3,
} JotTruncationKind;

typedef struct JotLevy JotLevy;

typedef struct JotMatrix JotMatrix;

typedef struct JotMeasure JotMeasure;

typedef struct JotRng JotRng;

/**
 * Law of the scaling value. Unused fields are ignored: `a` for `Fixed`,
 * `shape`/`rate` for `Gamma` and `ZetaGamma`, `alpha` for `ZetaGamma`.
 */
typedef struct JotScaling {
  enum JotScalingKind kind;
  double a;
  double shape;
  double rate;
  double alpha;
} JotScaling;

/**
 * `value` is the count for `FixedCount`, eps for the relative rules and tau
 * for `TailMass`.
 */
typedef struct JotTruncation {
  enum JotTruncationKind kind;
  double value;
} JotTruncation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or "" after a success.
 * The pointer stays valid until the next `jot_*` call on the same thread.
 */
const char *jot_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void jot_string_free(char *s);

const char *jot_version(void);

/**
 * Independent stream `stream_id` of the generator seeded with `seed`.
 */
struct JotRng *jot_rng_new(uint64_t seed, uint64_t stream_id);

/**
 * # Safety
 * `rng` must be NULL or a handle from `jot_rng_new` not yet freed.
 */
void jot_rng_free(struct JotRng *rng);

/**
 * # Safety
 * `rng` must be a live handle and `out` writable.
 */
enum JotStatus jot_rng_uniform(struct JotRng *rng, double *out);

/**
 * `θ s^{-1}` on (0, 1].
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_levy_scale_invariant(double theta, struct JotLevy **out);

/**
 * `c s^{-1-alpha}` on (0, ∞).
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_levy_stable(double c, double alpha, struct JotLevy **out);

/**
 * `c θ s^{-1}(1-s)^{θ-1}` on (0, 1).
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_levy_beta_process(double c, double theta, struct JotLevy **out);

/**
 * `coef s^{-1-alpha}(1-s)^{θ+alpha-1}` on (0, 1).
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_levy_stable_beta(double coef, double theta, double alpha, struct JotLevy **out);

/**
 * `θ s^{-1} e^{-s}` on (0, ∞).
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_levy_gamma(double theta, struct JotLevy **out);

/**
 * # Safety
 * `lv` must be NULL or a live handle.
 */
void jot_levy_free(struct JotLevy *lv);

/**
 * Tail mass `Λ(s) = ∫_s^∞ λ`.
 *
 * # Safety
 * `lv` must be a live handle and `out` writable.
 */
enum JotStatus jot_levy_tail(const struct JotLevy *lv, double s, double *out);

/**
 * # Safety
 * `lv` must be a live handle and `out` writable.
 */
enum JotStatus jot_levy_density(const struct JotLevy *lv, double s, double *out);

/**
 * Draws a JOT measure: a scaling value from `scaling`, then ranked weights
 * under `trunc`.
 *
 * # Safety
 * All pointers must be live and `out` writable.
 */
enum JotStatus jot_sample_jot(const struct JotLevy *lv,
                              const struct JotScaling *scaling,
                              const struct JotTruncation *trunc,
                              struct JotRng *rng,
                              struct JotMeasure **out);

/**
 * # Safety
 * `m` must be NULL or a live handle.
 */
void jot_measure_free(struct JotMeasure *m);

/**
 * Number of kept weights; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t jot_measure_len(const struct JotMeasure *m);

/**
 * Copies the weights in decreasing order into `buf`. `out_len` always
 * receives the number of weights; `JOT_STATUS_BUFFER_TOO_SMALL` is returned
 * when it exceeds `cap`.
 *
 * # Safety
 * `buf` must hold `cap` doubles; `out_len` must be writable.
 */
enum JotStatus jot_measure_weights(const struct JotMeasure *m,
                                   double *buf,
                                   size_t cap,
                                   size_t *out_len);

/**
 * Sum of kept weights and a bound on the mass lost to truncation.
 *
 * # Safety
 * `m` must be a live handle; `sum` and `tail_bound` writable.
 */
enum JotStatus jot_measure_mass(const struct JotMeasure *m, double *sum, double *tail_bound);

/**
 * `n` rows of the two-parameter IBP urn.
 *
 * # Safety
 * `rng` must be live and `out` writable.
 */
enum JotStatus jot_urn_ibp(double c,
                           double theta,
                           size_t n,
                           struct JotRng *rng,
                           struct JotMatrix **out);

/**
 * `n` rows of the stable JOT urn with scaling law `scaling`.
 *
 * # Safety
 * `scaling` and `rng` must be live and `out` writable.
 */
enum JotStatus jot_urn_stable(double alpha,
                              const struct JotScaling *scaling,
                              size_t n,
                              struct JotRng *rng,
                              struct JotMatrix **out);

/**
 * `n` rows of the BFRY urn scaling the density `lv`.
 *
 * # Safety
 * `lv` and `rng` must be live and `out` writable.
 */
enum JotStatus jot_urn_bfry(double sigma,
                            const struct JotLevy *lv,
                            size_t n,
                            struct JotRng *rng,
                            struct JotMatrix **out);

/**
 * # Safety
 * `z` must be NULL or a live handle.
 */
void jot_matrix_free(struct JotMatrix *z);

/**
 * # Safety
 * `z` must be NULL or a live handle.
 */
size_t jot_matrix_rows(const struct JotMatrix *z);

/**
 * # Safety
 * `z` must be NULL or a live handle.
 */
size_t jot_matrix_cols(const struct JotMatrix *z);

/**
 * Row-major 0/1 entries of the canonical (left-ordered) matrix.
 *
 * # Safety
 * `buf` must hold `cap` bytes; `out_len` must be writable.
 */
enum JotStatus jot_matrix_dense(const struct JotMatrix *z,
                                uint8_t *buf,
                                size_t cap,
                                size_t *out_len);

/**
 * CSV text of the matrix; release with `jot_string_free`.
 *
 * # Safety
 * `z` must be live and `out` writable.
 */
enum JotStatus jot_matrix_csv(const struct JotMatrix *z, char **out);

/**
 * Density at `t` of the Dickman law with parameter `c`.
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_dickman_pdf(double c, double t, double *out);

/**
 * `P(H = j)` for the Poisson-BFRY law with parameters `sigma`, `tau`.
 *
 * # Safety
 * `out` must be writable.
 */
enum JotStatus jot_poisson_bfry_pmf(double sigma, double tau, uint64_t j, double *out);

/**
 * Exact total variation between a sum of independent Bernoulli(w_i) and
 * Poisson(Σ w_i), and the bound Σ w_i².
 *
 * # Safety
 * `weights` must hold `len` doubles; `tv` and `bound` writable.
 */
enum JotStatus jot_lecam(const double *weights, size_t len, double *tv, double *bound);

/**
 * Runs the `jot` command line with `argc` arguments (argv[0] is the program
 * name) and returns its exit code.
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings.
 */
int32_t jot_cli_main(size_t argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JOT_H */
