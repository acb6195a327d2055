#ifndef CIRCLAW_H
#define CIRCLAW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CirclawStatus {
  CIRCLAW_STATUS_OK = 0,
  CIRCLAW_STATUS_NULL_POINTER = 1,
  CIRCLAW_STATUS_INVALID_PARAMETER = 2,
  CIRCLAW_STATUS_PARITY = 3,
  CIRCLAW_STATUS_DIMENSION = 4,
  CIRCLAW_STATUS_DEGENERATE = 5,
  CIRCLAW_STATUS_NO_CONVERGENCE = 6,
  CIRCLAW_STATUS_TOO_LARGE = 7,
  CIRCLAW_STATUS_IO = 8,
  CIRCLAW_STATUS_FORMAT = 9,
  CIRCLAW_STATUS_PANIC = 10,
} CirclawStatus;

typedef enum CirclawRowModel {
  // Uniform over sign vectors with entry sum `s`.
  CIRCLAW_ROW_MODEL_FIXED_SUM = 0,
  // Uniform over sign vectors with entry sum `s - 1` or `s + 1`.
  CIRCLAW_ROW_MODEL_UNION_S = 1,
  // Independent entries with `P(+1) = 1/2 + s/(2n)`.
  CIRCLAW_ROW_MODEL_IID = 2,
} CirclawRowModel;

// Seeded ChaCha8 generator.
typedef struct CirclawRng CirclawRng;

// Eigenvalues of a matrix, optionally normalized by `1/(sigma sqrt(n))`.
typedef struct CirclawSpectrum CirclawSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty after a success.
// The pointer stays valid until the next call into this library.
const char *circlaw_last_error(void);

// Static name of a status code.
const char *circlaw_status_name(enum CirclawStatus status);

struct CirclawRng *circlaw_rng_new(uint64_t seed);

// Generator of trial `index` under master seed `seed`.
struct CirclawRng *circlaw_rng_trial(uint64_t seed, uint64_t index);

// # Safety
// `rng` must come from `circlaw_rng_new` or `circlaw_rng_trial`, or be null.
void circlaw_rng_free(struct CirclawRng *rng);

// One row of length `n` written to `out` as +1/-1.
//
// # Safety
// `rng` must be a live handle and `out` must hold `n` bytes.
enum CirclawStatus circlaw_sample_row(struct CirclawRng *rng,
                                      size_t n,
                                      int64_t s,
                                      enum CirclawRowModel model,
                                      int8_t *out);

// `n x n` matrix with independent rows, row-major into `out`.
//
// # Safety
// `rng` must be a live handle and `out` must hold `n * n` doubles.
enum CirclawStatus circlaw_sample_matrix(struct CirclawRng *rng,
                                         size_t n,
                                         int64_t s,
                                         enum CirclawRowModel model,
                                         double *out);

// Probabilities that a uniform draw from the union of the sum `s - 1` and
// sum `s + 1` classes lands in each class.
//
// # Safety
// `type1` and `type2` must be valid for writes.
enum CirclawStatus circlaw_type_split(size_t n, int64_t s, double *type1, double *type2);

double circlaw_sigma(size_t n, int64_t s);

// Circular-law mass of `{Re z <= s, Im z <= t}`.
double circlaw_circular_cdf(double s, double t);

// Eigenvalues of a real matrix.
//
// # Safety
// `matrix` must hold `n * n` doubles and `spectrum` must be valid for writes.
enum CirclawStatus circlaw_eigenvalues(const double *matrix,
                                       size_t n,
                                       struct CirclawSpectrum **spectrum);

// Eigenvalues of `M / (sigma sqrt(n))` for a matrix with row sums `s`,
// with the eigenvalue near `s / (sigma sqrt(n))` located.
//
// # Safety
// `matrix` must hold `n * n` doubles and `spectrum` must be valid for writes.
enum CirclawStatus circlaw_normalized_esd(const double *matrix,
                                          size_t n,
                                          int64_t s,
                                          struct CirclawSpectrum **spectrum);

// # Safety
// `spectrum` must be a live handle or null.
size_t circlaw_spectrum_len(const struct CirclawSpectrum *spectrum);

// # Safety
// `spectrum` must be a live handle; `re` and `im` must be valid for writes.
enum CirclawStatus circlaw_spectrum_get(const struct CirclawSpectrum *spectrum,
                                        size_t index,
                                        double *re,
                                        double *im);

// Index of the eigenvalue nearest `s / (sigma sqrt(n))` (-1 if the
// spectrum is not normalized) and whether it is excluded from the ESD.
//
// # Safety
// `spectrum` must be a live handle; `index` and `excluded` must be valid for writes.
enum CirclawStatus circlaw_spectrum_outlier(const struct CirclawSpectrum *spectrum,
                                            int64_t *index,
                                            bool *excluded);

// Sup distance between the spectrum's ESD and the circular law on a
// `grid x grid` lattice of `[-1.5, 1.5]^2`.
//
// # Safety
// `spectrum` must be a live handle; `distance` must be valid for writes.
enum CirclawStatus circlaw_spectrum_ks_distance(const struct CirclawSpectrum *spectrum,
                                                size_t grid,
                                                double *distance);

// # Safety
// `spectrum` must come from this library or be null.
void circlaw_spectrum_free(struct CirclawSpectrum *spectrum);

// Largest distance between the spectrum of `M` and `{s}` together with the
// spectrum of its reduced matrix. Integer matrices whose floating-point
// error exceeds `refine_above` are recomputed exactly; `refined` reports it.
//
// # Safety
// `matrix` must hold `n * n` doubles; `error` and `refined` must be valid for writes.
enum CirclawStatus circlaw_reduction_error(const double *matrix,
                                           size_t n,
                                           double refine_above,
                                           double *error,
                                           bool *refined);

// `log|det(M - z sqrt(n) I)|` as a sum of log distances of each row to the
// span of the rows before it.
//
// # Safety
// `matrix` must hold `n * n` doubles; `logdet` must be valid for writes.
enum CirclawStatus circlaw_logdet_shifted(const double *matrix,
                                          size_t n,
                                          double z_re,
                                          double z_im,
                                          double *logdet);

// Exact largest probability that `sum x_i v_i` lands in a closed ball of
// radius `beta`, for independent signs with `P(+1) = 1/2 + s/(2n)`.
// `points` holds `n` points of dimension `dim` (1 or 2); `center` may be
// null, otherwise it receives two coordinates.
//
// # Safety
// `points` must hold `n * dim` doubles; `value` must be valid for writes.
enum CirclawStatus circlaw_rho_iid(const double *points,
                                   size_t n,
                                   size_t dim,
                                   double beta,
                                   int64_t s,
                                   double *value,
                                   double *center);

// As [`circlaw_rho_iid`] for signs uniform among vectors with entry sum `s_bar`.
//
// # Safety
// `points` must hold `n * dim` doubles; `value` must be valid for writes.
enum CirclawStatus circlaw_rho_star(const double *points,
                                    size_t n,
                                    size_t dim,
                                    double beta,
                                    int64_t s_bar,
                                    double *value,
                                    double *center);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRCLAW_H */
