#ifndef QWEYL_H
#define QWEYL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  QWEYL_STATUS_OK = 0,
  QWEYL_STATUS_NULL_POINTER = 1,
  QWEYL_STATUS_INVALID_ARGUMENT = 2,
  QWEYL_STATUS_NEAR_CUTOFF = 3,
  QWEYL_STATUS_STEP_SIZE = 4,
  QWEYL_STATUS_NON_FINITE = 5,
  QWEYL_STATUS_BUFFER_TOO_SMALL = 6,
  QWEYL_STATUS_INTERNAL = 99,
} qweyl_status;

typedef enum {
  QWEYL_MODE_PAPER = 0,
  QWEYL_MODE_REDERIVED = 1,
} qweyl_mode;

typedef enum {
  QWEYL_MODEL_SUBSTITUTED = 0,
  QWEYL_MODEL_REPLACEMENT = 1,
  QWEYL_MODEL_REFERENCE = 2,
} qweyl_model;

typedef enum {
  QWEYL_METHOD_EXPM = 0,
  QWEYL_METHOD_RK4 = 1,
} qweyl_method;

/**
 * Truncated Hamiltonian matrix on the Fock basis.
 */
typedef struct qweyl_hamiltonian qweyl_hamiltonian;

/**
 * Result of [`qweyl_evolve`].
 */
typedef struct qweyl_trajectory qweyl_trajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *qweyl_version(void);

/**
 * Message for the last failed call on this thread; empty if none.
 * Valid until the next failing call on the same thread.
 */
const char *qweyl_last_error(void);

/**
 * Largest residual of the fifteen defining relations on monomials of total
 * degree ≤ `degree` at `q = e^{iθ}`.
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
qweyl_status qweyl_relation_residual(double theta, uint32_t degree, double *out);

/**
 * Builds `H = H₀ + θH₁` with per-mode cutoff `n_max`.
 *
 * # Safety
 * `out` must be valid for one pointer write. Release the handle with
 * [`qweyl_hamiltonian_free`].
 */
qweyl_status qweyl_hamiltonian_new(uint32_t n_max,
                                   double theta,
                                   qweyl_mode mode,
                                   qweyl_model model,
                                   qweyl_hamiltonian **out);

/**
 * # Safety
 * `h` must come from [`qweyl_hamiltonian_new`] and not be used afterwards. Null is ignored.
 */
void qweyl_hamiltonian_free(qweyl_hamiltonian *h);

/**
 * Matrix dimension `(n_max + 1)³`; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t qweyl_hamiltonian_dim(const qweyl_hamiltonian *h);

/**
 * `⟨row|H|col⟩`.
 *
 * # Safety
 * `h` must be a live handle; `row`, `col` must point to three `uint32_t`;
 * `re`, `im` must be valid for one `double` write each.
 */
qweyl_status qweyl_hamiltonian_element(const qweyl_hamiltonian *h,
                                       const uint32_t *row,
                                       const uint32_t *col,
                                       double *re,
                                       double *im);

/**
 * Copies the matrix as row-major interleaved `(re, im)` pairs; `len` is the
 * buffer length in doubles and must be at least `2·dim²`.
 *
 * # Safety
 * `buf` must be valid for `len` `double` writes.
 */
qweyl_status qweyl_hamiltonian_copy(const qweyl_hamiltonian *h, double *buf, size_t len);

/**
 * Fraction of `H₁` coupling weight outside the offsets `{−1,0,1}³`, over
 * interior columns.
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
qweyl_status qweyl_mixing_outside_fraction(uint32_t n_max,
                                           qweyl_mode mode,
                                           qweyl_model model,
                                           double *out);

/**
 * First-order shift `θ⟨n|H₁|n⟩`, independent of any cutoff.
 *
 * # Safety
 * `n` must point to three `uint32_t`; `re`, `im` must be valid for writes.
 */
qweyl_status qweyl_energy_shift(const uint32_t *n,
                                double theta,
                                qweyl_mode mode,
                                qweyl_model model,
                                double *re,
                                double *im);

/**
 * Propagates the basis state `initial` for time `t_final` with step `dt`.
 * The run stops early (see [`qweyl_trajectory_aborted`]) once an edge state
 * holds more than `1e-6` of the probability.
 *
 * # Safety
 * `h` must be a live handle, `initial` must point to three `uint32_t`, `out`
 * must be valid for one pointer write. Release with [`qweyl_trajectory_free`].
 */
qweyl_status qweyl_evolve(const qweyl_hamiltonian *h,
                          const uint32_t *initial,
                          double t_final,
                          double dt,
                          qweyl_method method,
                          qweyl_trajectory **out);

/**
 * # Safety
 * `t` must come from [`qweyl_evolve`] and not be used afterwards. Null is ignored.
 */
void qweyl_trajectory_free(qweyl_trajectory *t);

/**
 * Number of stored time points (including `t = 0`); 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t qweyl_trajectory_len(const qweyl_trajectory *t);

/**
 * Whether the run stopped at the truncation edge.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
bool qweyl_trajectory_aborted(const qweyl_trajectory *t);

/**
 * Copies times and squared norms `P(t)`; both buffers need
 * [`qweyl_trajectory_len`] entries. Either may be null to skip it.
 *
 * # Safety
 * Non-null buffers must be valid for `len` `double` writes.
 */
qweyl_status qweyl_trajectory_norms(const qweyl_trajectory *t,
                                    double *times,
                                    double *norms,
                                    size_t len);

/**
 * `max_t |dP/dt − 2⟨H_I⟩|` along the trajectory.
 *
 * # Safety
 * `t`, `h` must be live handles with `t` produced from `h`; `out` valid for one write.
 */
qweyl_status qweyl_norm_flow_deviation(const qweyl_trajectory *t,
                                       const qweyl_hamiltonian *h,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QWEYL_H */
