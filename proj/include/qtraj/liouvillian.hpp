// liouvillian.hpp — dense superoperator machinery: vectorized generator,
// sector spectra, steady states, traceless-mode detection, and the direct
// master-equation integration oracle.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/model.hpp"

namespace qtraj {

// Dense non-Hermitian eigendecomposition (LAPACK zgeev).
Vector complex_eigenvalues(const Matrix& m);
void complex_eigensystem(const Matrix& m, Vector& values, Matrix& right_vectors);

struct VectorizedLiouvillian {
    Matrix matrix;  // n^2 x n^2
    std::string convention = "column-stacking";  // rho -> vec(rho), X rho Y -> (Y^T (x) X) vec
};

VectorizedLiouvillian build_liouvillian(const Matrix& h,
                                        const std::vector<std::pair<Matrix, double>>& jumps);

struct SectorSpectrum {
    std::pair<int, int> pair;
    Vector eigenvalues;
    double gap = 0.0;                           // min |Re lambda| over the sector
    std::vector<Complex> traceless_nondecaying;  // eigenvalues with |Re| <= tol
    double tol_used = 0.0;
    std::optional<Matrix> eigenvectors;  // columns, matching eigenvalue order
};

// Generator restricted to span{|alpha,beta><alpha',beta'|}; the coherence rho
// (d_alpha x d_alpha') evolves as
//   -i(H_a rho - rho H_a') + sum_j gamma_j (L_ja rho L_ja'^dag
//        - 1/2 L_ja^dag L_ja rho - 1/2 rho L_ja'^dag L_ja').
Matrix sector_generator(const BlockedModel& m, std::pair<int, int> pair);

// tol < 0 selects the default 1e-8 * (spectral radius of the sector generator).
SectorSpectrum sector_spectrum(const BlockedModel& m, std::pair<int, int> pair,
                               double tol = -1.0, bool want_vectors = false);

double inter_sector_gap(const BlockedModel& m, std::pair<int, int> pair,
                        double tol = -1.0);

struct SteadyState {
    int alpha = -1;
    Matrix rho;             // d_alpha x d_alpha, block basis
    double residual = 0.0;  // ||G vec(rho)||
    int degeneracy = 1;     // null-space dimension of this diagonal sector
    double min_eigenvalue = 0.0;
};

// One (or, for degenerate sectors, an orthonormalized basis of) steady state
// per diagonal sector. A diagonal sector without a null vector violates
// Evans' theorem and raises InternalConsistencyError.
std::vector<SteadyState> steady_states(const BlockedModel& m, double tol = -1.0);

// Fourth-order explicit integration of the master equation; throws
// NumericalError when |tr rho - 1| drifts beyond 1e-6.
Matrix integrate_master_equation(const Matrix& rho0, const Matrix& h,
                                 const std::vector<std::pair<Matrix, double>>& jumps,
                                 double t, double dt_oracle,
                                 double* trace_drift = nullptr);

// exp(L t) applied to rho0 through the dense matrix exponential; refused for
// dim > 24 (use sector projections instead).
Matrix propagate_expm(const Matrix& rho0, const Matrix& h,
                      const std::vector<std::pair<Matrix, double>>& jumps, double t);

struct TracelessMode {
    std::pair<int, int> pair;
    std::vector<Complex> eigenvalues;  // on (or numerically on) the imaginary axis
};

// Sweeps all off-diagonal pairs; distinguishes lambda = 0 steady coherences
// from oscillating ones by the imaginary part.
std::vector<TracelessMode> detect_traceless_modes(const BlockedModel& m,
                                                  double tol = -1.0);

}  // namespace qtraj
