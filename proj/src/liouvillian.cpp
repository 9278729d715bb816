#include "qtraj/liouvillian.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace qtraj {

Vector complex_eigenvalues(const Matrix& m) {
    require(m.rows() == m.cols(), "complex_eigenvalues: matrix not square");
    const lapack_int n = static_cast<lapack_int>(m.rows());
    if (n == 0) return Vector();
    Matrix a = m;  // overwritten by zgeev
    Vector w(n);
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n,
                                    w.data(), nullptr, 1, nullptr, 1);
    if (info != 0)
        throw NumericalError("zgeev failed with info = " + std::to_string(info));
    return w;
}

void complex_eigensystem(const Matrix& m, Vector& values, Matrix& right_vectors) {
    require(m.rows() == m.cols(), "complex_eigensystem: matrix not square");
    const lapack_int n = static_cast<lapack_int>(m.rows());
    Matrix a = m;
    values.resize(n);
    right_vectors.resize(n, n);
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n,
                                    values.data(), nullptr, 1, right_vectors.data(), n);
    if (info != 0)
        throw NumericalError("zgeev failed with info = " + std::to_string(info));
}

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

}  // namespace

VectorizedLiouvillian build_liouvillian(const Matrix& h,
                                        const std::vector<std::pair<Matrix, double>>& jumps) {
    require(h.rows() == h.cols(), "build_liouvillian: H not square");
    const Eigen::Index n = h.rows();
    const Matrix id = Matrix::Identity(n, n);

    VectorizedLiouvillian out;
    out.matrix = Complex(0, -1) * (kron(id, h) - kron(h.transpose(), id));
    for (const auto& [l, g] : jumps) {
        require(l.rows() == n && l.cols() == n, "build_liouvillian: jump dimension mismatch");
        require(g >= 0.0, "build_liouvillian: negative rate");
        Matrix ldl = l.adjoint() * l;
        out.matrix += g * (kron(l.conjugate(), l) - 0.5 * kron(id, ldl) -
                           0.5 * kron(ldl.transpose(), id));
    }
    return out;
}

Matrix sector_generator(const BlockedModel& m, std::pair<int, int> pair) {
    const auto [a, ap] = pair;
    const int da = m.dim_of(a), dap = m.dim_of(ap);
    require(da > 0 && dap > 0, "sector_generator: empty sector");
    const Matrix ida = Matrix::Identity(da, da);
    const Matrix idap = Matrix::Identity(dap, dap);
    const Matrix& ha = m.h_blocks[static_cast<std::size_t>(a)];
    const Matrix& hap = m.h_blocks[static_cast<std::size_t>(ap)];

    Matrix gmat = Complex(0, -1) * (kron(idap, ha) - kron(hap.transpose(), ida));
    for (std::size_t j = 0; j < m.jump_blocks.size(); ++j) {
        const Matrix& la = m.jump_blocks[j][static_cast<std::size_t>(a)];
        const Matrix& lap = m.jump_blocks[j][static_cast<std::size_t>(ap)];
        const double g = m.rates[j];
        gmat += g * (kron(lap.conjugate(), la) -
                     0.5 * kron(idap, (la.adjoint() * la).eval()) -
                     0.5 * kron((lap.adjoint() * lap).transpose().eval(), ida));
    }
    return gmat;
}

SectorSpectrum sector_spectrum(const BlockedModel& m, std::pair<int, int> pair,
                               double tol, bool want_vectors) {
    require(pair.first >= 0 && pair.first < m.n_subspaces() && pair.second >= 0 &&
                pair.second < m.n_subspaces(),
            "sector_spectrum: invalid pair");
    Matrix gmat = sector_generator(m, pair);

    SectorSpectrum s;
    s.pair = pair;
    if (want_vectors) {
        Matrix vecs;
        complex_eigensystem(gmat, s.eigenvalues, vecs);
        s.eigenvectors = std::move(vecs);
    } else {
        s.eigenvalues = complex_eigenvalues(gmat);
    }

    double radius = 0.0;
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
        radius = std::max(radius, std::abs(s.eigenvalues[i]));
    s.tol_used = tol >= 0 ? tol : 1e-8 * std::max(radius, 1e-300);

    s.gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
        double re = std::abs(s.eigenvalues[i].real());
        s.gap = std::min(s.gap, re);
        if (re <= s.tol_used) s.traceless_nondecaying.push_back(s.eigenvalues[i]);
    }
    return s;
}

double inter_sector_gap(const BlockedModel& m, std::pair<int, int> pair, double tol) {
    return sector_spectrum(m, pair, tol).gap;
}

std::vector<SteadyState> steady_states(const BlockedModel& m, double tol) {
    std::vector<SteadyState> out;
    for (int a = 0; a < m.n_subspaces(); ++a) {
        Matrix gmat = sector_generator(m, {a, a});
        Vector vals;
        Matrix vecs;
        complex_eigensystem(gmat, vals, vecs);

        double radius = 0.0;
        for (Eigen::Index i = 0; i < vals.size(); ++i)
            radius = std::max(radius, std::abs(vals[i]));
        double thr = tol >= 0 ? tol : 1e-9 * std::max(radius, 1e-300);

        std::vector<Eigen::Index> nullspace;
        for (Eigen::Index i = 0; i < vals.size(); ++i)
            if (std::abs(vals[i]) <= thr) nullspace.push_back(i);
        if (nullspace.empty())
            throw InternalConsistencyError(
                "steady_states: diagonal sector " + std::to_string(a) +
                " has no null vector (violates Evans' theorem; build bug)");

        const int d = m.dim_of(a);
        // Hermitize, then orthonormalize in the Hilbert-Schmidt inner product.
        std::vector<Matrix> basis;
        for (Eigen::Index col : nullspace) {
            Matrix rho = Eigen::Map<const Matrix>(vecs.col(col).data(), d, d);
            rho = 0.5 * (rho + rho.adjoint()).eval();
            for (const auto& prev : basis) {
                Complex ov = (prev.adjoint() * rho).trace();
                rho -= ov * prev;
            }
            double nrm = rho.norm();
            if (nrm < 1e-10) continue;  // imaginary combination of earlier members
            basis.push_back(rho / nrm);
        }
        if (basis.empty())
            throw InternalConsistencyError(
                "steady_states: null space of sector " + std::to_string(a) +
                " contains no Hermitian representative");

        for (auto& rho : basis) {
            SteadyState ss;
            ss.alpha = a;
            ss.degeneracy = static_cast<int>(basis.size());
            double tr = rho.trace().real();
            if (std::abs(tr) > 1e-8) rho /= tr;
            ss.rho = rho;
            Eigen::Map<const Vector> v(rho.data(), d * d);
            ss.residual = (gmat * v).norm();
            Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
            ss.min_eigenvalue = es.eigenvalues().minCoeff();
            out.push_back(std::move(ss));
        }
    }
    return out;
}

namespace {

Matrix lindblad_rhs(const Matrix& rho, const Matrix& h,
                    const std::vector<std::pair<Matrix, double>>& jumps) {
    Matrix drho = Complex(0, -1) * (h * rho - rho * h);
    for (const auto& [l, g] : jumps) {
        Matrix ldl = l.adjoint() * l;
        drho += g * (l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl));
    }
    return drho;
}

}  // namespace

Matrix integrate_master_equation(const Matrix& rho0, const Matrix& h,
                                 const std::vector<std::pair<Matrix, double>>& jumps,
                                 double t, double dt_oracle, double* trace_drift) {
    require(t >= 0 && dt_oracle > 0, "integrate_master_equation: bad time arguments");
    require(rho0.rows() == rho0.cols(), "integrate_master_equation: rho0 not square");
    if (!is_hermitian(rho0, 1e-10))
        throw ValidationError("integrate_master_equation: rho0 not Hermitian");

    Matrix rho = rho0;
    long n_steps = static_cast<long>(std::ceil(t / dt_oracle - 1e-12));
    double dt = n_steps > 0 ? t / static_cast<double>(n_steps) : 0.0;
    for (long s = 0; s < n_steps; ++s) {
        Matrix k1 = lindblad_rhs(rho, h, jumps);
        Matrix k2 = lindblad_rhs(rho + 0.5 * dt * k1, h, jumps);
        Matrix k3 = lindblad_rhs(rho + 0.5 * dt * k2, h, jumps);
        Matrix k4 = lindblad_rhs(rho + dt * k3, h, jumps);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    double drift = std::abs(rho.trace().real() - rho0.trace().real()) +
                   std::abs(rho.trace().imag());
    if (trace_drift) *trace_drift = drift;
    if (drift > 1e-6)
        throw NumericalError("integrate_master_equation: trace drift " +
                             std::to_string(drift) + " exceeds 1e-6; reduce dt_oracle");
    return rho;
}

Matrix propagate_expm(const Matrix& rho0, const Matrix& h,
                      const std::vector<std::pair<Matrix, double>>& jumps, double t) {
    const Eigen::Index n = rho0.rows();
    if (n > 24)
        throw ValidationError(
            "propagate_expm: refused for dim > 24; use sector projections");
    VectorizedLiouvillian liou = build_liouvillian(h, jumps);
    Matrix prop = (liou.matrix * t).exp();
    Eigen::Map<const Vector> v0(rho0.data(), n * n);
    Vector vt = prop * v0;
    return Eigen::Map<const Matrix>(vt.data(), n, n);
}

std::vector<TracelessMode> detect_traceless_modes(const BlockedModel& m, double tol) {
    std::vector<TracelessMode> out;
    for (int a = 0; a < m.n_subspaces(); ++a) {
        for (int ap = a + 1; ap < m.n_subspaces(); ++ap) {
            SectorSpectrum s = sector_spectrum(m, {a, ap}, tol);
            if (!s.traceless_nondecaying.empty())
                out.push_back({{a, ap}, s.traceless_nondecaying});
        }
    }
    return out;
}

}  // namespace qtraj
