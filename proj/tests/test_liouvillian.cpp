#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "qtraj/liouvillian.hpp"
#include "qtraj/model.hpp"

using namespace qtraj;

namespace {

Vector vec_identity(int n) {
    Matrix id = Matrix::Identity(n, n);
    return Eigen::Map<const Vector>(id.data(), n * n);
}

std::vector<Complex> sorted_eigs(Vector v) {
    std::vector<Complex> out(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return out;
}

// Max over a greedy one-to-one nearest matching. Sorting complex spectra is
// unstable when conjugate pairs share a real part up to roundoff, so equality
// of spectra is checked by matching instead.
double spectrum_distance(const std::vector<Complex>& a, std::vector<Complex> b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (const Complex& z : a) {
        std::size_t best = 0;
        double d = 1e300;
        for (std::size_t i = 0; i < b.size(); ++i) {
            double di = std::abs(z - b[i]);
            if (di < d) {
                d = di;
                best = i;
            }
        }
        worst = std::max(worst, d);
        b.erase(b.begin() + static_cast<long>(best));
    }
    return worst;
}

}  // namespace

TEST_CASE("zgeev wrapper reproduces known eigenvalues") {
    Matrix m(2, 2);
    m << 0, 1, -1, 0;  // eigenvalues +/- i
    Vector vals = complex_eigenvalues(m);
    auto s = sorted_eigs(vals);
    CHECK(spectrum_distance(s, {Complex(0, -1), Complex(0, 1)}) < 1e-12);

    Vector vals2;
    Matrix vecs;
    complex_eigensystem(m, vals2, vecs);
    for (Eigen::Index i = 0; i < 2; ++i)
        CHECK((m * vecs.col(i) - vals2[i] * vecs.col(i)).norm() < 1e-12);
}

TEST_CASE("generator preserves the trace") {
    ModelSpec m = coupled_qudit_model(3.0);
    VectorizedLiouvillian liou = build_liouvillian(m.H, m.jumps);
    Vector dual = vec_identity(16);
    CHECK((dual.adjoint() * liou.matrix).norm() < 1e-10 * liou.matrix.norm());
    CHECK(liou.convention == "column-stacking");
}

TEST_CASE("maximally mixed state is stationary for a unital map") {
    // H = 0, L unitary: L^dag L = 1
    Matrix h = Matrix::Zero(2, 2);
    Matrix l(2, 2);
    l << 0, 1, 1, 0;
    VectorizedLiouvillian liou = build_liouvillian(h, {{l, 1.0}});
    Vector v = vec_identity(2) / 2.0;
    CHECK((liou.matrix * v).norm() < 1e-12);
}

TEST_CASE("pure dephasing spectrum in closed form") {
    const double gamma = 0.7;
    Matrix h = Matrix::Zero(2, 2);
    Matrix sz(2, 2);
    sz << 1, 0, 0, -1;
    VectorizedLiouvillian liou = build_liouvillian(h, {{sz, gamma}});
    auto s = sorted_eigs(complex_eigenvalues(liou.matrix));
    // populations: two zeros; coherences decay at 2 gamma
    CHECK(std::abs(s[0] - Complex(-2 * gamma, 0)) < 1e-12);
    CHECK(std::abs(s[1] - Complex(-2 * gamma, 0)) < 1e-12);
    CHECK(std::abs(s[2]) < 1e-12);
    CHECK(std::abs(s[3]) < 1e-12);
}

TEST_CASE("dephasing sector gap is 2 gamma") {
    const double gamma = 0.7;
    BlockedModel bm = build_blocked(qubit_dephasing_toy(DephasingVariant::SigmaZ, gamma));
    SectorSpectrum s = sector_spectrum(bm, {0, 1});
    REQUIRE(s.eigenvalues.size() == 1);
    CHECK(s.gap == doctest::Approx(2 * gamma));
    CHECK(s.traceless_nondecaying.empty());
    CHECK(inter_sector_gap(bm, {0, 1}) == doctest::Approx(2 * gamma));
}

TEST_CASE("diagonal sectors contain a steady state") {
    BlockedModel bm = build_blocked(coupled_qudit_model(3.0));
    for (int a = 0; a < bm.n_subspaces(); ++a) {
        SectorSpectrum s = sector_spectrum(bm, {a, a});
        double min_abs = 1e300;
        for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
            min_abs = std::min(min_abs, std::abs(s.eigenvalues[i]));
        CHECK(min_abs <= s.tol_used);
        // contractivity: no growing modes
        for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
            CHECK(s.eigenvalues[i].real() <= s.tol_used);
    }
}

TEST_CASE("sector spectra tile the full spectrum") {
    BlockedModel bm = build_blocked(coupled_qudit_model(3.0));
    VectorizedLiouvillian liou = build_liouvillian(bm.h_full(), {{bm.jump_full(0), bm.rates[0]}});
    auto full = sorted_eigs(complex_eigenvalues(liou.matrix));

    Vector all(static_cast<Eigen::Index>(full.size()));
    Eigen::Index pos = 0;
    for (int a = 0; a < bm.n_subspaces(); ++a) {
        for (int ap = 0; ap < bm.n_subspaces(); ++ap) {
            SectorSpectrum s = sector_spectrum(bm, {a, ap});
            for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) all[pos++] = s.eigenvalues[i];
        }
    }
    REQUIRE(pos == static_cast<Eigen::Index>(full.size()));
    std::vector<Complex> tiled(all.data(), all.data() + all.size());
    double scale = std::abs(full.front());
    CHECK(spectrum_distance(full, tiled) < 1e-8 * std::max(scale, 1.0));
}

TEST_CASE("conjugate pairing of opposite sectors") {
    BlockedModel bm = build_blocked(coupled_qudit_model(3.0));
    for (auto pair : {std::pair{1, 2}, {2, 4}, {0, 3}}) {
        Vector av = sector_spectrum(bm, pair).eigenvalues;
        std::vector<Complex> a(av.data(), av.data() + av.size());
        auto b = sector_spectrum(bm, {pair.second, pair.first}).eigenvalues;
        std::vector<Complex> bc;
        for (Eigen::Index i = 0; i < b.size(); ++i) bc.push_back(std::conj(b[i]));
        CHECK(spectrum_distance(a, bc) < 1e-9);
    }
}

TEST_CASE("qudit similar-subspace pair has an open gap") {
    // opposite-magnetisation subspaces cancel statistically, not spectrally
    BlockedModel bm = build_blocked(coupled_qudit_model(3.0));
    SectorSpectrum s = sector_spectrum(bm, {1, 5});
    CHECK(s.gap > 1e-3);
    CHECK(s.traceless_nondecaying.empty());
}

TEST_CASE("steady states of the dephasing toy are the projectors") {
    BlockedModel bm = build_blocked(qubit_dephasing_toy(DephasingVariant::SigmaZ, 1.0));
    auto sts = steady_states(bm);
    REQUIRE(sts.size() == 2);
    for (const auto& s : sts) {
        CHECK(s.rho.rows() == 1);
        CHECK(std::abs(s.rho(0, 0) - Complex(1, 0)) < 1e-12);
        CHECK(s.residual < 1e-10);
        CHECK(s.min_eigenvalue > 1.0 - 1e-10);
    }
}

TEST_CASE("the two-qudit model has one steady state per sector") {
    BlockedModel bm = build_blocked(coupled_qudit_model(3.0));
    auto sts = steady_states(bm);
    REQUIRE(sts.size() == 7);
    for (const auto& s : sts) {
        CHECK(is_hermitian(s.rho, 1e-10));
        CHECK(std::abs(s.rho.trace().real() - 1.0) < 1e-8);
        CHECK(s.min_eigenvalue > -1e-10);
        CHECK(s.residual < 1e-8 * std::max(1.0, bm.h_full().norm()));
    }
}

TEST_CASE("integrator agrees with the exponential propagator") {
    ModelSpec m = qubit_dephasing_toy(DephasingVariant::Number, 1.0);
    Matrix rho0(2, 2);
    rho0 << 0.5, Complex(0.2, 0.1), Complex(0.2, -0.1), 0.5;
    Matrix a = integrate_master_equation(rho0, m.H, m.jumps, 2.0, 1e-3);
    Matrix b = propagate_expm(rho0, m.H, m.jumps, 2.0);
    CHECK((a - b).norm() < 1e-8);

    ModelSpec q = coupled_qudit_model(3.0);
    Matrix rq = Matrix::Zero(16, 16);
    for (int i = 0; i < 16; ++i) rq(i, i) = 1.0 / 16.0;
    rq(0, 5) = rq(5, 0) = 0.01;
    Matrix aq = integrate_master_equation(rq, q.H, q.jumps, 1.0, 5e-4);
    Matrix bq = propagate_expm(rq, q.H, q.jumps, 1.0);
    CHECK((aq - bq).norm() < 1e-8);
    CHECK(std::abs(aq.trace().real() - 1.0) < 1e-8);
}

TEST_CASE("integrator rejects bad input") {
    Matrix bad(2, 2);
    bad << 1, 1, 0, 0;  // not Hermitian
    ModelSpec m = qubit_dephasing_toy(DephasingVariant::Number, 1.0);
    CHECK_THROWS_AS(integrate_master_equation(bad, m.H, m.jumps, 1.0, 1e-3),
                    ValidationError);
}

TEST_CASE("dense exponential is refused beyond dimension 24") {
    ModelSpec m = lossy_boson_chain_model(4, 5.0, 2.0, 2.0, 3);
    Matrix rho0 = Matrix::Identity(m.dim, m.dim) / static_cast<double>(m.dim);
    CHECK_THROWS_AS(propagate_expm(rho0, m.H, m.jumps, 1.0), ValidationError);
}

TEST_CASE("traceless-mode scan is empty for a generic gapped model") {
    BlockedModel bm = build_blocked(random_block_model(3, 3, 4.0, 5));
    CHECK(detect_traceless_modes(bm).empty());
}

TEST_CASE("steady state confirms block-diagonal convergence when no traceless modes") {
    // dephasing qubit: off-diagonal block of exp(Lt) rho0 decays
    ModelSpec m = qubit_dephasing_toy(DephasingVariant::SigmaZ, 1.0);
    Matrix rho0(2, 2);
    rho0 << 0.5, 0.5, 0.5, 0.5;
    Matrix late = propagate_expm(rho0, m.H, m.jumps, 20.0);
    CHECK(std::abs(late(0, 1)) < 1e-8);
    CHECK(std::abs(late(0, 0) - Complex(0.5, 0)) < 1e-10);
}
