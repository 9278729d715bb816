#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qtraj/freeze_stats.hpp"
#include "qtraj/liouvillian.hpp"

using namespace qtraj;

TEST_CASE("pre-frozen ensemble gives a delta at zero") {
    ModelSpec spec = qubit_dephasing_toy(DephasingVariant::Number, 1.0);
    spec.initial_state.subspaces = {1};
    BlockedModel bm = build_blocked(spec);
    UnravelingConfig cfg;
    cfg.t_max = 0.5;
    cfg.seed = 10;
    EnsembleResult ens = run_ensemble(bm, cfg, 50, 1);
    RealVector snaps(1);
    snaps << 0.25;
    EnsembleFreezeStats st = ensemble_stats(ens.records, 5, snaps);
    CHECK(st.frozen_count == 50);
    CHECK(st.unfrozen_count == 0);
    CHECK(st.mean_freeze_time == 0.0);
    CHECK(st.destination_counts[1] == 50);
    CHECK(st.destination_counts[0] == 0);
    // all mass in the first bin; CDF reaches 1
    CHECK(st.cdf[st.cdf.size() - 1] == doctest::Approx(1.0));
    CHECK(st.cdf[0] == doctest::Approx(1.0));
    // coherence snapshot: p = (0, 1) identically
    CHECK(st.coherence[0](1, 1) == doctest::Approx(1.0));
    CHECK(st.coherence[0](0, 1) == doctest::Approx(0.0));
}

TEST_CASE("histogram normalization") {
    ModelSpec spec = qubit_dephasing_toy(DephasingVariant::Number, 1.0);
    BlockedModel bm = build_blocked(spec);
    UnravelingConfig cfg;
    cfg.t_max = 50.0;
    cfg.seed = 77;
    EnsembleResult ens = run_ensemble(bm, cfg, 200, 1);
    EnsembleFreezeStats st = ensemble_stats(ens.records, 0, RealVector());
    CHECK(st.frozen_count + st.unfrozen_count == 200);
    REQUIRE(st.pdf.size() > 0);
    double integral = 0.0;
    for (Eigen::Index b = 0; b < st.pdf.size(); ++b)
        integral += st.pdf[b] * (st.bin_right[b] - st.bin_left[b]);
    CHECK(integral == doctest::Approx(1.0));
    CHECK(st.cdf[st.cdf.size() - 1] == doctest::Approx(1.0));
    // CDF monotone
    for (Eigen::Index b = 1; b < st.cdf.size(); ++b) CHECK(st.cdf[b] >= st.cdf[b - 1]);
}

TEST_CASE("destinations follow the initial weights") {
    // jump-ever probability equals the initial weight on n = 1
    ModelSpec spec = qubit_dephasing_toy(DephasingVariant::Number, 1.0);
    BlockedModel bm = build_blocked(spec);
    UnravelingConfig cfg;
    cfg.t_max = 50.0;
    cfg.seed = 4;
    const int n = 4000;
    EnsembleResult ens = run_ensemble(bm, cfg, n, 1);
    EnsembleFreezeStats st = ensemble_stats(ens.records, 0, RealVector());
    REQUIRE(st.frozen_count == n);
    double frac1 = static_cast<double>(st.destination_counts[1]) / n;
    double se = std::sqrt(0.25 / n);
    CHECK(std::abs(frac1 - 0.5) < 4.0 * se);
    CHECK(st.destination_counts[0] + st.destination_counts[1] == st.frozen_count);
}

TEST_CASE("gap sweep recovers the inverse-gap scaling on the dephasing toy") {
    // destination n = 0 only freezes by weight decay at rate gamma, and the
    // (0,1) sector gap is gamma/2, so t_f ~ ln(1/eps)/gamma = c / gap exactly
    auto family = [](double gamma) {
        return model_from_json(nlohmann::json{
            {"name", "qubit_number"}, {"params", {{"gamma", gamma}}}});
    };
    UnravelingConfig cfg;
    cfg.t_max = 150.0;
    cfg.seed = 123;
    std::vector<double> gammas{0.4, 0.6, 0.8, 1.2};
    GapSweepResult res = freeze_time_vs_gap(family, gammas, {0, 1}, 150, cfg, 1);
    REQUIRE(res.rows.size() == 4);
    for (const auto& r : res.rows) {
        CHECK(r.gap == doctest::Approx(r.gamma / 2.0));
        CHECK_FALSE(r.divergent);
        CHECK(r.frozen == r.total);
    }
    REQUIRE(res.fit_valid);
    CHECK(res.fitted_slope == doctest::Approx(1.0).epsilon(0.15));
    CHECK(res.fitted_constant > 0.0);
}

TEST_CASE("single grid point gives no fit") {
    auto family = [](double gamma) {
        return model_from_json(nlohmann::json{
            {"name", "qubit_number"}, {"params", {{"gamma", gamma}}}});
    };
    UnravelingConfig cfg;
    cfg.t_max = 100.0;
    cfg.seed = 1;
    GapSweepResult res = freeze_time_vs_gap(family, {1.0}, {0, 1}, 20, cfg, 1);
    CHECK_FALSE(res.fit_valid);
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
    std::vector<double> a{1, 2, 3, 4, 5};
    CHECK(ks_statistic(a, a) == doctest::Approx(0.0));
    std::vector<double> b{11, 12, 13, 14, 15};
    CHECK(ks_statistic(a, b) == doctest::Approx(1.0));
    std::vector<double> c{1, 2, 3, 4, 10};
    CHECK(ks_statistic(a, c) == doctest::Approx(0.2));
    CHECK_THROWS_AS(ks_statistic({}, a), StructuralError);
}
