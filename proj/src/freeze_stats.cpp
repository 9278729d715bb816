#include "qtraj/freeze_stats.hpp"

#include <algorithm>
#include <cmath>

#include "qtraj/liouvillian.hpp"

namespace qtraj {

namespace {

// Freedman-Diaconis bin width; falls back to a fixed count for tiny or
// degenerate samples.
int fd_bin_count(std::vector<double> x) {
    if (x.size() < 4) return 10;
    std::sort(x.begin(), x.end());
    auto quant = [&](double q) {
        double pos = q * static_cast<double>(x.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        return lo + 1 < x.size() ? x[lo] * (1 - frac) + x[lo + 1] * frac : x[lo];
    };
    double iqr = quant(0.75) - quant(0.25);
    double span = x.back() - x.front();
    if (iqr <= 0 || span <= 0) return 10;
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(x.size()));
    int bins = static_cast<int>(std::ceil(span / width));
    return std::clamp(bins, 1, 400);
}

}  // namespace

EnsembleFreezeStats ensemble_stats(const std::vector<TrajectoryRecord>& records,
                                   int n_bins, const RealVector& snapshot_times) {
    require(!records.empty(), "ensemble_stats: empty record list");

    EnsembleFreezeStats st;
    int n_sub = 0;
    std::vector<double> ftimes;
    for (const auto& r : records) {
        if (r.failed) continue;
        n_sub = static_cast<int>(r.p.cols());
        if (r.freeze.frozen) ftimes.push_back(r.freeze.freeze_time);
        else ++st.unfrozen_count;
    }
    require(n_sub > 0, "ensemble_stats: no healthy records");
    st.frozen_count = static_cast<long>(ftimes.size());

    st.destination_counts.assign(static_cast<std::size_t>(n_sub), 0);
    for (const auto& r : records)
        if (!r.failed && r.freeze.frozen)
            ++st.destination_counts[static_cast<std::size_t>(r.freeze.destination)];

    if (!ftimes.empty()) {
        double mean = 0.0;
        for (double f : ftimes) mean += f;
        mean /= static_cast<double>(ftimes.size());
        double var = 0.0;
        for (double f : ftimes) var += (f - mean) * (f - mean);
        var = ftimes.size() > 1 ? var / static_cast<double>(ftimes.size() - 1) : 0.0;
        st.mean_freeze_time = mean;
        st.stderr_freeze_time = std::sqrt(var / static_cast<double>(ftimes.size()));

        int bins = n_bins > 0 ? n_bins : fd_bin_count(ftimes);
        double lo = *std::min_element(ftimes.begin(), ftimes.end());
        double hi = *std::max_element(ftimes.begin(), ftimes.end());
        if (hi <= lo) hi = lo + 1.0;
        st.bin_left.resize(bins);
        st.bin_right.resize(bins);
        st.pdf = RealVector::Zero(bins);
        double w = (hi - lo) / bins;
        for (int b = 0; b < bins; ++b) {
            st.bin_left[b] = lo + b * w;
            st.bin_right[b] = lo + (b + 1) * w;
        }
        for (double f : ftimes) {
            int b = std::min(bins - 1, static_cast<int>((f - lo) / w));
            st.pdf[std::max(0, b)] += 1.0;
        }
        st.cdf = RealVector::Zero(bins);
        double run = 0.0;
        for (int b = 0; b < bins; ++b) {
            run += st.pdf[b];
            st.cdf[b] = run / static_cast<double>(ftimes.size());
            st.pdf[b] /= static_cast<double>(ftimes.size()) * w;  // density
        }
    }

    st.snapshot_times = snapshot_times;
    for (Eigen::Index si = 0; si < snapshot_times.size(); ++si) {
        RealMatrix c = RealMatrix::Zero(n_sub, n_sub);
        long count = 0;
        for (const auto& r : records) {
            if (r.failed || r.times.size() == 0) continue;
            // nearest recorded sample
            Eigen::Index best = 0;
            double bd = std::abs(r.times[0] - snapshot_times[si]);
            for (Eigen::Index i = 1; i < r.times.size(); ++i) {
                double d = std::abs(r.times[i] - snapshot_times[si]);
                if (d < bd) { bd = d; best = i; }
            }
            RealVector p = r.p.row(best);
            c.noalias() += p * p.transpose();
            ++count;
        }
        if (count > 0) c /= static_cast<double>(count);
        st.coherence.push_back(std::move(c));
    }
    return st;
}

GapSweepResult freeze_time_vs_gap(const std::function<ModelSpec(double)>& family,
                                  const std::vector<double>& gammas,
                                  std::pair<int, int> pair, int n_traj,
                                  const UnravelingConfig& cfg_template, int n_threads) {
    GapSweepResult out;
    for (double gamma : gammas) {
        ModelSpec spec = family(gamma);
        spec.initial_state.subspaces = {pair.first, pair.second};
        BlockedModel bm = build_blocked(spec);

        GapSweepRow row;
        row.gamma = gamma;
        row.gap = inter_sector_gap(bm, pair);

        EnsembleResult ens = run_ensemble(bm, cfg_template, n_traj, n_threads);
        RealVector no_snaps;
        EnsembleFreezeStats st = ensemble_stats(ens.records, 10, no_snaps);
        row.frozen = st.frozen_count;
        row.total = st.frozen_count + st.unfrozen_count;
        row.mean_freeze_time = st.mean_freeze_time;
        row.stderr_freeze_time = st.stderr_freeze_time;
        row.divergent = st.frozen_count < std::max<long>(1, row.total / 10);
        out.rows.push_back(row);
    }

    // fit log t_f = a + b log(1/Delta) on non-divergent rows
    std::vector<double> xs, ys;
    for (const auto& r : out.rows) {
        if (r.divergent || r.gap <= 0 || r.mean_freeze_time <= 0) continue;
        xs.push_back(std::log(1.0 / r.gap));
        ys.push_back(std::log(r.mean_freeze_time));
    }
    if (xs.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
        mx /= static_cast<double>(xs.size());
        my /= static_cast<double>(xs.size());
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        if (sxx > 0) {
            out.fit_valid = true;
            out.fitted_slope = sxy / sxx;
            // slope-1 constrained: log c = mean(log t - log(1/Delta))
            out.fitted_constant = std::exp(my - mx);
        }
    }
    return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        // step both CDFs past the current value, so ties advance together
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace qtraj
