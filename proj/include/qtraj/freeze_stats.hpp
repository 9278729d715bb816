// freeze_stats.hpp — ensemble-level freezing statistics and the
// freeze-time-vs-spectral-gap sweep.

#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qtraj/trajectory.hpp"

namespace qtraj {

struct EnsembleFreezeStats {
    RealVector bin_left, bin_right, pdf, cdf;  // freeze-time histogram
    long frozen_count = 0;
    long unfrozen_count = 0;  // overflow bin, excluded from the mean
    double mean_freeze_time = 0.0;
    double stderr_freeze_time = 0.0;
    std::vector<long> destination_counts;  // per subspace
    RealVector snapshot_times;
    std::vector<RealMatrix> coherence;  // C(t): mean p(alpha,t) p(alpha',t)
};

// n_bins <= 0 selects Freedman-Diaconis binning on the observed freeze times.
// Snapshot times are matched to the nearest recorded sample of each record.
EnsembleFreezeStats ensemble_stats(const std::vector<TrajectoryRecord>& records,
                                   int n_bins, const RealVector& snapshot_times);

struct GapSweepRow {
    double gamma = 0.0;
    double gap = 0.0;  // inter-sector spectral gap Delta
    double mean_freeze_time = 0.0;
    double stderr_freeze_time = 0.0;
    long frozen = 0;
    long total = 0;
    bool divergent = false;  // no (or almost no) trajectories froze
};

struct GapSweepResult {
    std::vector<GapSweepRow> rows;
    bool fit_valid = false;
    double fitted_slope = 0.0;        // free fit of log t_f vs log(1/Delta)
    double fitted_constant = 0.0;     // c in t_f ~ c/Delta, slope-1 constrained
};

// For each gamma: builds the model, computes the inter-sector gap of `pair`,
// runs an ensemble initialized across the pair, and records the mean freeze
// time. The fit uses every non-divergent row.
GapSweepResult freeze_time_vs_gap(const std::function<ModelSpec(double)>& family,
                                  const std::vector<double>& gammas,
                                  std::pair<int, int> pair, int n_traj,
                                  const UnravelingConfig& cfg_template,
                                  int n_threads = 1);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace qtraj
