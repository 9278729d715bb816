// trajectory.hpp — first-order Monte Carlo unraveling engine.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/freezing.hpp"
#include "qtraj/model.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

struct UnravelingConfig {
    double dt = 0.001;        // in units of 1/omega
    double t_max = 100.0;
    int record_stride = 100;  // steps between recorded samples
    std::uint64_t seed = 0;
    double freeze_epsilon = 1e-10;

    double grace_fraction = 0.1;  // post-freeze confirmation window, as fraction of t_max
    bool early_stop = true;
    bool track_products = false;
    int rescale_stride = 100;
    int check_stride = 32;        // ledger fold / freeze-check cadence
    bool store_final_state = false;
    double nonfreeze_band_log = std::log(1e2);

    void validate() const {
        require(dt > 0, "UnravelingConfig: dt must be > 0");
        require(t_max > 0, "UnravelingConfig: t_max must be > 0");
        require(record_stride > 0, "UnravelingConfig: record_stride must be > 0");
        require(freeze_epsilon > 0 && freeze_epsilon < 1,
                "UnravelingConfig: freeze_epsilon must be in (0,1)");
        require(rescale_stride > 0 && check_stride > 0,
                "UnravelingConfig: strides must be positive");
    }
};

struct TrajectoryState {
    Vector psi;
    double t = 0.0;
    long jump_count = 0;
    std::vector<std::pair<long, int>> jump_log;  // (step index, jump operator index)
};

struct EffectiveHamiltonian {
    Matrix matrix;  // H - (i/2) sum_j gamma_j L_j^dag L_j

    static EffectiveHamiltonian build(const Matrix& h,
                                      const std::vector<std::pair<Matrix, double>>& jumps);
    // largest norm-gain rate, -min eig of i(H_eff - H_eff^dag); a valid
    // dissipator gives <= 0 up to roundoff
    double max_gain() const;
};

// One step of the reference (full-matrix) unraveling. The engine below takes
// a faster blockwise path; this one exists as its cross-check and as the
// literal form of the scheme. Consumes exactly one uniform draw.
TrajectoryState step(const TrajectoryState& state, const EffectiveHamiltonian& heff,
                     const std::vector<std::pair<Matrix, double>>& jumps,
                     const UnravelingConfig& cfg, SplitMix64& rng);

// Haar-random component in each init subspace with equal weights, or the
// model's explicit initial vector. Consumes one complex gaussian per
// init-subspace dimension; nothing when the vector is explicit.
Vector draw_initial_state(const BlockedModel& model, SplitMix64& rng);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    RealVector times;
    RealMatrix log_w;  // samples x n_subspaces
    RealMatrix p;
    std::vector<std::pair<long, int>> jump_log;
    long n_steps = 0;
    FreezeReport freeze;
    std::vector<SingularSnapshot> singulars;  // only when track_products
    double cutoff_leakage_max = 0.0;
    std::optional<Vector> final_psi;  // block basis, when store_final_state

    bool failed = false;
    std::string error;
};

struct TrajectoryObserver {
    virtual ~TrajectoryObserver() = default;
    virtual void on_record(double t, const RealVector& log_w, const RealVector& p) {}
    virtual bool request_stop() { return false; }
};

TrajectoryRecord run_trajectory(const BlockedModel& model, const UnravelingConfig& cfg,
                                const std::vector<TrajectoryObserver*>& observers = {});

struct EnsembleResult {
    std::vector<TrajectoryRecord> records;
    std::vector<std::string> failures;  // annotated per-trajectory error manifest
};

// Trajectory i runs with seed split(cfg.seed, i); results are independent of
// worker count and scheduling.
EnsembleResult run_ensemble(const BlockedModel& model, const UnravelingConfig& cfg,
                            int n_traj, int n_threads = 1);

// (1/N) sum |psi><psi| over final states (requires store_final_state).
Matrix ensemble_density_matrix(const std::vector<TrajectoryRecord>& records);

}  // namespace qtraj
