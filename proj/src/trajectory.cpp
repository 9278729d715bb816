#include "qtraj/trajectory.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace qtraj {

EffectiveHamiltonian EffectiveHamiltonian::build(
    const Matrix& h, const std::vector<std::pair<Matrix, double>>& jumps) {
    EffectiveHamiltonian he;
    he.matrix = h;
    for (const auto& [l, g] : jumps) he.matrix -= Complex(0, 0.5 * g) * (l.adjoint() * l);
    return he;
}

double EffectiveHamiltonian::max_gain() const {
    // i(H_eff - H_eff^dag) = sum_j gamma_j L_j^dag L_j: the decay operator.
    // A negative eigenvalue of it is norm gain.
    Matrix decay = Complex(0, 1) * (matrix - matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(decay);
    return -es.eigenvalues().minCoeff();
}

TrajectoryState step(const TrajectoryState& state, const EffectiveHamiltonian& heff,
                     const std::vector<std::pair<Matrix, double>>& jumps,
                     const UnravelingConfig& cfg, SplitMix64& rng) {
    const double dt = cfg.dt;
    const std::size_t m_jumps = jumps.size();

    std::vector<Vector> jumped(m_jumps);
    std::vector<double> p(m_jumps);
    double psum = 0.0;
    for (std::size_t j = 0; j < m_jumps; ++j) {
        const auto& [l, g] = jumps[j];
        require(g >= 0.0, "step: negative jump rate");
        jumped[j] = l * state.psi;
        p[j] = g * dt * jumped[j].squaredNorm();
        psum += p[j];
    }
    if (psum > 1.0) {
        std::ostringstream os;
        os << "step: total jump probability " << psum
           << " exceeds 1; timestep too large for the first-order scheme";
        throw NumericalError(os.str());
    }

    TrajectoryState next = state;
    const long step_index = std::lround(state.t / dt);
    double r = rng.uniform();
    double acc = 0.0;
    int branch = -1;  // -1 = no-jump
    for (std::size_t j = 0; j < m_jumps; ++j) {
        acc += p[j];
        if (r < acc) { branch = static_cast<int>(j); break; }
    }

    if (branch >= 0) {
        double nrm = jumped[static_cast<std::size_t>(branch)].norm();
        if (nrm < 1e-14)
            throw NumericalError("step: jump onto a numerically zero vector");
        next.psi = jumped[static_cast<std::size_t>(branch)] / nrm;
        next.jump_count += 1;
        next.jump_log.emplace_back(step_index, branch);
    } else {
        Vector v = state.psi - Complex(0, dt) * (heff.matrix * state.psi);
        next.psi = v / v.norm();
    }
    next.t = state.t + dt;
    return next;
}

Vector draw_initial_state(const BlockedModel& model, SplitMix64& rng) {
    Vector psi = Vector::Zero(model.dim);
    if (model.init_vector) {
        psi = *model.init_vector;
        double n = psi.norm();
        require(n > 0, "draw_initial_state: zero initial vector");
        return psi / n;
    }
    const double w = 1.0 / std::sqrt(static_cast<double>(model.init_subspaces.size()));
    for (int a : model.init_subspaces) {
        const int d = model.dim_of(a);
        const int off = model.offset[static_cast<std::size_t>(a)];
        Vector seg(d);
        for (int i = 0; i < d; ++i) seg[i] = rng.complex_gaussian();
        psi.segment(off, d) = w * seg / seg.norm();
    }
    return psi;
}

namespace {

struct Engine {
    const BlockedModel& bm;
    const UnravelingConfig& cfg;

    int n_sub;
    std::vector<Matrix> nojump;              // per subspace: 1 - i H_eff dt
    std::vector<std::vector<Matrix>> jmp;    // [j][alpha]: sqrt(gamma_j dt) L_j block
    std::vector<int> live;                   // subspaces with finite weight

    std::vector<Vector> psi_hat;             // unit vector per subspace
    std::vector<Vector> vbuf, wbuf;
    RealVector u;                            // normalized subspace probabilities
    WeightLedger ledger;
    ProductTracker tracker;
    std::vector<std::vector<int>> cutoff_local;  // per subspace, local cutoff indices

    TrajectoryRecord rec;
    double t = 0.0;
    long n_steps_total = 0;
    bool frozen = false;
    double freeze_time = -1.0;
    int destination = -1;

    std::vector<double> times_v;
    std::vector<RealVector> logw_rows, p_rows;

    Engine(const BlockedModel& model, const UnravelingConfig& config)
        : bm(model), cfg(config), n_sub(model.n_subspaces()) {
        // branch operators include the sqrt(gamma dt) / dt prefactors
        nojump.resize(static_cast<std::size_t>(n_sub));
        for (int a = 0; a < n_sub; ++a) {
            Matrix heff = bm.h_blocks[static_cast<std::size_t>(a)];
            for (std::size_t j = 0; j < bm.jump_blocks.size(); ++j) {
                const Matrix& l = bm.jump_blocks[j][static_cast<std::size_t>(a)];
                heff -= Complex(0, 0.5 * bm.rates[j]) * (l.adjoint() * l);
            }
            nojump[static_cast<std::size_t>(a)] =
                Matrix::Identity(bm.dim_of(a), bm.dim_of(a)) - Complex(0, cfg.dt) * heff;
        }
        jmp.resize(bm.jump_blocks.size());
        for (std::size_t j = 0; j < bm.jump_blocks.size(); ++j) {
            double pref = std::sqrt(bm.rates[j] * cfg.dt);
            for (int a = 0; a < n_sub; ++a)
                jmp[j].push_back(pref * bm.jump_blocks[j][static_cast<std::size_t>(a)]);
        }
        psi_hat.resize(static_cast<std::size_t>(n_sub));
        vbuf.resize(static_cast<std::size_t>(n_sub));
        wbuf.resize(static_cast<std::size_t>(n_sub));
        for (int a = 0; a < n_sub; ++a) {
            vbuf[static_cast<std::size_t>(a)].resize(bm.dim_of(a));
            wbuf[static_cast<std::size_t>(a)].resize(bm.dim_of(a));
        }

        if (!bm.cutoff_indices.empty()) {
            cutoff_local.resize(static_cast<std::size_t>(n_sub));
            auto owner = bm.structure.index_to_subspace();
            for (int idx : bm.cutoff_indices) {
                int a = owner[static_cast<std::size_t>(idx)];
                cutoff_local[static_cast<std::size_t>(a)].push_back(
                    idx - bm.offset[static_cast<std::size_t>(a)]);
            }
        }
    }

    void init_state(SplitMix64& rng) {
        Vector psi0 = draw_initial_state(bm, rng);
        RealVector logw0 = RealVector::Constant(n_sub, neg_inf());
        u = RealVector::Zero(n_sub);
        live.clear();
        for (int a = 0; a < n_sub; ++a) {
            Vector seg = psi0.segment(bm.offset[static_cast<std::size_t>(a)], bm.dim_of(a));
            double q = seg.squaredNorm();
            if (q <= 0) continue;
            logw0[a] = std::log(q);
            u[a] = q;
            psi_hat[static_cast<std::size_t>(a)] = seg / std::sqrt(q);
            live.push_back(a);
        }
        u /= u.sum();
        ledger.init(logw0);
        if (cfg.track_products) {
            tracker.rescale_stride = cfg.rescale_stride;
            tracker.init(bm.structure);
        }
    }

    void fold_and_check() {
        ledger.fold();
        RealVector p = ledger.probabilities();
        for (int a = 0; a < n_sub; ++a) u[a] = p[a];
        if (!frozen) {
            Eigen::Index amax;
            double pmax = p.maxCoeff(&amax);
            if (pmax >= 1.0 - cfg.freeze_epsilon) {
                frozen = true;
                freeze_time = t;
                destination = static_cast<int>(amax);
            }
        }
    }

    void record_sample() {
        times_v.push_back(t);
        logw_rows.push_back(ledger.log_w);
        p_rows.push_back(ledger.probabilities());
        if (cfg.track_products) rec.singulars.push_back(tracker.snapshot(t));
        if (!cutoff_local.empty()) {
            double leak = 0.0;
            for (int a : live) {
                const auto& lix = cutoff_local[static_cast<std::size_t>(a)];
                if (lix.empty()) continue;
                double m = 0.0;
                for (int i : lix) m += std::norm(psi_hat[static_cast<std::size_t>(a)][i]);
                leak += u[a] * m;
            }
            rec.cutoff_leakage_max = std::max(rec.cutoff_leakage_max, leak);
        }
    }

    // returns false when an early stop was requested
    bool do_step(SplitMix64& rng, long step_index) {
        const std::size_t m_jumps = jmp.size();
        double psum = 0.0;
        double pj[8];  // all models here have few jump operators
        require(m_jumps <= 8, "engine: too many jump operators");
        for (std::size_t j = 0; j < m_jumps; ++j) {
            double pjv = 0.0;
            for (int a : live) {
                auto& v = vbuf[static_cast<std::size_t>(a)];
                v.noalias() = jmp[j][static_cast<std::size_t>(a)] * psi_hat[static_cast<std::size_t>(a)];
                pjv += u[a] * v.squaredNorm();
            }
            pj[j] = pjv;
            psum += pjv;
        }
        if (psum > 1.0) {
            std::ostringstream os;
            os << "total jump probability " << psum
               << " exceeds 1; timestep too large for the first-order scheme";
            throw NumericalError(os.str());
        }

        double r = rng.uniform();
        int branch = -1;
        double acc = 0.0;
        for (std::size_t j = 0; j < m_jumps; ++j) {
            acc += pj[j];
            if (r < acc) { branch = static_cast<int>(j); break; }
        }

        if (branch >= 0) {
            // vbuf holds the last jump operator applied; recompute if needed
            if (branch != static_cast<int>(m_jumps) - 1) {
                for (int a : live)
                    vbuf[static_cast<std::size_t>(a)].noalias() =
                        jmp[static_cast<std::size_t>(branch)][static_cast<std::size_t>(a)] *
                        psi_hat[static_cast<std::size_t>(a)];
            }
            if (pj[branch] < 1e-28)
                throw NumericalError("jump onto a numerically zero vector");
            std::vector<int> still;
            still.reserve(live.size());
            double usum = 0.0;
            for (int a : live) {
                auto& v = vbuf[static_cast<std::size_t>(a)];
                double g = v.squaredNorm();
                if (g <= 0.0) {
                    ledger.kill(a);
                    u[a] = 0.0;
                    continue;
                }
                ledger.accumulate(a, g);
                u[a] *= g;
                usum += u[a];
                psi_hat[static_cast<std::size_t>(a)] = v / std::sqrt(g);
                still.push_back(a);
            }
            live.swap(still);
            if (live.empty()) throw NumericalError("state annihilated by jump");
            u /= usum;
            rec.jump_log.emplace_back(step_index, branch);
            if (cfg.track_products)
                for (std::size_t a = 0; a < tracker.b.size(); ++a)
                    if (!tracker.annihilated[a])
                        tracker.update_block(static_cast<int>(a),
                                             jmp[static_cast<std::size_t>(branch)][a]);
        } else {
            double usum = 0.0;
            for (int a : live) {
                auto& w = wbuf[static_cast<std::size_t>(a)];
                w.noalias() = nojump[static_cast<std::size_t>(a)] * psi_hat[static_cast<std::size_t>(a)];
                double g = w.squaredNorm();
                ledger.accumulate(a, g);
                u[a] *= g;
                usum += u[a];
                psi_hat[static_cast<std::size_t>(a)] = w / std::sqrt(g);
            }
            u /= usum;
            if (cfg.track_products)
                for (std::size_t a = 0; a < tracker.b.size(); ++a)
                    if (!tracker.annihilated[a])
                        tracker.update_block(static_cast<int>(a), nojump[a]);
        }
        if (cfg.track_products) tracker.step_done();
        t += cfg.dt;
        return true;
    }

    Vector assemble_state() const {
        Vector psi = Vector::Zero(bm.dim);
        for (int a : live)
            psi.segment(bm.offset[static_cast<std::size_t>(a)], bm.dim_of(a)) =
                std::sqrt(u[a]) * psi_hat[static_cast<std::size_t>(a)];
        return psi;
    }

    void run(SplitMix64& rng, const std::vector<TrajectoryObserver*>& observers) {
        init_state(rng);
        fold_and_check();
        record_sample();
        for (auto* o : observers) o->on_record(t, ledger.log_w, ledger.probabilities());

        const long total_steps = std::llround(cfg.t_max / cfg.dt);
        const double grace = cfg.grace_fraction * cfg.t_max;
        for (long s = 0; s < total_steps; ++s) {
            try {
                do_step(rng, s);
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << e.what() << " (at step " << s << ", t = " << t << ")";
                throw NumericalError(os.str());
            }
            ++n_steps_total;
            bool checkpoint = ((s + 1) % cfg.check_stride == 0) || (s + 1 == total_steps);
            bool record = ((s + 1) % cfg.record_stride == 0) || (s + 1 == total_steps);
            if (checkpoint || record) fold_and_check();
            if (record) {
                record_sample();
                bool stop_req = false;
                RealVector p = ledger.probabilities();
                for (auto* o : observers) {
                    o->on_record(t, ledger.log_w, p);
                    stop_req = stop_req || o->request_stop();
                }
                if (stop_req) break;
            }
            if (cfg.early_stop && frozen && t >= freeze_time + grace) {
                if (!record) { fold_and_check(); record_sample(); }
                break;
            }
        }
        finalize();
    }

    void finalize() {
        rec.n_steps = n_steps_total;
        const std::size_t n = times_v.size();
        rec.times = Eigen::Map<const RealVector>(times_v.data(), static_cast<Eigen::Index>(n));
        rec.log_w.resize(static_cast<Eigen::Index>(n), n_sub);
        rec.p.resize(static_cast<Eigen::Index>(n), n_sub);
        for (std::size_t i = 0; i < n; ++i) {
            rec.log_w.row(static_cast<Eigen::Index>(i)) = logw_rows[i];
            rec.p.row(static_cast<Eigen::Index>(i)) = p_rows[i];
        }
        rec.freeze = detect_freeze(rec.times, rec.log_w, cfg.freeze_epsilon,
                                   cfg.nonfreeze_band_log);
        // online detection has finer resolution than the recorded samples
        rec.freeze.frozen = frozen;
        rec.freeze.destination = destination;
        rec.freeze.freeze_time = frozen ? freeze_time : -1.0;
        if (cfg.store_final_state) rec.final_psi = assemble_state();
    }
};

}  // namespace

TrajectoryRecord run_trajectory(const BlockedModel& model, const UnravelingConfig& cfg,
                                const std::vector<TrajectoryObserver*>& observers) {
    cfg.validate();
    Engine eng(model, cfg);
    SplitMix64 rng(cfg.seed);
    eng.rec.seed = cfg.seed;
    eng.run(rng, observers);
    return std::move(eng.rec);
}

EnsembleResult run_ensemble(const BlockedModel& model, const UnravelingConfig& cfg,
                            int n_traj, int n_threads) {
    require(n_traj >= 1, "run_ensemble: n_traj must be >= 1");
    cfg.validate();
    EnsembleResult out;
    out.records.resize(static_cast<std::size_t>(n_traj));

    auto run_one = [&](int i) {
        UnravelingConfig c = cfg;
        c.seed = SplitMix64::split(cfg.seed, static_cast<std::uint64_t>(i));
        try {
            out.records[static_cast<std::size_t>(i)] = run_trajectory(model, c);
        } catch (const std::exception& e) {
            auto& r = out.records[static_cast<std::size_t>(i)];
            r.seed = c.seed;
            r.failed = true;
            r.error = e.what();
        }
    };

    if (n_threads <= 1) {
        for (int i = 0; i < n_traj; ++i) run_one(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n_traj; i = next.fetch_add(1)) run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (int i = 0; i < n_traj; ++i) {
        const auto& r = out.records[static_cast<std::size_t>(i)];
        if (r.failed)
            out.failures.push_back("trajectory " + std::to_string(i) + ": " + r.error);
    }
    return out;
}

Matrix ensemble_density_matrix(const std::vector<TrajectoryRecord>& records) {
    require(!records.empty(), "ensemble_density_matrix: no records");
    Matrix rho;
    long count = 0;
    for (const auto& r : records) {
        if (r.failed) continue;
        require(r.final_psi.has_value(),
                "ensemble_density_matrix: records lack final states "
                "(run with store_final_state)");
        if (rho.size() == 0) rho = Matrix::Zero(r.final_psi->size(), r.final_psi->size());
        rho.noalias() += (*r.final_psi) * r.final_psi->adjoint();
        ++count;
    }
    require(count > 0, "ensemble_density_matrix: all trajectories failed");
    return rho / static_cast<double>(count);
}

}  // namespace qtraj
