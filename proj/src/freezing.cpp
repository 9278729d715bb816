#include "qtraj/freezing.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace qtraj {

double logsumexp(const RealVector& x) {
    double m = neg_inf();
    for (Eigen::Index i = 0; i < x.size(); ++i) m = std::max(m, x[i]);
    if (std::isinf(m)) return neg_inf();
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isinf(x[i])) s += std::exp(x[i] - m);
    return m + std::log(s);
}

RealVector WeightLedger::probabilities() const {
    RealVector p = RealVector::Zero(log_w.size());
    double lse = logsumexp(log_w);
    if (std::isinf(lse)) return p;
    for (Eigen::Index a = 0; a < log_w.size(); ++a)
        p[a] = std::isinf(log_w[a]) ? 0.0 : std::exp(log_w[a] - lse);
    return p;
}

void update_weights(WeightLedger& ledger, const Vector& pre, const Vector& post,
                    const BlockStructure& structure) {
    for (int a = 0; a < structure.n_subspaces(); ++a) {
        if (std::isinf(ledger.log_w[a])) continue;
        const auto& ix = structure.at(a).indices;
        double qpre = 0.0, qpost = 0.0;
        for (int idx : ix) {
            qpre += std::norm(pre[idx]);
            qpost += std::norm(post[idx]);
        }
        if (qpre == 0.0 || qpost == 0.0) {
            ledger.kill(a);
            continue;
        }
        ledger.accumulate(a, qpost / qpre);
    }
    ledger.fold();
}

void ProductTracker::init(const BlockStructure& s) {
    b.clear();
    for (int a = 0; a < s.n_subspaces(); ++a)
        b.push_back(Matrix::Identity(s.at(a).dim(), s.at(a).dim()));
    log_scale = RealVector::Zero(s.n_subspaces());
    annihilated.assign(static_cast<std::size_t>(s.n_subspaces()), 0);
    steps_since_rescale = 0;
}

void ProductTracker::step_done() {
    if (++steps_since_rescale < rescale_stride) return;
    steps_since_rescale = 0;
    for (std::size_t a = 0; a < b.size(); ++a) {
        if (annihilated[a]) continue;
        double n = b[a].norm();
        if (n < 1e-300) {
            annihilated[a] = 1;
            continue;
        }
        b[a] /= n;
        log_scale[static_cast<Eigen::Index>(a)] += std::log(n);
    }
}

void update_product(ProductTracker& tracker, const std::vector<Matrix>& branch_blocks) {
    for (std::size_t a = 0; a < tracker.b.size(); ++a)
        if (!tracker.annihilated[a]) tracker.update_block(static_cast<int>(a), branch_blocks[a]);
    tracker.step_done();
}

SingularSnapshot ProductTracker::snapshot(double t) const {
    SingularSnapshot s;
    s.t = t;
    for (std::size_t a = 0; a < b.size(); ++a) {
        if (annihilated[a]) {
            s.log_sv.push_back(RealVector::Constant(b[a].rows(), neg_inf()));
            continue;
        }
        Eigen::JacobiSVD<Matrix> svd(b[a]);
        RealVector sv = svd.singularValues();
        RealVector logsv(sv.size());
        for (Eigen::Index q = 0; q < sv.size(); ++q)
            logsv[q] = sv[q] > 0 ? std::log(sv[q]) + log_scale[static_cast<Eigen::Index>(a)]
                                 : neg_inf();
        s.log_sv.push_back(std::move(logsv));
    }
    return s;
}

FreezeReport detect_freeze(const RealVector& times, const RealMatrix& log_w_history,
                           double epsilon, double band_log) {
    require(times.size() > 0 && times.size() == log_w_history.rows(),
            "detect_freeze: empty or inconsistent history");
    const Eigen::Index n = times.size();
    const Eigen::Index d = log_w_history.cols();

    FreezeReport rep;
    const double log_thresh = std::log1p(-epsilon);  // log(1 - epsilon)
    for (Eigen::Index i = 0; i < n; ++i) {
        RealVector row = log_w_history.row(i);
        double lse = logsumexp(row);
        Eigen::Index amax = 0;
        double best = neg_inf();
        for (Eigen::Index a = 0; a < d; ++a)
            if (row[a] > best) { best = row[a]; amax = a; }
        if (best - lse >= log_thresh) {
            rep.frozen = true;
            rep.destination = static_cast<int>(amax);
            rep.freeze_time = times[i];
            break;
        }
    }

    {
        RealVector last = log_w_history.row(n - 1);
        double lse = logsumexp(last);
        rep.final_p = RealVector::Zero(d);
        for (Eigen::Index a = 0; a < d; ++a)
            rep.final_p[a] = std::isinf(last[a]) ? 0.0 : std::exp(last[a] - lse);
    }

    if (!rep.frozen) {
        // pairs whose log-weight gap stayed bounded over the final third
        Eigen::Index start = (2 * n) / 3;
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index ap = a + 1; ap < d; ++ap) {
                bool bounded = true;
                for (Eigen::Index i = start; i < n; ++i) {
                    double wa = log_w_history(i, a), wb = log_w_history(i, ap);
                    if (std::isinf(wa) || std::isinf(wb) || std::abs(wa - wb) > band_log) {
                        bounded = false;
                        break;
                    }
                }
                if (bounded)
                    rep.non_freezing_pairs.emplace_back(static_cast<int>(a),
                                                        static_cast<int>(ap));
            }
        }
    }
    return rep;
}

}  // namespace qtraj
