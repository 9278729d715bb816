// freezing.hpp — per-trajectory freezing bookkeeping: log-domain subspace
// weights, evolution-product singular-value tracking, freeze detection.

#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/symmetry.hpp"

namespace qtraj {

inline double neg_inf() { return -std::numeric_limits<double>::infinity(); }

// log(sum exp(x_i)) over finite entries; -inf if none.
double logsumexp(const RealVector& x);

// Per-subspace un-normalized weights, kept in log domain (they span hundreds
// of orders of magnitude). Between folds, growth factors accumulate in a
// linear buffer so the hot loop multiplies instead of taking logs.
struct WeightLedger {
    RealVector log_w;  // -inf is the absorbing "subspace annihilated" sentinel
    RealVector acc;    // linear growth accumulated since the last fold

    void init(const RealVector& log_w0) {
        log_w = log_w0;
        acc = RealVector::Ones(log_w0.size());
    }

    void accumulate(int alpha, double growth) { acc[alpha] *= growth; }

    void kill(int alpha) {
        log_w[alpha] = neg_inf();
        acc[alpha] = 1.0;
    }

    // Push accumulated growth into log_w.
    void fold() {
        for (Eigen::Index a = 0; a < log_w.size(); ++a) {
            if (std::isinf(log_w[a])) continue;
            log_w[a] += std::log(acc[a]);
            acc[a] = 1.0;
        }
    }

    // Normalized probabilities p(alpha) = exp(log_w - logsumexp). Call after
    // fold().
    RealVector probabilities() const;
};

// Advances the ledger from the states before/after one step: the growth in
// subspace alpha is |X_alpha psi_alpha|^2 / |psi_alpha|^2, independent of any
// shared normalization. `post` is the un-renormalized result of applying the
// branch operator to `pre`.
void update_weights(WeightLedger& ledger, const Vector& pre, const Vector& post,
                    const BlockStructure& structure);

// Snapshot of the evolution-product singular values, in log scale, descending.
struct SingularSnapshot {
    double t = 0.0;
    std::vector<RealVector> log_sv;  // one vector per subspace
};

// Tracks B_alpha, a rescaled copy of the running product A_alpha(t) of branch
// operator blocks, with the rescaling logs accumulated separately.
struct ProductTracker {
    std::vector<Matrix> b;
    RealVector log_scale;
    std::vector<char> annihilated;
    int rescale_stride = 100;
    int steps_since_rescale = 0;

    void init(const BlockStructure& s);
    // Left-multiply subspace alpha's product by this step's branch block.
    void update_block(int alpha, const Matrix& x) { b[static_cast<std::size_t>(alpha)] = x * b[static_cast<std::size_t>(alpha)]; }
    // Rescale by Frobenius norm when the stride elapses; marks a subspace
    // annihilated if its product has vanished.
    void step_done();
    SingularSnapshot snapshot(double t) const;
};

void update_product(ProductTracker& tracker,
                    const std::vector<Matrix>& branch_blocks);

struct FreezeReport {
    bool frozen = false;
    int destination = -1;
    double freeze_time = -1.0;
    RealVector final_p;
    // pairs whose weight ratio stayed inside the band over the final third
    std::vector<std::pair<int, int>> non_freezing_pairs;
};

// Post-hoc detection on a recorded history: rows of `log_w_history` are
// samples at `times`. First time max p >= 1 - epsilon wins; otherwise the
// non-freezing pairs are those whose |log w difference| stayed within
// band_log over the final third of the run.
FreezeReport detect_freeze(const RealVector& times, const RealMatrix& log_w_history,
                           double epsilon, double band_log = std::log(1e2));

}  // namespace qtraj
