#include "qtraj/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

namespace qtraj {

void BlockStructure::validate() const {
    std::vector<char> seen(static_cast<std::size_t>(dim_total), 0);
    int count = 0;
    for (const auto& sub : subspaces) {
        for (int idx : sub.indices) {
            if (idx < 0 || idx >= dim_total)
                throw ValidationError("BlockStructure: index out of range");
            if (seen[static_cast<std::size_t>(idx)])
                throw ValidationError("BlockStructure: index appears twice");
            seen[static_cast<std::size_t>(idx)] = 1;
            ++count;
        }
    }
    if (count != dim_total)
        throw ValidationError("BlockStructure: indices do not exhaust the basis");
    for (std::size_t a = 0; a < subspaces.size(); ++a)
        for (std::size_t b = a + 1; b < subspaces.size(); ++b)
            if (subspaces[a].lambda == subspaces[b].lambda)
                throw ValidationError("BlockStructure: duplicate lambda");
}

std::vector<int> BlockStructure::index_to_subspace() const {
    std::vector<int> owner(static_cast<std::size_t>(dim_total), -1);
    for (int a = 0; a < n_subspaces(); ++a)
        for (int idx : subspaces[static_cast<std::size_t>(a)].indices)
            owner[static_cast<std::size_t>(idx)] = a;
    return owner;
}

bool BlockStructure::same_partition(const BlockStructure& other) const {
    if (dim_total != other.dim_total) return false;
    auto canon = [](const BlockStructure& s) {
        std::set<std::vector<int>> parts;
        for (const auto& sub : s.subspaces) {
            auto ix = sub.indices;
            std::sort(ix.begin(), ix.end());
            parts.insert(ix);
        }
        return parts;
    };
    return canon(*this) == canon(other);
}

Matrix projector_matrix(const BlockStructure& s, int alpha) {
    const Subspace& sub = s.at(alpha);
    Matrix p = Matrix::Zero(s.dim_total, s.dim_total);
    for (int idx : sub.indices) p(idx, idx) = 1.0;
    return p;
}

Matrix project(const Matrix& op, const BlockStructure& s, int alpha) {
    const Subspace& sub = s.at(alpha);
    const int d = sub.dim();
    Matrix block(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            block(r, c) = op(sub.indices[static_cast<std::size_t>(r)],
                             sub.indices[static_cast<std::size_t>(c)]);
    return block;
}

BlockOperator BlockOperator::from_full(const Matrix& op, const BlockStructure& s,
                                       double off_block_tol) {
    require(op.rows() == op.cols() && op.rows() == s.dim_total,
            "BlockOperator: operator dimension does not match structure");
    BlockOperator bo;
    bo.structure = s;
    bo.blocks.reserve(static_cast<std::size_t>(s.n_subspaces()));
    for (int a = 0; a < s.n_subspaces(); ++a) bo.blocks.push_back(project(op, s, a));

    double scale = op.norm();
    double resid = (op - bo.reassemble()).norm();
    if (scale > 0 && resid > off_block_tol * scale)
        throw ValidationError("BlockOperator: operator has weight outside diagonal blocks (residual " +
                              std::to_string(resid / scale) + " of norm)");
    return bo;
}

Matrix BlockOperator::reassemble() const {
    const BlockStructure& s = structure;
    Matrix full = Matrix::Zero(s.dim_total, s.dim_total);
    for (int a = 0; a < s.n_subspaces(); ++a) {
        const Subspace& sub = s.at(a);
        const Matrix& blk = blocks[static_cast<std::size_t>(a)];
        for (int r = 0; r < sub.dim(); ++r)
            for (int c = 0; c < sub.dim(); ++c)
                full(sub.indices[static_cast<std::size_t>(r)],
                     sub.indices[static_cast<std::size_t>(c)]) = blk(r, c);
    }
    return full;
}

bool verify_strong_symmetry(const Matrix& H, const std::vector<Matrix>& jumps,
                            const Matrix& A, double tol) {
    require(H.rows() == H.cols(), "verify_strong_symmetry: H not square");
    require(A.rows() == A.cols() && A.rows() == H.rows(),
            "verify_strong_symmetry: A dimension mismatch");
    for (const auto& l : jumps)
        require(l.rows() == l.cols() && l.rows() == H.rows(),
                "verify_strong_symmetry: jump dimension mismatch");
    if (!is_hermitian(A, tol))
        throw ValidationError("verify_strong_symmetry: A is not Hermitian within tol");

    double scale = std::max(H.norm(), A.norm());
    for (const auto& l : jumps) scale = std::max(scale, l.norm());
    if (scale == 0.0) return true;

    auto commutes = [&](const Matrix& o) {
        return (o * A - A * o).norm() <= tol * scale;
    };
    if (!commutes(H)) return false;
    for (const auto& l : jumps) {
        if (!commutes(l)) return false;
        if (!commutes(l.adjoint().eval())) return false;
    }
    return true;
}

namespace {

// Group a sorted eigenvalue list: consecutive gap <= gtol joins a group. A
// group whose total spread exceeds gtol is an ambiguous chain.
std::vector<std::pair<int, int>> group_sorted(const RealVector& vals, double gtol) {
    std::vector<std::pair<int, int>> groups;  // [begin, end)
    int begin = 0;
    const int n = static_cast<int>(vals.size());
    for (int i = 1; i <= n; ++i) {
        if (i == n || vals[i] - vals[i - 1] > gtol) {
            if (vals[i - 1] - vals[begin] > gtol)
                throw ValidationError(
                    "block_structure_from_symmetry: ambiguous eigenvalue cluster "
                    "(chained gaps below tol with spread above tol)");
            groups.emplace_back(begin, i);
            begin = i;
        }
    }
    return groups;
}

}  // namespace

SymmetryBasis block_structure_from_symmetry(const Matrix& A, double tol) {
    require(A.rows() == A.cols(), "block_structure_from_symmetry: A not square");
    const int n = static_cast<int>(A.rows());
    double scale = A.norm();
    if (tol < 0) tol = 1e-9;
    double gtol = tol * std::max(scale, 1e-300);
    if (!is_hermitian(A, std::max(tol, 1e-10)))
        throw ValidationError("block_structure_from_symmetry: A is not Hermitian");

    SymmetryBasis out;

    // Diagonal fast path: pure permutation, ties broken by original index.
    double offdiag = (A - Matrix(A.diagonal().asDiagonal())).norm();
    if (offdiag <= gtol) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return A(a, a).real() < A(b, b).real();
        });
        RealVector vals(n);
        for (int i = 0; i < n; ++i) vals[i] = A(order[static_cast<std::size_t>(i)],
                                                order[static_cast<std::size_t>(i)]).real();
        auto groups = group_sorted(vals, gtol);

        out.basis_change = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) out.basis_change(order[static_cast<std::size_t>(i)], i) = 1.0;
        out.structure.dim_total = n;
        for (const auto& [b, e] : groups) {
            Subspace sub;
            sub.lambda = vals.segment(b, e - b).mean();
            for (int i = b; i < e; ++i) sub.indices.push_back(i);
            out.structure.subspaces.push_back(std::move(sub));
        }
        return out;
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    RealVector vals = es.eigenvalues();  // ascending
    auto groups = group_sorted(vals, gtol);

    out.basis_change = es.eigenvectors();
    out.structure.dim_total = n;
    for (const auto& [b, e] : groups) {
        Subspace sub;
        sub.lambda = vals.segment(b, e - b).mean();
        for (int i = b; i < e; ++i) sub.indices.push_back(i);
        out.structure.subspaces.push_back(std::move(sub));
    }
    return out;
}

BlockStructure infer_block_structure(const Matrix& H,
                                     const std::vector<Matrix>& jumps,
                                     double tol) {
    require(H.rows() == H.cols(), "infer_block_structure: H not square");
    const int n = static_cast<int>(H.rows());
    for (const auto& l : jumps)
        require(l.rows() == l.cols() && l.rows() == n,
                "infer_block_structure: jump dimension mismatch");

    // Union-find over basis indices connected by any nonzero matrix element.
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    };
    auto connect = [&](const Matrix& o) {
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (r != c && std::abs(o(r, c)) > tol) unite(r, c);
    };
    connect(H);
    for (const auto& l : jumps) connect(l);  // support of L^dag is the transpose, covered

    std::vector<std::vector<int>> comps(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) comps[static_cast<std::size_t>(find(i))].push_back(i);

    BlockStructure s;
    s.dim_total = n;
    int rank = 0;
    for (auto& c : comps) {
        if (c.empty()) continue;
        Subspace sub;
        sub.lambda = static_cast<double>(rank++);
        sub.indices = std::move(c);
        s.subspaces.push_back(std::move(sub));
    }
    return s;
}

SimilarityVerdict check_similar(const BlockOperator& H,
                                const std::vector<BlockOperator>& jumps,
                                std::pair<int, int> pair, double tol) {
    const auto [a, ap] = pair;
    SimilarityVerdict v;
    v.pair = pair;
    const Matrix& ha = H.blocks.at(static_cast<std::size_t>(a));
    const Matrix& hap = H.blocks.at(static_cast<std::size_t>(ap));
    if (ha.rows() != hap.rows()) {
        v.similar = false;
        v.residual = std::numeric_limits<double>::infinity();
        return v;
    }

    double scale = std::max({ha.norm(), hap.norm(), 1e-300});
    for (const auto& l : jumps) {
        scale = std::max(scale, l.blocks.at(static_cast<std::size_t>(a)).norm());
        scale = std::max(scale, l.blocks.at(static_cast<std::size_t>(ap)).norm());
    }

    double resid = (ha - hap).cwiseAbs().maxCoeff();
    std::vector<double> phases;
    for (const auto& l : jumps) {
        const Matrix& la = l.blocks.at(static_cast<std::size_t>(a));
        const Matrix& lap = l.blocks.at(static_cast<std::size_t>(ap));
        double na = la.norm(), nap = lap.norm();
        if (na <= tol * scale && nap <= tol * scale) {
            phases.push_back(0.0);
            continue;
        }
        if (na <= tol * scale || nap <= tol * scale) {
            v.similar = false;
            v.residual = std::numeric_limits<double>::infinity();
            return v;
        }
        // theta from the largest-magnitude element of the primed block
        Eigen::Index rmax = 0, cmax = 0;
        lap.cwiseAbs().maxCoeff(&rmax, &cmax);
        Complex ratio = la(rmax, cmax) / lap(rmax, cmax);
        double theta = std::arg(ratio);
        phases.push_back(theta);
        Complex phase = std::polar(1.0, theta);
        resid = std::max(resid, (la - phase * lap).cwiseAbs().maxCoeff());
    }

    v.residual = resid;
    v.similar = resid <= tol * scale;
    if (v.similar) v.phases = std::move(phases);
    return v;
}

}  // namespace qtraj
