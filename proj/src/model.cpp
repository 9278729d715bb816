#include "qtraj/model.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "qtraj/rng.hpp"

namespace qtraj {

using nlohmann::json;

Matrix BlockedModel::h_full() const {
    BlockOperator bo{structure, h_blocks};
    return bo.reassemble();
}

Matrix BlockedModel::jump_full(std::size_t j) const {
    BlockOperator bo{structure, jump_blocks.at(j)};
    return bo.reassemble();
}

namespace {

// Contiguous structure + permutation from an index-list structure.
std::pair<BlockStructure, Matrix> contiguous_from_lists(const BlockStructure& s) {
    BlockStructure cont;
    cont.dim_total = s.dim_total;
    Matrix perm = Matrix::Zero(s.dim_total, s.dim_total);
    int pos = 0;
    for (const auto& sub : s.subspaces) {
        Subspace c;
        c.lambda = sub.lambda;
        for (int idx : sub.indices) {
            perm(idx, pos) = 1.0;  // column pos of block basis = model index idx
            c.indices.push_back(pos);
            ++pos;
        }
        cont.subspaces.push_back(std::move(c));
    }
    return {std::move(cont), std::move(perm)};
}

}  // namespace

BlockedModel build_blocked(const ModelSpec& m, double tol) {
    require(m.H.rows() == m.dim && m.H.cols() == m.dim, "build_blocked: H dimension mismatch");
    for (const auto& [l, g] : m.jumps) {
        require(l.rows() == m.dim && l.cols() == m.dim, "build_blocked: jump dimension mismatch");
        require(g >= 0.0, "build_blocked: negative jump rate");
    }

    BlockedModel out;
    out.dim = m.dim;
    out.omega = m.omega;

    BlockStructure model_basis_structure;  // with index lists into the model basis
    if (m.declared_basis) {
        model_basis_structure = *m.declared_basis;
        model_basis_structure.validate();
        auto [cont, perm] = contiguous_from_lists(model_basis_structure);
        out.structure = std::move(cont);
        out.transform = std::move(perm);
    } else if (m.A) {
        auto sb = block_structure_from_symmetry(*m.A, tol);
        out.structure = std::move(sb.structure);
        out.transform = std::move(sb.basis_change);
    } else {
        std::vector<Matrix> ls;
        for (const auto& [l, g] : m.jumps) ls.push_back(l);
        double scale = m.H.norm();
        for (const auto& l : ls) scale = std::max(scale, l.norm());
        model_basis_structure = infer_block_structure(m.H, ls, tol * std::max(scale, 1.0));
        auto [cont, perm] = contiguous_from_lists(model_basis_structure);
        out.structure = std::move(cont);
        out.transform = std::move(perm);
    }

    out.offset.resize(static_cast<std::size_t>(out.n_subspaces()));
    int pos = 0;
    for (int a = 0; a < out.n_subspaces(); ++a) {
        out.offset[static_cast<std::size_t>(a)] = pos;
        pos += out.dim_of(a);
    }

    Matrix h_b = out.transform.adjoint() * m.H * out.transform;
    auto h_bo = BlockOperator::from_full(h_b, out.structure);
    out.h_blocks = std::move(h_bo.blocks);
    for (const auto& [l, g] : m.jumps) {
        Matrix l_b = out.transform.adjoint() * l * out.transform;
        auto l_bo = BlockOperator::from_full(l_b, out.structure);
        out.jump_blocks.push_back(std::move(l_bo.blocks));
        out.rates.push_back(g);
    }

    if (m.initial_state.explicit_vector) {
        const Vector& v = *m.initial_state.explicit_vector;
        require(v.size() == m.dim, "build_blocked: initial vector dimension mismatch");
        out.init_vector = out.transform.adjoint() * v;
        for (int a = 0; a < out.n_subspaces(); ++a)
            if (out.init_vector->segment(out.offset[static_cast<std::size_t>(a)], out.dim_of(a)).norm() > 1e-14)
                out.init_subspaces.push_back(a);
    } else if (m.initial_state.subspaces.empty()) {
        out.init_subspaces.resize(static_cast<std::size_t>(out.n_subspaces()));
        std::iota(out.init_subspaces.begin(), out.init_subspaces.end(), 0);
    } else {
        for (int a : m.initial_state.subspaces) {
            require(a >= 0 && a < out.n_subspaces(), "build_blocked: init subspace id out of range");
            out.init_subspaces.push_back(a);
        }
        std::sort(out.init_subspaces.begin(), out.init_subspaces.end());
        out.init_subspaces.erase(
            std::unique(out.init_subspaces.begin(), out.init_subspaces.end()),
            out.init_subspaces.end());
    }

    if (!m.cutoff_indices.empty()) {
        // map model-basis indices through the permutation (transform columns)
        for (int idx : m.cutoff_indices) {
            for (int col = 0; col < out.dim; ++col) {
                if (std::abs(out.transform(idx, col)) > 0.5) {
                    out.cutoff_indices.push_back(col);
                    break;
                }
            }
        }
        std::sort(out.cutoff_indices.begin(), out.cutoff_indices.end());
    }
    return out;
}

// ---- operator builders ----

SpinOperators spin_operators(double s) {
    const int d = static_cast<int>(std::lround(2 * s + 1));
    SpinOperators op;
    op.sz = Matrix::Zero(d, d);
    op.sp = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        double mval = s - i;  // basis ordered m = s ... -s
        op.sz(i, i) = mval;
        if (i > 0) {
            double mlow = s - i;  // raising from m = mlow to mlow + 1
            op.sp(i - 1, i) = std::sqrt(s * (s + 1) - mlow * (mlow + 1));
        }
    }
    op.sm = op.sp.adjoint();
    op.sx = 0.5 * (op.sp + op.sm);
    op.sy = Complex(0, -0.5) * (op.sp - op.sm);
    return op;
}

Matrix photon_annihilation(int n_max) {
    require(n_max >= 1, "photon_annihilation: n_max must be >= 1");
    const int d = n_max + 1;
    Matrix a = Matrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

BosonBasis BosonBasis::build(int n_modes, int n_bosons) {
    require(n_modes >= 1 && n_bosons >= 0, "BosonBasis: bad arguments");
    BosonBasis b;
    b.n_modes = n_modes;
    b.n_bosons = n_bosons;
    std::vector<int> occ(static_cast<std::size_t>(n_modes), 0);
    // lexicographic ascending in (n_1, ..., n_L)
    std::function<void(int, int)> rec = [&](int mode, int remaining) {
        if (mode == n_modes - 1) {
            occ[static_cast<std::size_t>(mode)] = remaining;
            b.states.push_back(occ);
            return;
        }
        for (int n = 0; n <= remaining; ++n) {
            occ[static_cast<std::size_t>(mode)] = n;
            rec(mode + 1, remaining - n);
        }
    };
    rec(0, n_bosons);
    return b;
}

int BosonBasis::index_of(const std::vector<int>& occ) const {
    auto it = std::lower_bound(states.begin(), states.end(), occ);
    if (it == states.end() || *it != occ)
        throw StructuralError("BosonBasis: state not in basis");
    return static_cast<int>(it - states.begin());
}

Matrix BosonBasis::number_op(int mode) const {
    Matrix n = Matrix::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i)
        n(i, i) = static_cast<double>(states[static_cast<std::size_t>(i)][static_cast<std::size_t>(mode)]);
    return n;
}

Matrix BosonBasis::hop_op(int to_mode, int from_mode) const {
    Matrix h = Matrix::Zero(dim(), dim());
    if (to_mode == from_mode) return number_op(to_mode);
    for (int i = 0; i < dim(); ++i) {
        const auto& v = states[static_cast<std::size_t>(i)];
        int nq = v[static_cast<std::size_t>(from_mode)];
        if (nq == 0) continue;
        auto w = v;
        w[static_cast<std::size_t>(from_mode)] -= 1;
        w[static_cast<std::size_t>(to_mode)] += 1;
        int jdx = index_of(w);
        h(jdx, i) = std::sqrt(static_cast<double>(nq) *
                              (v[static_cast<std::size_t>(to_mode)] + 1.0));
    }
    return h;
}

MomentumTupleIndex MomentumTupleIndex::build(int l_sites, int n_bosons) {
    require(l_sites >= 2 && l_sites % 2 == 0, "MomentumTupleIndex: L must be even");
    MomentumTupleIndex mt;
    mt.l_sites = l_sites;
    mt.n_bosons = n_bosons;
    BosonBasis half = BosonBasis::build(l_sites / 2, n_bosons);
    mt.tuples = half.states;  // already lexicographically ascending
    return mt;
}

int MomentumTupleIndex::alpha_of(const std::vector<int>& tuple) const {
    auto it = std::lower_bound(tuples.begin(), tuples.end(), tuple);
    if (it == tuples.end() || *it != tuple)
        throw StructuralError("MomentumTupleIndex: unknown tuple");
    return static_cast<int>(it - tuples.begin());
}

const std::vector<int>& MomentumTupleIndex::tuple_of(int alpha) const {
    if (alpha < 0 || alpha >= count())
        throw StructuralError("MomentumTupleIndex: alpha out of range");
    return tuples[static_cast<std::size_t>(alpha)];
}

long MomentumTupleIndex::closed_form_count(int l_sites, int n_bosons) {
    // (N + L/2 - 1)! / (N! (L/2 - 1)!)
    const int half = l_sites / 2;
    long num = 1;
    for (int i = 1; i <= half - 1; ++i) num = num * (n_bosons + i) / i;
    return num;
}

// ---- model families ----

ModelSpec random_block_model(int n_blocks, int block_dim, double gamma,
                             std::uint64_t seed) {
    require(n_blocks >= 1 && block_dim >= 1, "random_block_model: bad dimensions");
    const int dim = n_blocks * block_dim;
    SplitMix64 rng(seed);

    ModelSpec m;
    m.name = "random_block";
    m.dim = dim;
    m.H = Matrix::Zero(dim, dim);
    Matrix l = Matrix::Zero(dim, dim);
    BlockStructure s;
    s.dim_total = dim;
    for (int b = 0; b < n_blocks; ++b) {
        const int o = b * block_dim;
        Matrix g(block_dim, block_dim);
        for (int r = 0; r < block_dim; ++r)
            for (int c = 0; c < block_dim; ++c) g(r, c) = rng.complex_gaussian();
        m.H.block(o, o, block_dim, block_dim) = 0.5 * (g + g.adjoint());  // times omega = 1
        Matrix gin(block_dim, block_dim);
        for (int r = 0; r < block_dim; ++r)
            for (int c = 0; c < block_dim; ++c) gin(r, c) = rng.complex_gaussian();
        l.block(o, o, block_dim, block_dim) = gin;

        Subspace sub;
        sub.lambda = static_cast<double>(b);
        for (int i = 0; i < block_dim; ++i) sub.indices.push_back(o + i);
        s.subspaces.push_back(std::move(sub));
    }
    m.jumps.emplace_back(std::move(l), gamma);
    m.symmetry_kind = SymmetryDecl::ExplicitBasis;
    m.declared_basis = std::move(s);
    m.recipe = json{{"name", m.name},
                    {"params", {{"n_blocks", n_blocks},
                                {"block_dim", block_dim},
                                {"gamma", gamma},
                                {"seed", seed}}}};
    return m;
}

ModelSpec coupled_qudit_model(double gamma) {
    require(gamma >= 0.0, "coupled_qudit_model: negative gamma");
    const SpinOperators sp = spin_operators(1.5);
    const Matrix id4 = Matrix::Identity(4, 4);
    auto kp = [](const Matrix& x, const Matrix& y) -> Matrix {
        return Eigen::kroneckerProduct(x, y).eval();
    };

    ModelSpec m;
    m.name = "coupled_qudit";
    m.dim = 16;
    m.H = kp(sp.sx, sp.sx) + kp(sp.sy, sp.sy) + kp(sp.sz, sp.sz);  // omega = 1
    m.jumps.emplace_back(kp(sp.sz, id4), gamma);
    m.A = kp(sp.sz, id4) + kp(id4, sp.sz);

    // Block basis aligned so that the (lambda, -lambda) pairs are elementwise
    // similar: within a subspace, states ordered by descending m_a for
    // lambda >= 0 and ascending m_a for lambda < 0. Position i of subspace
    // lambda then maps to the spin-flipped state at position i of -lambda.
    BlockStructure s;
    s.dim_total = 16;
    for (int lam = -3; lam <= 3; ++lam) {
        Subspace sub;
        sub.lambda = static_cast<double>(lam);
        std::vector<std::pair<double, int>> members;  // (m_a, full index)
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                double ma = 1.5 - a, mb = 1.5 - b;
                if (std::lround(2 * (ma + mb)) == 2 * lam) members.emplace_back(ma, a * 4 + b);
            }
        }
        std::sort(members.begin(), members.end(), [&](auto& x, auto& y) {
            return lam >= 0 ? x.first > y.first : x.first < y.first;
        });
        for (auto& [ma, idx] : members) sub.indices.push_back(idx);
        s.subspaces.push_back(std::move(sub));
    }
    m.symmetry_kind = SymmetryDecl::ExplicitBasis;
    m.declared_basis = std::move(s);
    m.recipe = json{{"name", m.name}, {"params", {{"gamma", gamma}}}};
    return m;
}

ModelSpec lossy_boson_chain_model(int l_sites, double gamma, double g, double J,
                                  int n_max) {
    require(l_sites >= 2 && l_sites % 2 == 0, "lossy_boson_chain_model: L must be even");
    require(n_max >= 1, "lossy_boson_chain_model: n_max must be >= 1");
    const int n_bosons = l_sites / 2;  // half filling
    const BosonBasis chain = BosonBasis::build(l_sites, n_bosons);
    const int dim_ph = n_max + 1;
    const int dim_ch = chain.dim();
    const int dim = dim_ph * dim_ch;

    const Matrix a = photon_annihilation(n_max);
    const Matrix id_ph = Matrix::Identity(dim_ph, dim_ph);
    const Matrix id_ch = Matrix::Identity(dim_ch, dim_ch);
    auto kp = [](const Matrix& x, const Matrix& y) -> Matrix {
        return Eigen::kroneckerProduct(x, y).eval();
    };

    // momentum modes k_i = 2*pi*i/L for i = 1..L; mode i pairs with i + L/2
    const double two_pi = 6.283185307179586476925286766559;
    Matrix flip_sum = Matrix::Zero(dim_ch, dim_ch);  // sum_k b^dag_k b_{k+pi}
    Matrix kinetic = Matrix::Zero(dim_ch, dim_ch);   // sum_k cos(k) n_k
    for (int i = 1; i <= l_sites; ++i) {
        int partner = (i + l_sites / 2 - 1) % l_sites + 1;  // i + L/2 cyclic in 1..L
        flip_sum += chain.hop_op(i - 1, partner - 1);
        kinetic += std::cos(two_pi * i / l_sites) * chain.number_op(i - 1);
    }

    ModelSpec m;
    m.name = "lossy_boson_chain";
    m.dim = dim;
    m.H = kp(a.adjoint() * a, id_ch) - g * kp(a + a.adjoint(), flip_sum) -
          2.0 * J * kp(id_ph, kinetic);
    m.jumps.emplace_back(kp(a, id_ch), gamma);

    // Symmetry subspaces labeled by the momentum tuples s_i = n_i + n_{i+L/2};
    // the photon factor is the slow (outermost) index.
    MomentumTupleIndex mt = MomentumTupleIndex::build(l_sites, n_bosons);
    BlockStructure s;
    s.dim_total = dim;
    std::vector<std::vector<int>> members(static_cast<std::size_t>(mt.count()));
    for (int ph = 0; ph < dim_ph; ++ph) {
        for (int cb = 0; cb < dim_ch; ++cb) {
            const auto& occ = chain.states[static_cast<std::size_t>(cb)];
            std::vector<int> tup(static_cast<std::size_t>(l_sites / 2));
            for (int i = 0; i < l_sites / 2; ++i)
                tup[static_cast<std::size_t>(i)] =
                    occ[static_cast<std::size_t>(i)] +
                    occ[static_cast<std::size_t>(i + l_sites / 2)];
            members[static_cast<std::size_t>(mt.alpha_of(tup))].push_back(ph * dim_ch + cb);
        }
    }
    for (int alpha = 0; alpha < mt.count(); ++alpha) {
        Subspace sub;
        sub.lambda = static_cast<double>(alpha);
        sub.indices = std::move(members[static_cast<std::size_t>(alpha)]);
        s.subspaces.push_back(std::move(sub));
    }
    m.symmetry_kind = SymmetryDecl::ExplicitBasis;
    m.declared_basis = std::move(s);

    // single Hermitian witness A = sum_i (N+1)^(i-1) S_i; eigenvalue is unique
    // per tuple
    Matrix a_op = Matrix::Zero(dim, dim);
    double weight = 1.0;
    for (int i = 1; i <= l_sites / 2; ++i) {
        int partner = i + l_sites / 2;
        Matrix s_i = chain.number_op(i - 1) + chain.number_op(partner - 1);
        a_op += weight * kp(id_ph, s_i);
        weight *= (n_bosons + 1);
    }
    m.A = std::move(a_op);

    for (int cb = 0; cb < dim_ch; ++cb) m.cutoff_indices.push_back(n_max * dim_ch + cb);

    m.recipe = json{{"name", m.name},
                    {"params", {{"l_sites", l_sites},
                                {"gamma", gamma},
                                {"g", g},
                                {"J", J},
                                {"n_max", n_max}}}};
    return m;
}

ModelSpec qubit_dephasing_toy(DephasingVariant variant, double gamma) {
    ModelSpec m;
    m.dim = 2;
    m.H = Matrix::Zero(2, 2);
    Matrix l(2, 2);
    if (variant == DephasingVariant::SigmaZ) {
        m.name = "qubit_sigma_z";
        l << 1, 0, 0, -1;
    } else {
        m.name = "qubit_number";
        l << 0, 0, 0, 1;  // |1><1|
    }
    m.jumps.emplace_back(std::move(l), gamma);
    Matrix a(2, 2);
    a << 1, 0, 0, -1;
    m.A = std::move(a);

    BlockStructure s;
    s.dim_total = 2;
    if (variant == DephasingVariant::SigmaZ) {
        s.subspaces.push_back(Subspace{-1.0, {1}});  // |1>: sigma_z eigenvalue -1
        s.subspaces.push_back(Subspace{+1.0, {0}});
    } else {
        // labeled by the number operator so that alpha = n
        s.subspaces.push_back(Subspace{0.0, {0}});
        s.subspaces.push_back(Subspace{1.0, {1}});
    }
    m.symmetry_kind = SymmetryDecl::ExplicitBasis;
    m.declared_basis = std::move(s);
    m.recipe = json{{"name", m.name}, {"params", {{"gamma", gamma}}}};
    return m;
}

std::vector<std::string> known_model_names() {
    return {"random_block", "coupled_qudit", "lossy_boson_chain", "qubit_sigma_z",
            "qubit_number"};
}

ModelSpec model_from_json(const json& j) {
    require(j.contains("name"), "model_from_json: missing name");
    const std::string name = j.at("name").get<std::string>();
    const json params = j.value("params", json::object());
    ModelSpec m;
    if (name == "random_block") {
        m = random_block_model(params.value("n_blocks", 4), params.value("block_dim", 4),
                               params.value("gamma", 4.0),
                               params.value("seed", std::uint64_t{1}));
    } else if (name == "coupled_qudit") {
        m = coupled_qudit_model(params.value("gamma", 3.0));
    } else if (name == "lossy_boson_chain") {
        m = lossy_boson_chain_model(params.value("l_sites", 4), params.value("gamma", 5.0),
                                    params.value("g", 2.0), params.value("J", 2.0),
                                    params.value("n_max", 5));
    } else if (name == "qubit_sigma_z") {
        m = qubit_dephasing_toy(DephasingVariant::SigmaZ, params.value("gamma", 1.0));
    } else if (name == "qubit_number") {
        m = qubit_dephasing_toy(DephasingVariant::Number, params.value("gamma", 1.0));
    } else {
        throw StructuralError("model_from_json: unknown model '" + name + "'");
    }
    if (j.contains("init_subspaces"))
        m.initial_state.subspaces = j.at("init_subspaces").get<std::vector<int>>();
    return m;
}

json model_to_json(const ModelSpec& m) {
    json j = m.recipe;
    if (!m.initial_state.subspaces.empty()) j["init_subspaces"] = m.initial_state.subspaces;
    return j;
}

}  // namespace qtraj
