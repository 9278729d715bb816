// model.hpp — model families, operator builders, and the preprocessed
// block-basis form consumed by the trajectory and Liouvillian machinery.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/symmetry.hpp"

#include <json.hpp>

namespace qtraj {

enum class SymmetryDecl { ExplicitA, ExplicitBasis, Infer };

struct InitialStateRecipe {
    // Haar-random vector in each listed subspace, equal weights. Empty list
    // means "all subspaces". Ignored when explicit_vector is set.
    std::vector<int> subspaces;
    std::optional<Vector> explicit_vector;  // in the model's basis
};

struct ModelSpec {
    std::string name;
    int dim = 0;
    Matrix H;
    std::vector<std::pair<Matrix, double>> jumps;  // (L_j, gamma_j)

    SymmetryDecl symmetry_kind = SymmetryDecl::Infer;
    std::optional<Matrix> A;                        // strong symmetry operator, when known
    std::optional<BlockStructure> declared_basis;   // takes precedence over A and inference

    InitialStateRecipe initial_state;
    double omega = 1.0;

    // full-space indices on the truncated top photon level (bosonic chain only);
    // used for the cutoff-leakage diagnostic
    std::vector<int> cutoff_indices;

    nlohmann::json recipe;  // enough to rebuild the model bit-identically
};

// Model rotated/permuted into its block basis: subspace alpha occupies the
// contiguous index range [offset[alpha], offset[alpha]+d_alpha).
struct BlockedModel {
    BlockStructure structure;  // contiguous
    std::vector<int> offset;
    Matrix transform;          // unitary U, O_block = U^adj O U
    std::vector<Matrix> h_blocks;
    std::vector<std::vector<Matrix>> jump_blocks;  // [j][alpha]
    std::vector<double> rates;
    double omega = 1.0;
    int dim = 0;

    std::vector<int> init_subspaces;      // resolved (nonempty)
    std::optional<Vector> init_vector;    // block basis
    std::vector<int> cutoff_indices;      // block basis

    int n_subspaces() const { return structure.n_subspaces(); }
    int dim_of(int alpha) const { return structure.at(alpha).dim(); }
    Matrix h_full() const;
    Matrix jump_full(std::size_t j) const;
};

// Resolves the declared symmetry (declared basis > explicit A > inference),
// permutes/rotates all operators into the block basis and checks they are
// truly block-diagonal there.
BlockedModel build_blocked(const ModelSpec& m, double tol = 1e-10);

// ---- model families ----

ModelSpec random_block_model(int n_blocks, int block_dim, double gamma,
                             std::uint64_t seed);
ModelSpec coupled_qudit_model(double gamma);
ModelSpec lossy_boson_chain_model(int l_sites, double gamma, double g, double J,
                                  int n_max);

enum class DephasingVariant { SigmaZ, Number };
ModelSpec qubit_dephasing_toy(DephasingVariant variant, double gamma);

ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& m);
std::vector<std::string> known_model_names();

// ---- operator builders ----

struct SpinOperators {
    Matrix sx, sy, sz, sp, sm;
};
SpinOperators spin_operators(double s);  // dimension 2s+1, basis m = s ... -s

Matrix photon_annihilation(int n_max);  // (n_max+1) dim truncated Fock space

// Occupation basis of N bosons over L modes, lexicographically ascending in
// (n_1, ..., n_L).
struct BosonBasis {
    int n_modes = 0;
    int n_bosons = 0;
    std::vector<std::vector<int>> states;

    static BosonBasis build(int n_modes, int n_bosons);
    int dim() const { return static_cast<int>(states.size()); }
    int index_of(const std::vector<int>& occ) const;

    Matrix number_op(int mode) const;              // n_k
    Matrix hop_op(int to_mode, int from_mode) const;  // b^dag_to b_from
};

// Tuples (s_1, ..., s_{L/2}) with sum N, lexicographically ascending; labels
// the symmetry subspaces of the lossy bosonic chain.
struct MomentumTupleIndex {
    int l_sites = 0;
    int n_bosons = 0;
    std::vector<std::vector<int>> tuples;

    static MomentumTupleIndex build(int l_sites, int n_bosons);
    int count() const { return static_cast<int>(tuples.size()); }
    int alpha_of(const std::vector<int>& tuple) const;
    const std::vector<int>& tuple_of(int alpha) const;
    static long closed_form_count(int l_sites, int n_bosons);
};

}  // namespace qtraj
