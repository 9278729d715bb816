// symmetry.hpp — strong-symmetry block structure: detection, projection,
// similarity classification.

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "qtraj/common.hpp"

namespace qtraj {

struct Subspace {
    double lambda = 0.0;           // eigenvalue of the symmetry operator A
    std::vector<int> indices;      // basis indices spanning this subspace

    int dim() const { return static_cast<int>(indices.size()); }
};

// Partition of {0..dim_total-1} into symmetry subspaces, sorted by ascending
// lambda. The order of `indices` inside a subspace fixes the basis ordering
// used by block extraction, so it is part of the contract.
struct BlockStructure {
    std::vector<Subspace> subspaces;
    int dim_total = 0;

    int n_subspaces() const { return static_cast<int>(subspaces.size()); }
    const Subspace& at(int alpha) const {
        if (alpha < 0 || alpha >= n_subspaces())
            throw StructuralError("BlockStructure: subspace index out of range");
        return subspaces[static_cast<std::size_t>(alpha)];
    }

    // Throws ValidationError unless indices form a partition and lambdas are
    // pairwise distinct.
    void validate() const;

    // subspace id owning each basis index
    std::vector<int> index_to_subspace() const;

    // Same partition (as sets of index-sets), ignoring lambda labels and order.
    bool same_partition(const BlockStructure& other) const;
};

// Dense projector P_alpha in the structure's basis.
Matrix projector_matrix(const BlockStructure& s, int alpha);

// d_alpha x d_alpha submatrix P_alpha O P_alpha.
Matrix project(const Matrix& op, const BlockStructure& s, int alpha);

// An operator stored block by block. Construction verifies the operator has
// no weight outside the diagonal blocks.
struct BlockOperator {
    BlockStructure structure;
    std::vector<Matrix> blocks;

    static BlockOperator from_full(const Matrix& op, const BlockStructure& s,
                                   double off_block_tol = 1e-12);
    Matrix reassemble() const;
};

struct SimilarityVerdict {
    std::pair<int, int> pair;
    bool similar = false;
    std::vector<double> phases;    // theta_j per jump operator, present iff similar
    double residual = 0.0;         // max elementwise deviation (inf sentinel allowed)
};

// Checks [H,A] = [L_j,A] = [L_j^dag,A] = 0 within tol * max operator norm.
// Throws StructuralError on dimension mismatch, ValidationError if A is not
// Hermitian within tol.
bool verify_strong_symmetry(const Matrix& H, const std::vector<Matrix>& jumps,
                            const Matrix& A, double tol);

struct SymmetryBasis {
    BlockStructure structure;   // contiguous in the rotated basis
    Matrix basis_change;        // unitary U: O_block = U^dag O U
};

// Eigendecomposes Hermitian A, groups eigenvalues with gap <= tol*||A||.
// An ambiguous cluster (chained small gaps with large total spread) throws
// ValidationError rather than guessing. If A is numerically diagonal the
// basis change is a pure permutation with ties broken by original index.
SymmetryBasis block_structure_from_symmetry(const Matrix& A, double tol = -1.0);

// Finest simultaneous block decomposition in the given basis: connected
// components of the support graph of H and all L_j, L_j^dag. Synthetic
// lambda = component rank.
BlockStructure infer_block_structure(const Matrix& H,
                                     const std::vector<Matrix>& jumps,
                                     double tol);

// Tests Eq-style similarity: equal H blocks, phase-equivalent jump blocks,
// elementwise in the structure's declared basis ordering.
SimilarityVerdict check_similar(const BlockOperator& H,
                                const std::vector<BlockOperator>& jumps,
                                std::pair<int, int> pair, double tol);

}  // namespace qtraj
