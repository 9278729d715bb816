// common.hpp — shared aliases and error types

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace qtraj {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

// Malformed inputs: wrong dimensions, invalid indices, bad config values.
struct StructuralError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Inputs that parse but violate a mathematical precondition
// (non-Hermitian symmetry operator, ambiguous eigenvalue grouping, ...).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runtime numerical failures: timestep too large, trace drift, ...
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A result that contradicts a structural theorem (signals a build bug).
struct InternalConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw StructuralError(msg);
}

inline double frobenius(const Matrix& m) { return m.norm(); }

inline bool is_hermitian(const Matrix& m, double tol) {
    double scale = m.norm();
    if (scale == 0.0) return true;
    return (m - m.adjoint()).norm() <= tol * scale;
}

}  // namespace qtraj
