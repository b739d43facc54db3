#pragma once

#include <Eigen/Dense>
#include <vector>

#include "carnot/group.hpp"

namespace carnot {

/// Graded automorphism T_A of the Lie algebra generated by a first-layer matrix A.
/// Convention: block(i, j) is the coefficient of X_j in T_A(X_i).
struct LayeredAutomorphism {
    Eigen::MatrixXd source;
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::MatrixXd full;  // block-diagonal n x n

    /// T_A applied to a Lie algebra vector.
    std::vector<double> apply_algebra(std::span<const double> v) const;
    /// F_A(x) = exp(T_A(log x)).
    Point apply(const Point& x) const;
    double jacobian_determinant() const { return full.determinant(); }
};

/// Builds T_A layer by layer through brackets and verifies that every bracket is preserved.
/// Throws NotPositiveDefinite for non-SPD A and NotExtendable when brackets are not preserved.
LayeredAutomorphism extend_automorphism(const CarnotGroup& g, const Eigen::MatrixXd& A, double tol = 1e-10);

/// max over basis pairs of |T[X_a,X_b] - [T X_a, T X_b]|.
double bracket_preservation_residual(const CarnotGroup& g, const LayeredAutomorphism& T);

/// Columns are the frame fields evaluated at the identity.
Eigen::MatrixXd frame_basis(const Frame& frame, int dim);

/// v with x = x0 * exp(sum v_i X_i), X_i the columns of basis.
std::vector<double> canonical_coords(const CarnotGroup& g, const Point& x, const Point& x0, const Eigen::MatrixXd& basis);
std::vector<double> canonical_coords(const CarnotGroup& g, const Point& x, const Point& x0, const Frame& frame);

/// x0 * exp(sum v_i X_i).
Point exp_from(const CarnotGroup& g, const Point& x0, std::span<const double> v, const Eigen::MatrixXd& basis);

}  // namespace carnot
