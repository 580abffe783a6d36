#pragma once

#include <Eigen/Core>

namespace rwmlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class SpdMatrix;

// Frobenius product A:B = sum_ij A_ij B_ij. Throws UsageError on a shape mismatch.
double frobenius(const Matrix& a, const Matrix& b);
double frobenius(const SpdMatrix& a, const SpdMatrix& b);

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // column j pairs with values(j)
};

// Cyclic Jacobi rotations. Intended for the small blocks used here (k <= 64);
// cost is O(k^3) per sweep and it is not meant for large matrices.
// Throws UsageError if `a` is not square and symmetric to 1e-12 relative.
SymmetricEigen symmetric_eigen(const Matrix& a);

Vector eigenvalues(const Matrix& a);
double min_eigenvalue(const Matrix& a);
double max_eigenvalue(const Matrix& a);

// Symmetric square root V diag(sqrt(w)) V'. Requires a PSD input.
Matrix symmetric_sqrt(const Matrix& a);
// Symmetric inverse square root; requires strictly positive eigenvalues.
Matrix symmetric_inverse_sqrt(const Matrix& a);

// E ||W||^4 for W ~ N(0, l^2 Lambda): l^4 (2 ||Lambda||_F^2 + Tr(Lambda)^2).
double isserlis_fourth_moment(const SpdMatrix& lambda, double l);

}  // namespace rwmlab
