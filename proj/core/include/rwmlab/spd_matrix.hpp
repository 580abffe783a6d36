#pragma once

#include "rwmlab/linalg.hpp"

#include <Eigen/Core>

namespace rwmlab {

// Symmetric positive definite k x k matrix with its lower Cholesky factor.
// The input is symmetrised as (A + A')/2 and factorised; a failed factorisation
// is a hard UsageError. No jitter is ever added.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Matrix& entries);

  static SpdMatrix identity(Eigen::Index k);
  static SpdMatrix diagonal(const Vector& diag);

  Eigen::Index dim() const noexcept { return entries_.rows(); }
  const Matrix& matrix() const noexcept { return entries_; }
  // Lower triangular L with L L' = matrix().
  const Matrix& cholesky() const noexcept { return chol_; }

  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  double trace() const { return entries_.trace(); }
  SpdMatrix inverse() const;
  SpdMatrix scaled(double c) const;
  // Symmetric square root via eigendecomposition (not the Cholesky factor).
  Matrix sqrt() const { return symmetric_sqrt(entries_); }
  double log_determinant() const;

 private:
  Matrix entries_;
  Matrix chol_;
};

}  // namespace rwmlab
