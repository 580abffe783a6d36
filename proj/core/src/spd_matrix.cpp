#include "rwmlab/spd_matrix.hpp"

#include "rwmlab/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace rwmlab {

SpdMatrix::SpdMatrix(const Matrix& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw UsageError("SpdMatrix: expected a non-empty square matrix");
  }
  if (!entries.allFinite()) throw UsageError("SpdMatrix: non-finite entries");
  entries_ = 0.5 * (entries + entries.transpose());
  Eigen::LLT<Matrix> llt(entries_);
  if (llt.info() != Eigen::Success) throw UsageError("SpdMatrix: matrix is not positive definite");
  chol_ = llt.matrixL();
  for (Eigen::Index i = 0; i < chol_.rows(); ++i) {
    if (!(chol_(i, i) > 0.0) || !std::isfinite(chol_(i, i))) {
      throw UsageError("SpdMatrix: matrix is not positive definite");
    }
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index k) { return SpdMatrix(Matrix::Identity(k, k)); }

SpdMatrix SpdMatrix::diagonal(const Vector& diag) { return SpdMatrix(Matrix(diag.asDiagonal())); }

SpdMatrix SpdMatrix::inverse() const {
  const Eigen::Index k = dim();
  Matrix inv = Matrix::Identity(k, k);
  chol_.triangularView<Eigen::Lower>().solveInPlace(inv);
  chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
  return SpdMatrix(inv);
}

SpdMatrix SpdMatrix::scaled(double c) const {
  if (!(c > 0.0)) throw UsageError("SpdMatrix::scaled: factor must be positive");
  return SpdMatrix(c * entries_);
}

double SpdMatrix::log_determinant() const { return 2.0 * chol_.diagonal().array().log().sum(); }

}  // namespace rwmlab
