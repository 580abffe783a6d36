#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/spd_matrix.hpp"

#include <Eigen/QR>

namespace rwmlab::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// A A' + eps I with Gaussian A.
inline SpdMatrix random_spd(Eigen::Index k, RngStream& rng, double eps = 0.1) {
  const Matrix a = random_matrix(k, k, rng);
  return SpdMatrix(a * a.transpose() + eps * Matrix::Identity(k, k));
}

inline Matrix random_orthogonal(Eigen::Index k, RngStream& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(k, k, rng));
  Matrix q = qr.householderQ();
  return q;
}

inline Vector random_vector(Eigen::Index k, RngStream& rng) {
  Vector v(k);
  for (Eigen::Index i = 0; i < k; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace rwmlab::testing
