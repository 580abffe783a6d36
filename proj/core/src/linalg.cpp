#include "rwmlab/linalg.hpp"

#include "rwmlab/errors.hpp"
#include "rwmlab/spd_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rwmlab {
namespace {

void require_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) throw UsageError("matrix must be square");
  if (!a.allFinite()) throw UsageError("matrix has non-finite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw UsageError("matrix is not symmetric");
  }
}

}  // namespace

double frobenius(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError("frobenius: dimension mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
  return a.cwiseProduct(b).sum();
}

double frobenius(const SpdMatrix& a, const SpdMatrix& b) { return frobenius(a.matrix(), b.matrix()); }

SymmetricEigen symmetric_eigen(const Matrix& input) {
  require_symmetric(input);
  const Eigen::Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-300 || off <= 1e-32 * a.squaredNorm()) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that annihilates a(p, q) (Rutishauser's formulation).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double apj = a(p, j), aqj = a(q, j);
          a(p, j) = c * apj - s * aqj;
          a(q, j) = s * apj + c * aqj;
        }
        for (Eigen::Index j = 0; j < n; ++j) {
          const double ajp = a(j, p), ajq = a(j, q);
          a(j, p) = c * ajp - s * ajq;
          a(j, q) = s * ajp + c * ajq;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double vjp = v(j, p), vjq = v(j, q);
          v(j, p) = c * vjp - s * vjq;
          v(j, q) = s * vjp + c * vjq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

Vector eigenvalues(const Matrix& a) { return symmetric_eigen(a).values; }

double min_eigenvalue(const Matrix& a) { return eigenvalues(a)(0); }

double max_eigenvalue(const Matrix& a) {
  const Vector w = eigenvalues(a);
  return w(w.size() - 1);
}

Matrix symmetric_sqrt(const Matrix& a) {
  const SymmetricEigen eig = symmetric_eigen(a);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values(0) < -1e-12 * scale) throw UsageError("symmetric_sqrt: matrix is not PSD");
  const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
  Matrix out = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix symmetric_inverse_sqrt(const Matrix& a) {
  const SymmetricEigen eig = symmetric_eigen(a);
  if (!(eig.values(0) > 0.0)) throw UsageError("symmetric_inverse_sqrt: matrix is not PD");
  const Vector root = eig.values.cwiseSqrt().cwiseInverse();
  Matrix out = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

double isserlis_fourth_moment(const SpdMatrix& lambda, double l) {
  const double tr = lambda.trace();
  const double l2 = l * l;
  return l2 * l2 * (2.0 * lambda.matrix().squaredNorm() + tr * tr);
}

}  // namespace rwmlab
