#include "rwmlab/normal.hpp"

#include "rwmlab/errors.hpp"

#include <cmath>
#include <numbers>

namespace rwmlab {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

void fill_normal(Eigen::Ref<Vector> out, RngStream& rng) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = rng.normal();
}

Vector sample_mvn(const Vector& mean, const Matrix& cov_chol, RngStream& rng) {
  if (cov_chol.rows() != mean.size() || cov_chol.cols() != mean.size()) {
    throw UsageError("sample_mvn: dimension mismatch");
  }
  Vector z(mean.size());
  fill_normal(z, rng);
  return mean + cov_chol.triangularView<Eigen::Lower>() * z;
}

}  // namespace rwmlab
