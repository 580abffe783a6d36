#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"

namespace rwmlab {

// Standard normal CDF through the complementary error function.
double normal_cdf(double x) noexcept;
double normal_pdf(double x) noexcept;

// mean + cov_chol * z, z ~ N(0, I) drawn from rng.
Vector sample_mvn(const Vector& mean, const Matrix& cov_chol, RngStream& rng);

// Fills `out` with i.i.d. standard normals.
void fill_normal(Eigen::Ref<Vector> out, RngStream& rng);

}  // namespace rwmlab
