#include "rwmlab/targets.hpp"

#include "rwmlab/errors.hpp"
#include "rwmlab/normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace rwmlab {

Vector Target::score(const Eigen::Ref<const Vector>& x) const {
  Vector out(dim());
  score(x, out);
  return out;
}

Matrix Target::hessian(const Eigen::Ref<const Vector>&) const {
  throw UsageError("target '" + info().name + "' has no closed-form Hessian");
}

Vector Target::sample(RngStream& rng) const {
  Vector out(dim());
  sample(rng, out);
  return out;
}

Matrix hessian_or_fd(const Target& target, const Eigen::Ref<const Vector>& x) {
  if (target.has_hessian()) return target.hessian(x);
  const Eigen::Index k = target.dim();
  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, x.norm());
  Matrix out(k, k);
  Vector probe = x;
  Vector plus(k), minus(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    probe(j) = x(j) + h;
    target.score(probe, plus);
    probe(j) = x(j) - h;
    target.score(probe, minus);
    probe(j) = x(j);
    out.col(j) = (plus - minus) / (2.0 * h);
  }
  return 0.5 * (out + out.transpose());
}

namespace {

class GaussianTarget final : public Target {
 public:
  GaussianTarget(Vector mu, const SpdMatrix& gamma)
      : mu_(std::move(mu)), gamma_chol_(gamma.cholesky()), precision_(gamma.inverse().matrix()) {
    if (mu_.size() != gamma.dim()) throw UsageError("make_gaussian: mean/covariance dimension mismatch");
    const Eigen::Index k = gamma.dim();
    info_.name = "gaussian";
    info_.k = k;
    info_.family = TargetFamily::gaussian;
    info_.normalized = true;
    info_.lipschitz = max_eigenvalue(precision_);
    info_.sigma = SpdMatrix(precision_);
    info_.gamma = gamma;
    info_.var_log_pdf = 0.5 * static_cast<double>(k);
    log_norm_ = -0.5 * (static_cast<double>(k) * std::log(2.0 * std::numbers::pi) + gamma.log_determinant());
  }

  const TargetInfo& info() const noexcept override { return info_; }

  double log_pdf(const Eigen::Ref<const Vector>& x) const override {
    // Allocation-free quadratic form; this sits in the RWM inner loop.
    const Eigen::Index k = mu_.size();
    double q = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double cj = x(j) - mu_(j);
      double row = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) row += precision_(i, j) * (x(i) - mu_(i));
      q += cj * row;
    }
    return log_norm_ - 0.5 * q;
  }
  void score(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const override {
    out.noalias() = -(precision_ * (x - mu_));
  }
  bool has_hessian() const noexcept override { return true; }
  Matrix hessian(const Eigen::Ref<const Vector>&) const override { return -precision_; }
  void sample(RngStream& rng, Eigen::Ref<Vector> out) const override {
    Vector z(mu_.size());
    fill_normal(z, rng);
    out = mu_ + gamma_chol_.triangularView<Eigen::Lower>() * z;
  }

 private:
  Vector mu_;
  Matrix gamma_chol_;
  Matrix precision_;
  double log_norm_ = 0.0;
  TargetInfo info_;
};

class Logistic1d final : public Target {
 public:
  Logistic1d() {
    info_.name = "logistic";
    info_.k = 1;
    info_.normalized = true;
    info_.lipschitz = 0.5;
    info_.sigma = SpdMatrix(Matrix::Constant(1, 1, 1.0 / 3.0));
    info_.gamma = SpdMatrix(Matrix::Constant(1, 1, std::numbers::pi * std::numbers::pi / 3.0));
    // log pi(X) = log U + log(1 - U) with U = F(X) uniform.
    info_.var_log_pdf = 4.0 - std::numbers::pi * std::numbers::pi / 3.0;
  }

  const TargetInfo& info() const noexcept override { return info_; }

  double log_pdf(const Eigen::Ref<const Vector>& x) const override {
    const double a = std::abs(x(0));
    return -a - 2.0 * std::log1p(std::exp(-a));
  }
  void score(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const override {
    out(0) = -std::tanh(0.5 * x(0));
  }
  bool has_hessian() const noexcept override { return true; }
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override {
    const double c = std::cosh(0.5 * x(0));
    return Matrix::Constant(1, 1, -0.5 / (c * c));
  }
  void sample(RngStream& rng, Eigen::Ref<Vector> out) const override {
    const double u = rng.uniform();
    out(0) = std::log(u) - std::log1p(-u);
  }

 private:
  TargetInfo info_;
};

class RotatedScaleFamily final : public Target {
 public:
  RotatedScaleFamily(TargetPtr base, Vector scales, Matrix rotation)
      : base_(std::move(base)), scales_(std::move(scales)), rotation_(std::move(rotation)) {
    if (!base_ || base_->dim() != 1) throw UsageError("rotated scale family: base must be one-dimensional");
    if (!base_->has_sampler()) throw UsageError("rotated scale family: base needs a sampler");
    const Eigen::Index k = scales_.size();
    if (k == 0 || rotation_.rows() != k || rotation_.cols() != k) {
      throw UsageError("rotated scale family: rotation must be k x k with k = number of scales");
    }
    if ((scales_.array() <= 0.0).any() || !scales_.allFinite()) {
      throw UsageError("rotated scale family: scales must be positive");
    }
    if ((rotation_.transpose() * rotation_ - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
      throw UsageError("rotated scale family: rotation is not orthogonal");
    }
    const TargetInfo& b = base_->info();
    if (!b.sigma) throw UsageError("rotated scale family: base must declare its score variance");

    info_.name = "scale-family(" + b.name + ")";
    info_.k = k;
    info_.family = b.family == TargetFamily::gaussian ? TargetFamily::gaussian : TargetFamily::rotated_scale;
    info_.normalized = b.normalized;
    log_scale_sum_ = scales_.array().log().sum();
    const Vector c2 = scales_.array().square();
    if (b.lipschitz) info_.lipschitz = *b.lipschitz * c2.maxCoeff();
    const double sigma2 = b.sigma->matrix()(0, 0);
    info_.sigma = SpdMatrix(sigma2 * rotation_.transpose() * c2.asDiagonal() * rotation_);
    if (b.gamma) {
      const Vector var = b.gamma->matrix()(0, 0) * c2.cwiseInverse();
      info_.gamma = SpdMatrix(rotation_.transpose() * var.asDiagonal() * rotation_);
    }
    if (b.var_log_pdf) info_.var_log_pdf = static_cast<double>(k) * *b.var_log_pdf;
  }

  const TargetInfo& info() const noexcept override { return info_; }

  double log_pdf(const Eigen::Ref<const Vector>& x) const override {
    double total = info_.normalized ? log_scale_sum_ : 0.0;
    Eigen::Matrix<double, 1, 1> yi;
    for (Eigen::Index i = 0; i < scales_.size(); ++i) {
      yi(0) = scales_(i) * rotation_.row(i).dot(x);
      total += base_->log_pdf(yi);
    }
    return total;
  }
  void score(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const override {
    const Vector y = scales_.cwiseProduct(rotation_ * x);
    Vector w(y.size()), yi(1), si(1);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      yi(0) = y(i);
      base_->score(yi, si);
      w(i) = scales_(i) * si(0);
    }
    out.noalias() = rotation_.transpose() * w;
  }
  bool has_hessian() const noexcept override { return true; }
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override {
    const Vector y = scales_.cwiseProduct(rotation_ * x);
    Vector w(y.size()), yi(1);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      yi(0) = y(i);
      w(i) = scales_(i) * scales_(i) * hessian_or_fd(*base_, yi)(0, 0);
    }
    return rotation_.transpose() * w.asDiagonal() * rotation_;
  }
  void sample(RngStream& rng, Eigen::Ref<Vector> out) const override {
    Vector y(scales_.size()), yi(1);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      base_->sample(rng, yi);
      y(i) = yi(0) / scales_(i);
    }
    out.noalias() = rotation_.transpose() * y;
  }

 private:
  TargetPtr base_;
  Vector scales_;
  Matrix rotation_;
  double log_scale_sum_ = 0.0;
  TargetInfo info_;
};

class ScaledScore final : public Target {
 public:
  ScaledScore(TargetPtr base, double factor) : base_(std::move(base)), factor_(factor) {
    if (!base_) throw UsageError("make_scaled_score: null base");
    info_ = base_->info();
    info_.name = "scaled-score(" + info_.name + ")";
    info_.family = TargetFamily::generic;
  }

  const TargetInfo& info() const noexcept override { return info_; }
  double log_pdf(const Eigen::Ref<const Vector>& x) const override { return base_->log_pdf(x); }
  void score(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const override {
    base_->score(x, out);
    out *= factor_;
  }
  bool has_hessian() const noexcept override { return base_->has_hessian(); }
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override { return factor_ * base_->hessian(x); }
  bool has_sampler() const noexcept override { return base_->has_sampler(); }
  void sample(RngStream& rng, Eigen::Ref<Vector> out) const override { base_->sample(rng, out); }

 private:
  TargetPtr base_;
  double factor_;
  TargetInfo info_;
};

CovarianceEstimate covariance_of_draws(const Target& target, std::size_t n, RngStream& rng, bool of_score) {
  if (!target.has_sampler()) throw UsageError("estimate: target '" + target.info().name + "' has no sampler");
  if (n < 100) throw UsageError("estimate: need at least 100 draws");
  const Eigen::Index k = target.dim();
  Matrix draws(k, static_cast<Eigen::Index>(n));
  Vector x(k), s(k);
  for (std::size_t i = 0; i < n; ++i) {
    target.sample(rng, x);
    if (of_score) {
      target.score(x, s);
      draws.col(static_cast<Eigen::Index>(i)) = s;
    } else {
      draws.col(static_cast<Eigen::Index>(i)) = x;
    }
  }
  const double dn = static_cast<double>(n);
  const Vector mean = draws.rowwise().mean();
  draws.colwise() -= mean;
  const Matrix cov = draws * draws.transpose() / (dn - 1.0);
  Matrix se(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      const Eigen::ArrayXd prod = draws.row(a).array() * draws.row(b).array();
      const double m = prod.mean();
      se(a, b) = std::sqrt((prod - m).square().sum() / (dn - 1.0) / dn);
    }
  }
  return CovarianceEstimate{SpdMatrix(cov), se, mean, n};
}

}  // namespace

TargetPtr make_gaussian(const Vector& mu, const SpdMatrix& gamma) {
  return std::make_shared<GaussianTarget>(mu, gamma);
}

TargetPtr make_standard_normal(Eigen::Index k) {
  return make_gaussian(Vector::Zero(k), SpdMatrix::identity(k));
}

TargetPtr make_logistic_1d() { return std::make_shared<Logistic1d>(); }

TargetPtr make_rotated_scale_family(TargetPtr base1d, const Vector& scales, const Matrix& rotation) {
  return std::make_shared<RotatedScaleFamily>(std::move(base1d), scales, rotation);
}

TargetPtr make_scaled_score(TargetPtr base, double factor) {
  return std::make_shared<ScaledScore>(std::move(base), factor);
}

BlockProductTarget::BlockProductTarget(TargetPtr base, Eigen::Index d) : base_(std::move(base)), d_(d) {
  if (!base_) throw UsageError("BlockProductTarget: null base");
  if (d < 1) throw UsageError("BlockProductTarget: need at least one block");
}

double BlockProductTarget::log_pdf(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != total_dim()) throw UsageError("BlockProductTarget: state dimension mismatch");
  const Eigen::Index k = block_dim();
  double total = 0.0;
  for (Eigen::Index i = 0; i < d_; ++i) total += base_->log_pdf(x.segment(i * k, k));
  return total;
}

Vector BlockProductTarget::score(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != total_dim()) throw UsageError("BlockProductTarget: state dimension mismatch");
  const Eigen::Index k = block_dim();
  Vector out(total_dim());
  for (Eigen::Index i = 0; i < d_; ++i) base_->score(x.segment(i * k, k), out.segment(i * k, k));
  return out;
}

Vector BlockProductTarget::sample(RngStream& rng) const {
  const Eigen::Index k = block_dim();
  Vector out(total_dim());
  for (Eigen::Index i = 0; i < d_; ++i) base_->sample(rng, out.segment(i * k, k));
  return out;
}

CovarianceEstimate estimate_sigma(const Target& target, std::size_t n, RngStream& rng) {
  return covariance_of_draws(target, n, rng, true);
}

CovarianceEstimate estimate_gamma(const Target& target, std::size_t n, RngStream& rng) {
  return covariance_of_draws(target, n, rng, false);
}

ScalarEstimate estimate_var_log_pdf(const Target& target, std::size_t n, RngStream& rng) {
  if (!target.has_sampler()) throw UsageError("estimate: target has no sampler");
  if (n < 100) throw UsageError("estimate: need at least 100 draws");
  Eigen::ArrayXd values(static_cast<Eigen::Index>(n));
  Vector x(target.dim());
  for (std::size_t i = 0; i < n; ++i) {
    target.sample(rng, x);
    values(static_cast<Eigen::Index>(i)) = target.log_pdf(x);
  }
  const double dn = static_cast<double>(n);
  const Eigen::ArrayXd sq = (values - values.mean()).square();
  const double var = sq.sum() / (dn - 1.0);
  const double se = std::sqrt((sq - sq.mean()).square().sum() / (dn - 1.0) / dn);
  return {var, se};
}

SpdMatrix sigma_of(const Target& target, std::size_t n, RngStream& rng) {
  if (target.info().sigma) return *target.info().sigma;
  return estimate_sigma(target, n, rng).value;
}

SpdMatrix gamma_of(const Target& target, std::size_t n, RngStream& rng) {
  if (target.info().gamma) return *target.info().gamma;
  return estimate_gamma(target, n, rng).value;
}

}  // namespace rwmlab
