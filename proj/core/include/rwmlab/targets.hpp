#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/spd_matrix.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

namespace rwmlab {

// Families for which spectral-gap statements are available in closed form.
enum class TargetFamily { generic, gaussian, rotated_scale };

// Closed-form facts a target may know about itself.
struct TargetInfo {
  std::string name;
  Eigen::Index k = 0;
  TargetFamily family = TargetFamily::generic;
  // True when log_pdf includes the exact normalising constant.
  bool normalized = false;
  std::optional<double> lipschitz;      // Lipschitz constant of the score
  std::optional<SpdMatrix> sigma;       // Var of the score under the target
  std::optional<SpdMatrix> gamma;       // Var of the state under the target
  std::optional<double> var_log_pdf;    // Var of log pi(X), X ~ pi
};

// A block density pi on R^k. Implementations are immutable: every method is a
// pure function of its arguments, so one instance can be shared across threads.
class Target {
 public:
  virtual ~Target() = default;

  virtual const TargetInfo& info() const noexcept = 0;
  Eigen::Index dim() const noexcept { return info().k; }

  virtual double log_pdf(const Eigen::Ref<const Vector>& x) const = 0;
  virtual void score(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const = 0;
  Vector score(const Eigen::Ref<const Vector>& x) const;

  virtual bool has_hessian() const noexcept { return false; }
  // Only meaningful when has_hessian(); the default throws UsageError.
  virtual Matrix hessian(const Eigen::Ref<const Vector>& x) const;

  virtual bool has_sampler() const noexcept { return true; }
  virtual void sample(RngStream& rng, Eigen::Ref<Vector> out) const = 0;
  Vector sample(RngStream& rng) const;
};

using TargetPtr = std::shared_ptr<const Target>;

// Closed-form Hessian when available, otherwise central differences of the
// score with step eps^(1/3) * max(1, ||x||).
Matrix hessian_or_fd(const Target& target, const Eigen::Ref<const Vector>& x);

// N(mu, Gamma): score -Gamma^{-1}(x - mu), Sigma = Gamma^{-1}, L = lambda_max(Gamma^{-1}).
TargetPtr make_gaussian(const Vector& mu, const SpdMatrix& gamma);
TargetPtr make_standard_normal(Eigen::Index k);

// Standard logistic density, log pi(x) = -x - 2 log(1 + e^{-x}); score 1 - 2F(x).
TargetPtr make_logistic_1d();

// pi(x) = prod_i c_i pi_1(c_i e_i' Q x) for a one-dimensional base pi_1.
// Throws UsageError if the base is not one-dimensional, lacks a sampler or a
// closed-form score variance, or if Q is not orthogonal to 1e-10.
TargetPtr make_rotated_scale_family(TargetPtr base1d, const Vector& scales, const Matrix& rotation);

// Negative-control wrapper: the score (and Hessian) of `base` multiplied by
// `factor` while log_pdf, sampler and declared constants stay untouched.
TargetPtr make_scaled_score(TargetPtr base, double factor);

// Pi_d = pi^{(x)d} on R^{kd}.
class BlockProductTarget {
 public:
  BlockProductTarget(TargetPtr base, Eigen::Index d);

  const Target& base() const noexcept { return *base_; }
  const TargetPtr& base_ptr() const noexcept { return base_; }
  Eigen::Index blocks() const noexcept { return d_; }
  Eigen::Index block_dim() const noexcept { return base_->dim(); }
  Eigen::Index total_dim() const noexcept { return d_ * base_->dim(); }

  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  Vector score(const Eigen::Ref<const Vector>& x) const;
  Vector sample(RngStream& rng) const;

 private:
  TargetPtr base_;
  Eigen::Index d_;
};

struct CovarianceEstimate {
  SpdMatrix value;
  Matrix standard_error;  // per entry
  Vector mean;
  std::size_t n = 0;
};

// Empirical covariance of score draws (resp. state draws) under exact sampling.
// Requires a sampler and n >= 100.
CovarianceEstimate estimate_sigma(const Target& target, std::size_t n, RngStream& rng);
CovarianceEstimate estimate_gamma(const Target& target, std::size_t n, RngStream& rng);

// Mean and standard error of Var(log pi(X)) by Monte Carlo.
struct ScalarEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};
ScalarEstimate estimate_var_log_pdf(const Target& target, std::size_t n, RngStream& rng);

// Sigma, Gamma and Var(log pi) from closed forms when declared; otherwise estimated with n draws.
SpdMatrix sigma_of(const Target& target, std::size_t n, RngStream& rng);
SpdMatrix gamma_of(const Target& target, std::size_t n, RngStream& rng);

}  // namespace rwmlab
