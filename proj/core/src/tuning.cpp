#include "rwmlab/tuning.hpp"

#include "rwmlab/diffusion.hpp"
#include "rwmlab/errors.hpp"
#include "rwmlab/normal.hpp"

#include <cmath>

namespace rwmlab {
namespace {

// h'(w) = 2 w Phi(-w) - w^2 phi(w)
double h_tilde_prime(double w) noexcept { return 2.0 * w * normal_cdf(-w) - w * w * normal_pdf(w); }

double h_tilde_second(double w) noexcept {
  const double phi = normal_pdf(w);
  return 2.0 * normal_cdf(-w) - 4.0 * w * phi + w * w * w * phi;
}

void require_same_dim(const SpdMatrix& a, const SpdMatrix& b, const char* who) {
  if (a.dim() != b.dim()) throw UsageError(std::string(who) + ": dimension mismatch");
}

}  // namespace

double h_tilde(double omega) noexcept { return omega * omega * normal_cdf(-omega); }

OmegaStar solve_omega_star() {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.5, hi = 2.5;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = h_tilde(x1), f2 = h_tilde(x2);
  while (hi - lo > 1e-6) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = h_tilde(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = h_tilde(x1);
    }
  }
  double w = 0.5 * (lo + hi);
  for (int it = 0; it < 50 && std::abs(h_tilde_prime(w)) > 1e-12; ++it) {
    w -= h_tilde_prime(w) / h_tilde_second(w);
  }
  return {w, h_tilde(w)};
}

const OmegaStar& omega_star() {
  static const OmegaStar cached = solve_omega_star();
  return cached;
}

double acceptance_curve(double l, double sigma_dot_lambda) {
  if (!(sigma_dot_lambda > 0.0)) throw UsageError("acceptance_curve: Sigma:Lambda must be positive");
  if (l < 0.0) throw UsageError("acceptance_curve: l must be non-negative");
  return 2.0 * normal_cdf(-0.5 * l * std::sqrt(sigma_dot_lambda));
}

double acceptance_curve(double l, const SpdMatrix& sigma, const SpdMatrix& lambda) {
  require_same_dim(sigma, lambda, "acceptance_curve");
  return acceptance_curve(l, frobenius(sigma, lambda));
}

double optimal_l(double sigma_dot_lambda) {
  if (!(sigma_dot_lambda > 0.0)) throw UsageError("optimal_l: Sigma:Lambda must be positive");
  return 2.0 * omega_star().omega / std::sqrt(sigma_dot_lambda);
}

double optimal_l(const SpdMatrix& sigma, const SpdMatrix& lambda) {
  require_same_dim(sigma, lambda, "optimal_l");
  return optimal_l(frobenius(sigma, lambda));
}

double gaussian_spectral_gap(const SpdMatrix& sigma, const SpdMatrix& lambda) {
  require_same_dim(sigma, lambda, "gaussian_spectral_gap");
  // sqrt(S) L sqrt(S) is similar to S L and symmetric.
  const Matrix root = sigma.sqrt();
  const Matrix conj = root * lambda.matrix() * root;
  const double k = static_cast<double>(sigma.dim());
  return k * min_eigenvalue(0.5 * (conj + conj.transpose())) / frobenius(lambda, sigma);
}

double spherical_slowdown(const SpdMatrix& sigma) {
  return sigma.trace() / (static_cast<double>(sigma.dim()) * min_eigenvalue(sigma.matrix()));
}

double linear_acf_slope(const Vector& v, const SpdMatrix& lambda, const SpdMatrix& sigma,
                        const SpdMatrix& gamma) {
  require_same_dim(lambda, sigma, "linear_acf_slope");
  require_same_dim(lambda, gamma, "linear_acf_slope");
  if (v.size() != lambda.dim()) throw UsageError("linear_acf_slope: v has the wrong dimension");
  if (v.squaredNorm() == 0.0) throw UsageError("linear_acf_slope: v must be non-zero");
  const double k = static_cast<double>(lambda.dim());
  return -k * v.dot(lambda.matrix() * v) / (frobenius(lambda, sigma) * v.dot(gamma.matrix() * v));
}

double worst_case_linear_slope(const SpdMatrix& lambda, const SpdMatrix& sigma, const SpdMatrix& gamma) {
  require_same_dim(lambda, sigma, "worst_case_linear_slope");
  require_same_dim(lambda, gamma, "worst_case_linear_slope");
  const Matrix g = symmetric_inverse_sqrt(gamma.matrix());
  const Matrix m = g * lambda.matrix() * g;
  const double k = static_cast<double>(lambda.dim());
  return k * min_eigenvalue(0.5 * (m + m.transpose())) / frobenius(lambda, sigma);
}

LinearShaping optimal_shaping_linear(const SpdMatrix& sigma, const SpdMatrix& gamma) {
  require_same_dim(sigma, gamma, "optimal_shaping_linear");
  const Matrix root = gamma.sqrt();
  const double k = static_cast<double>(sigma.dim());
  return {gamma, k / (root * sigma.matrix() * root).trace()};
}

SpeedLimits speed_limits(const SpdMatrix& sigma, const SpdMatrix& gamma, std::optional<double> var_log_pdf) {
  require_same_dim(sigma, gamma, "speed_limits");
  const double k = static_cast<double>(sigma.dim());
  SpeedLimits out;
  out.linear = k / frobenius(gamma, sigma);
  if (var_log_pdf) {
    if (!(*var_log_pdf > 0.0)) throw UsageError("speed_limits: Var(log pi) must be positive");
    out.logpi = k / *var_log_pdf;
  }
  return out;
}

SpeedLimits speed_limits(const Target& target, std::size_t n, RngStream& rng) {
  const SpdMatrix sigma = sigma_of(target, n, rng);
  const SpdMatrix gamma = gamma_of(target, n, rng);
  std::optional<double> vlp = target.info().var_log_pdf;
  if (!vlp && target.has_sampler()) vlp = estimate_var_log_pdf(target, n, rng).value;
  return speed_limits(sigma, gamma, vlp);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("log_log_slope: need >= 2 matched points");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw UsageError("log_log_slope: x values must differ");
  return sxy / sxx;
}

HdScan hd_dependence_scan(const std::vector<TargetPtr>& family, std::size_t n, RngStream& rng) {
  if (family.size() < 2) throw UsageError("hd_dependence_scan: need at least two family members");
  HdScan scan;
  std::vector<double> ks, lin, logpi;
  for (const TargetPtr& member : family) {
    const Target& t = *member;
    const SpdMatrix sigma = sigma_of(t, n, rng);
    const SpdMatrix gamma = gamma_of(t, n, rng);
    const double vlp = t.info().var_log_pdf ? *t.info().var_log_pdf : estimate_var_log_pdf(t, n, rng).value;
    const double k = static_cast<double>(t.dim());
    HdScanRow row;
    row.k = t.dim();
    row.gamma_sigma_over_k = frobenius(gamma, sigma) / k;
    row.var_log_pdf_over_k = vlp / k;
    row.spherical_gap = gaussian_spectral_gap(sigma, SpdMatrix::identity(t.dim()));
    row.shaped_gap = gaussian_spectral_gap(sigma, gamma);
    scan.rows.push_back(row);
    ks.push_back(k);
    lin.push_back(row.gamma_sigma_over_k);
    logpi.push_back(row.var_log_pdf_over_k);
  }
  scan.linear_log_slope = log_log_slope(ks, lin);
  scan.logpi_log_slope = log_log_slope(ks, logpi);
  scan.linear_verdict = scan.linear_log_slope > kHdGrowthThreshold ? "growing" : "bounded";
  scan.logpi_verdict = scan.logpi_log_slope > kHdGrowthThreshold ? "growing" : "bounded";
  return scan;
}

TuningReport make_tuning_report(const TuningInputs& in, const SpdMatrix& lambda) {
  require_same_dim(in.sigma, lambda, "make_tuning_report");
  require_same_dim(in.sigma, in.gamma, "make_tuning_report");
  const OmegaStar& w = omega_star();
  const double s = frobenius(in.sigma, lambda);
  const LinearShaping shaping = optimal_shaping_linear(in.sigma, in.gamma);
  const SpeedLimits limits = speed_limits(in.sigma, in.gamma, in.var_log_pdf);

  TuningReport r{.omega_star = w.omega,
                 .h_tilde_star = w.h_tilde,
                 .lambda = lambda,
                 .sigma_dot_lambda = s,
                 .l_opt = optimal_l(s),
                 .predicted_acceptance = 0.0,
                 .acceleration = 0.0,
                 .lambda_recommended = shaping.lambda,
                 .worst_case_linear_slope = worst_case_linear_slope(lambda, in.sigma, in.gamma),
                 .recommended_linear_slope = shaping.worst_case_slope,
                 .speed_limit_linear = limits.linear,
                 .speed_limit_logpi = limits.logpi,
                 .spectral_gap_exact = std::nullopt,
                 .spherical_slowdown = std::nullopt,
                 .sigma_dot_lambda_se = std::nullopt,
                 .l_opt_se = std::nullopt};
  r.predicted_acceptance = acceptance_curve(r.l_opt, s);
  r.acceleration = acceleration_factor(r.l_opt, lambda, in.sigma);
  if (in.family == TargetFamily::gaussian) r.spectral_gap_exact = gaussian_spectral_gap(in.sigma, lambda);
  // For rotated scale families the speed-up holds among Lambda = Q'DQ only.
  if (in.family != TargetFamily::generic) r.spherical_slowdown = spherical_slowdown(in.sigma);
  if (in.sigma_se) {
    // First-order propagation, treating entry errors as independent.
    const double se = std::sqrt((lambda.matrix().array().square() * in.sigma_se->array().square()).sum());
    r.sigma_dot_lambda_se = se;
    r.l_opt_se = w.omega * std::pow(s, -1.5) * se;
    r.sigma_estimated = true;
  }
  r.gamma_estimated = in.gamma_estimated;
  return r;
}

}  // namespace rwmlab
