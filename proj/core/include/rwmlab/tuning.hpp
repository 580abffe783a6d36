#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/spd_matrix.hpp"
#include "rwmlab/targets.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rwmlab {

// Maximiser of h(w) = w^2 Phi(-w), the universal optimal-scaling constant.
struct OmegaStar {
  double omega = 0.0;
  double h_tilde = 0.0;
};

double h_tilde(double omega) noexcept;
// Golden section on [0.5, 2.5] followed by Newton polishing to |h'| <= 1e-12.
OmegaStar solve_omega_star();
// Solved once on first use, then cached.
const OmegaStar& omega_star();

// Limiting acceptance rate 2 Phi(-l sqrt(Sigma:Lambda) / 2).
double acceptance_curve(double l, const SpdMatrix& sigma, const SpdMatrix& lambda);
double acceptance_curve(double l, double sigma_dot_lambda);

// 2 omega* / sqrt(Sigma:Lambda).
double optimal_l(const SpdMatrix& sigma, const SpdMatrix& lambda);
double optimal_l(double sigma_dot_lambda);

// k lambda_min(Sigma Lambda) / (Lambda:Sigma), the exact spectral gap of the
// standardised-speed diffusion for a Gaussian target with Sigma = Gamma^{-1}.
double gaussian_spectral_gap(const SpdMatrix& sigma, const SpdMatrix& lambda);

// Tr(Sigma) / (k lambda_min(Sigma)) >= 1.
double spherical_slowdown(const SpdMatrix& sigma);

// Lag-0 slope of Corr(v'X(0), v'X(t)) under the standardised diffusion:
// -k (v' Lambda v) / ((Lambda:Sigma) (v' Gamma v)).
double linear_acf_slope(const Vector& v, const SpdMatrix& lambda, const SpdMatrix& sigma,
                        const SpdMatrix& gamma);

// min over v of |linear_acf_slope|: k lambda_min(Gamma^{-1/2} Lambda Gamma^{-1/2}) / (Lambda:Sigma).
double worst_case_linear_slope(const SpdMatrix& lambda, const SpdMatrix& sigma, const SpdMatrix& gamma);

struct LinearShaping {
  SpdMatrix lambda;
  double worst_case_slope;  // k / Tr(Gamma^{1/2} Sigma Gamma^{1/2})
};
LinearShaping optimal_shaping_linear(const SpdMatrix& sigma, const SpdMatrix& gamma);

struct SpeedLimits {
  double linear = 0.0;              // k / (Gamma:Sigma)
  std::optional<double> logpi;      // k / Var(log pi)
};
SpeedLimits speed_limits(const SpdMatrix& sigma, const SpdMatrix& gamma, std::optional<double> var_log_pdf);
// Uses declared closed forms, estimating Sigma/Gamma with n draws when absent.
SpeedLimits speed_limits(const Target& target, std::size_t n, RngStream& rng);

struct HdScanRow {
  Eigen::Index k = 0;
  double gamma_sigma_over_k = 0.0;
  double var_log_pdf_over_k = 0.0;
  double spherical_gap = 0.0;  // gaussian_spectral_gap(Sigma, I)
  double shaped_gap = 0.0;     // gaussian_spectral_gap(Sigma, Gamma)
};

struct HdScan {
  std::vector<HdScanRow> rows;
  double linear_log_slope = 0.0;  // d log(ratio) / d log k
  double logpi_log_slope = 0.0;
  std::string linear_verdict;     // "bounded" or "growing"
  std::string logpi_verdict;
};

inline constexpr double kHdGrowthThreshold = 0.1;

// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

HdScan hd_dependence_scan(const std::vector<TargetPtr>& family, std::size_t n, RngStream& rng);

struct TuningReport {
  double omega_star = 0.0;
  double h_tilde_star = 0.0;
  SpdMatrix lambda;
  double sigma_dot_lambda = 0.0;
  double l_opt = 0.0;
  double predicted_acceptance = 0.0;
  double acceleration = 0.0;
  SpdMatrix lambda_recommended;
  double worst_case_linear_slope = 0.0;      // under `lambda`
  double recommended_linear_slope = 0.0;     // under `lambda_recommended`
  double speed_limit_linear = 0.0;
  std::optional<double> speed_limit_logpi;
  std::optional<double> spectral_gap_exact;
  std::optional<double> spherical_slowdown;
  // Delta-method standard errors, present when Sigma was estimated.
  std::optional<double> sigma_dot_lambda_se;
  std::optional<double> l_opt_se;
  bool sigma_estimated = false;
  bool gamma_estimated = false;
};

struct TuningInputs {
  SpdMatrix sigma;
  SpdMatrix gamma;
  std::optional<Matrix> sigma_se;  // per-entry SE when Sigma is estimated
  bool gamma_estimated = false;
  std::optional<double> var_log_pdf;
  TargetFamily family = TargetFamily::generic;
};

TuningReport make_tuning_report(const TuningInputs& inputs, const SpdMatrix& lambda);

}  // namespace rwmlab
