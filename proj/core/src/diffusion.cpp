#include "rwmlab/diffusion.hpp"

#include "rwmlab/errors.hpp"
#include "rwmlab/normal.hpp"
#include "rwmlab/tuning.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace rwmlab {
namespace {

SpdMatrix resolve_sigma(const TargetPtr& target, std::optional<SpdMatrix> sigma) {
  if (sigma) return *std::move(sigma);
  if (!target) throw UsageError("DiffusionConfig: null target");
  if (!target->info().sigma) {
    throw UsageError("DiffusionConfig: target '" + target->info().name + "' declares no Sigma; pass an estimate");
  }
  return *target->info().sigma;
}

double multiplier(const DiffusionConfig& cfg) {
  const double nu = generator_rate(cfg);
  return cfg.convention == SdeConvention::generator ? nu : 2.0 * nu;
}

}  // namespace

DiffusionConfig::DiffusionConfig(TargetPtr target_, SpdMatrix lambda_, std::optional<double> l_, Eigen::Index r_,
                                 double horizon_, double stride_, std::optional<double> dt_,
                                 std::optional<SpdMatrix> sigma_)
    : target(std::move(target_)), lambda(std::move(lambda_)), l(l_), sigma(resolve_sigma(target, std::move(sigma_))),
      r(r_), horizon(horizon_), stride(stride_), dt(0.0) {
  if (lambda.dim() != target->dim() || sigma.dim() != target->dim()) {
    throw UsageError("DiffusionConfig: Lambda and Sigma must be k x k");
  }
  if (r < 1) throw UsageError("DiffusionConfig: need r >= 1");
  if (l && (!(*l > 0.0) || !std::isfinite(*l))) throw UsageError("DiffusionConfig: l must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw UsageError("DiffusionConfig: horizon must be >= 0");
  if (!(stride > 0.0) || !std::isfinite(stride)) throw UsageError("DiffusionConfig: stride must be > 0");
  const double nu = generator_rate(*this);
  if (!(nu > 0.0) || !std::isfinite(nu)) throw UsageError("DiffusionConfig: speed factor must be finite and positive");
  dt = dt_ ? *dt_ : default_dt(nu);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("DiffusionConfig: dt must be > 0");
}

double generator_rate(const DiffusionConfig& cfg) {
  const double k = static_cast<double>(cfg.k());
  const double s = frobenius(cfg.lambda, cfg.sigma);
  if (cfg.l) return 0.5 * k * (*cfg.l) * (*cfg.l) * acceptance_curve(*cfg.l, s);
  return k / s;
}

double speed_factor(const DiffusionConfig& cfg) {
  return cfg.standardized() ? generator_rate(cfg) : 2.0 * generator_rate(cfg);
}

double default_dt(double rate) { return 1e-3 / rate; }

Vector drift(const Vector& x, const DiffusionConfig& cfg) {
  const Eigen::Index k = cfg.k();
  if (x.size() != cfg.r * k) throw UsageError("drift: state must have r*k entries");
  const double m = multiplier(cfg);
  Vector out(x.size()), s(k);
  for (Eigen::Index i = 0; i < cfg.r; ++i) {
    cfg.target->score(x.segment(i * k, k), s);
    out.segment(i * k, k).noalias() = m * (cfg.lambda.matrix() * s);
  }
  return out;
}

Matrix diffusion_factor(const DiffusionConfig& cfg) {
  return std::sqrt(2.0 * multiplier(cfg)) * cfg.lambda.sqrt();
}

ChainPath integrate(const DiffusionConfig& cfg, const InitialState& x0, RngStream& rng) {
  const Eigen::Index k = cfg.k(), width = cfg.r * k;
  ChainPath path;
  path.times = grid_times(cfg.horizon, cfg.stride);

  Vector x(width);
  if (std::holds_alternative<Stationary>(x0)) {
    if (!cfg.target->has_sampler()) throw UsageError("integrate: stationary start needs a sampler");
    for (Eigen::Index i = 0; i < cfg.r; ++i) cfg.target->sample(rng, x.segment(i * k, k));
    path.stationary_start = true;
  } else {
    x = std::get<Vector>(x0);
    if (x.size() != width || !x.allFinite()) throw UsageError("integrate: initial state must be r*k finite values");
    path.stationary_start = false;
  }

  const auto substeps = static_cast<long>(std::max(1.0, std::ceil(cfg.stride / cfg.dt - 1e-9)));
  const double h = cfg.stride / static_cast<double>(substeps);
  const double sqrt_h = std::sqrt(h);
  const double m = multiplier(cfg);
  const Matrix& lam = cfg.lambda.matrix();
  const Matrix noise = diffusion_factor(cfg);

  path.states.resize(static_cast<Eigen::Index>(path.times.size()), width);
  path.states.row(0) = x.transpose();
  Vector mu(width), s(k), xi(k);
  for (std::size_t g = 1; g < path.times.size(); ++g) {
    for (long n = 0; n < substeps; ++n) {
      for (Eigen::Index i = 0; i < cfg.r; ++i) {
        cfg.target->score(x.segment(i * k, k), s);
        mu.segment(i * k, k).noalias() = m * (lam * s);
      }
      if (cfg.scheme == Scheme::tamed_euler) {
        const double norm = mu.norm();
        if (norm > 1.0 / h) mu *= (1.0 / h) / norm;
      }
      for (Eigen::Index i = 0; i < cfg.r; ++i) {
        fill_normal(xi, rng);
        x.segment(i * k, k) += h * mu.segment(i * k, k) + sqrt_h * (noise * xi);
      }
      if (!x.allFinite()) {
        path.aborted = true;
        path.diagnostic = "non-finite state at t=" + std::to_string(path.times[g - 1] + static_cast<double>(n + 1) * h);
        path.times.resize(g);
        path.states.conservativeResize(static_cast<Eigen::Index>(g), width);
        return path;
      }
    }
    path.states.row(static_cast<Eigen::Index>(g)) = x.transpose();
  }
  return path;
}

double acceleration_factor(double l, const SpdMatrix& lambda, const SpdMatrix& sigma) {
  if (l < 0.0) throw UsageError("acceleration_factor: l must be >= 0");
  const double s = frobenius(lambda, sigma);
  return 0.5 * l * l * acceptance_curve(l, s) * s;
}

}  // namespace rwmlab
