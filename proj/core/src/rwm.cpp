#include "rwmlab/rwm.hpp"

#include "rwmlab/errors.hpp"
#include "rwmlab/normal.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace rwmlab {

std::vector<double> grid_times(double horizon, double stride) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw UsageError("horizon must be finite and >= 0");
  if (!(stride > 0.0) || !std::isfinite(stride)) throw UsageError("stride must be finite and > 0");
  const auto count = static_cast<std::size_t>(std::floor(horizon / stride * (1.0 + 1e-9) + 1e-9));
  std::vector<double> out(count + 1);
  for (std::size_t i = 0; i <= count; ++i) out[i] = static_cast<double>(i) * stride;
  return out;
}

RwmConfig::RwmConfig(BlockProductTarget target_, SpdMatrix lambda_, double l_, Eigen::Index r_, double horizon_,
                     double stride_)
    : target(std::move(target_)), lambda(std::move(lambda_)), l(l_), r(r_), horizon(horizon_), stride(stride_) {
  if (target.blocks() < 2) throw UsageError("RwmConfig: need d >= 2 (proposal variance divides by d - 1)");
  if (r < 1 || r > target.blocks()) throw UsageError("RwmConfig: need 1 <= r <= d");
  if (lambda.dim() != target.block_dim()) throw UsageError("RwmConfig: Lambda must be k x k");
  if (!(l > 0.0) || !std::isfinite(l)) throw UsageError("RwmConfig: l must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw UsageError("RwmConfig: horizon must be >= 0");
  if (!(stride > 0.0) || !std::isfinite(stride)) throw UsageError("RwmConfig: stride must be > 0");
}

double RwmConfig::proposal_scale() const noexcept {
  return l / std::sqrt(static_cast<double>(d() - 1));
}

namespace {

// y = x + scale (I_d (x) L) xi with all k d normals drawn block by block in order.
void propose(const Vector& x, const Matrix& chol, double scale, Eigen::Index k, RngStream& rng, Vector& xi, Vector& y) {
  fill_normal(xi, rng);
  const Eigen::Index d = x.size() / k;
  Eigen::Map<const Matrix> xs(x.data(), k, d), noise(xi.data(), k, d);
  Eigen::Map<Matrix> ys(y.data(), k, d);
  if (k == 1) {
    y = x + (scale * chol(0, 0)) * xi;
  } else {
    ys.noalias() = chol.triangularView<Eigen::Lower>() * noise;
    ys = xs + scale * ys;
  }
}

// Running chain with the per-block log densities of the current state cached.
// Sums of per-block differences are formed exactly as in rwm_step, so both
// paths consume the same draws and produce identical states.
class Chain {
 public:
  Chain(const RwmConfig& cfg, Vector x0)
      : base_(cfg.target.base()), k_(cfg.k()), d_(cfg.d()), x_(std::move(x0)),
        y_(x_.size()), lp_(d_), lp_new_(d_), xi_(x_.size()), chol_(cfg.lambda.cholesky()),
        scale_(cfg.proposal_scale()) {
    for (Eigen::Index i = 0; i < d_; ++i) lp_(i) = base_.log_pdf(x_.segment(i * k_, k_));
  }

  bool step(RngStream& rng) {
    propose(x_, chol_, scale_, k_, rng, xi_, y_);
    double delta = 0.0;
    for (Eigen::Index i = 0; i < d_; ++i) {
      lp_new_(i) = base_.log_pdf(y_.segment(i * k_, k_));
      delta += lp_new_(i) - lp_(i);
    }
    const double log_u = std::log(rng.uniform());
    const bool accept = std::isfinite(delta) && log_u < delta;
    if (accept) {
      x_.swap(y_);
      lp_.swap(lp_new_);
    }
    return accept;
  }

  const Vector& state() const noexcept { return x_; }

 private:
  const Target& base_;
  Eigen::Index k_, d_;
  Vector x_, y_, lp_, lp_new_, xi_;
  const Matrix& chol_;
  double scale_;
};

Vector initial_state(const RwmConfig& cfg, const InitialState& x0, RngStream& rng, bool& stationary) {
  if (std::holds_alternative<Stationary>(x0)) {
    if (!cfg.target.base().has_sampler()) throw UsageError("stationary start needs a target sampler");
    stationary = true;
    return cfg.target.sample(rng);
  }
  const Vector& x = std::get<Vector>(x0);
  if (x.size() != cfg.target.total_dim()) throw UsageError("initial state must have k*d entries");
  if (!x.allFinite()) throw UsageError("initial state must be finite");
  stationary = false;
  return x;
}

template <typename NextEvent>
ChainPath drive(const RwmConfig& cfg, const InitialState& x0, double horizon, RngStream& rng, NextEvent next_event) {
  ChainPath path;
  path.times = grid_times(horizon, cfg.stride);
  const Eigen::Index width = cfg.r * cfg.k();
  path.states.resize(static_cast<Eigen::Index>(path.times.size()), width);

  Chain chain(cfg, initial_state(cfg, x0, rng, path.stationary_start));
  std::size_t g = 0;
  for (double t = next_event(rng); t <= horizon; t = next_event(rng)) {
    while (g < path.times.size() && path.times[g] < t) {
      path.states.row(static_cast<Eigen::Index>(g++)) = chain.state().head(width).transpose();
    }
    ++path.proposal_count;
    if (chain.step(rng)) ++path.accept_count;
  }
  while (g < path.times.size()) path.states.row(static_cast<Eigen::Index>(g++)) = chain.state().head(width).transpose();
  return path;
}

}  // namespace

StepResult rwm_step(const Vector& x, const RwmConfig& cfg, RngStream& rng) {
  const Target& base = cfg.target.base();
  const Eigen::Index k = cfg.k(), d = cfg.d();
  if (x.size() != k * d) throw UsageError("rwm_step: state must have k*d entries");
  const Matrix& chol = cfg.lambda.cholesky();
  const double scale = cfg.proposal_scale();
  Vector y(x.size()), xi(x.size());
  propose(x, chol, scale, k, rng, xi, y);
  double delta = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    delta += base.log_pdf(y.segment(i * k, k)) - base.log_pdf(x.segment(i * k, k));
  }
  const double log_u = std::log(rng.uniform());
  if (std::isfinite(delta) && log_u < delta) return {std::move(y), true};
  return {x, false};
}

double log_acceptance(const BlockProductTarget& target, const Vector& x, const Vector& y) {
  const Eigen::Index k = target.block_dim();
  if (x.size() != target.total_dim() || y.size() != target.total_dim()) {
    throw UsageError("log_acceptance: dimension mismatch");
  }
  double delta = 0.0;
  for (Eigen::Index i = 0; i < target.blocks(); ++i) {
    delta += target.base().log_pdf(y.segment(i * k, k)) - target.base().log_pdf(x.segment(i * k, k));
  }
  if (!std::isfinite(delta)) return delta > 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return std::min(0.0, delta);
}

ChainPath run_continuous(const RwmConfig& cfg, const InitialState& x0, RngStream& rng) {
  const double rate = cfg.event_rate();
  double clock = 0.0;
  return drive(cfg, x0, cfg.horizon, rng, [&](RngStream& r) { return clock += r.exponential(rate); });
}

ChainPath run_discrete(const RwmConfig& cfg, const InitialState& x0, std::uint64_t n_steps, RngStream& rng) {
  const double rate = cfg.event_rate();
  const double horizon = static_cast<double>(n_steps) / rate;
  std::uint64_t step = 0;
  // The final event must land on the horizon itself, so compare step counts,
  // not accumulated times.
  return drive(cfg, x0, horizon, rng, [&](RngStream&) {
    ++step;
    return step <= n_steps ? static_cast<double>(step) / rate : std::numeric_limits<double>::infinity();
  });
}

}  // namespace rwmlab
