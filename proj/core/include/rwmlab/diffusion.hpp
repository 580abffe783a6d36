#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/rwm.hpp"
#include "rwmlab/spd_matrix.hpp"
#include "rwmlab/targets.hpp"

#include <optional>

namespace rwmlab {

enum class Scheme { euler, tamed_euler };

// `generator`: coefficients chosen so the SDE has generator
//   nu * (Lambda : Hess f + score' Lambda grad f),
// i.e. drift nu Lambda score and diffusion sqrt(2 nu) sqrt(Lambda).
// `as_displayed`: drift 2 nu Lambda score, diffusion sqrt(4 nu) sqrt(Lambda),
// which generates twice the process above. Kept for auditing only.
enum class SdeConvention { generator, as_displayed };

// Langevin diffusion on r independent blocks. With `l` set the generator is
// G^{l,Lambda} = (k l^2 a(l) / 2)(...); without it the standardised-speed
// generator G^Lambda = (k / (Lambda:Sigma))(...) is used.
struct DiffusionConfig {
  DiffusionConfig(TargetPtr target, SpdMatrix lambda, std::optional<double> l, Eigen::Index r, double horizon,
                  double stride, std::optional<double> dt = std::nullopt,
                  std::optional<SpdMatrix> sigma = std::nullopt);

  TargetPtr target;
  SpdMatrix lambda;
  std::optional<double> l;
  SpdMatrix sigma;
  Eigen::Index r;
  double horizon;
  double stride;
  double dt;
  Scheme scheme = Scheme::euler;
  SdeConvention convention = SdeConvention::generator;

  bool standardized() const noexcept { return !l.has_value(); }
  Eigen::Index k() const noexcept { return lambda.dim(); }
};

// nu, the factor in front of (Lambda : Hess f + score' Lambda grad f):
// k l^2 a(l) / 2, or k / (Lambda:Sigma) in standardised mode.
double generator_rate(const DiffusionConfig& cfg);
// Time-scaling factor k l^2 a(l), or k / (Lambda:Sigma) in standardised mode.
double speed_factor(const DiffusionConfig& cfg);
// dt = 1e-3 / nu, so the dimensionless step is the same at every speed.
double default_dt(double generator_rate);

// Drift over r blocks: multiplier * Lambda * score, applied blockwise.
Vector drift(const Vector& x, const DiffusionConfig& cfg);
// k x k factor B; the increment noise is sqrt(dt) (I_r (x) B) xi.
Matrix diffusion_factor(const DiffusionConfig& cfg);

// Euler-Maruyama on the recording grid of rwm-engine. Each stride is split
// into ceil(stride / dt) equal sub-steps. A non-finite state aborts the
// replica: the path is truncated and `aborted` set.
ChainPath integrate(const DiffusionConfig& cfg, const InitialState& x0, RngStream& rng);

// l^2 a(l) (Lambda:Sigma) / 2: G^{l,Lambda} = acceleration_factor * G^Lambda.
double acceleration_factor(double l, const SpdMatrix& lambda, const SpdMatrix& sigma);

}  // namespace rwmlab
