#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/spd_matrix.hpp"
#include "rwmlab/targets.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rwmlab {

// Time-stamped states of the first r blocks of a process.
struct ChainPath {
  std::vector<double> times;
  Matrix states;  // one row per entry of `times`, r*k columns
  std::uint64_t accept_count = 0;
  std::uint64_t proposal_count = 0;
  bool stationary_start = true;
  bool aborted = false;
  std::string diagnostic;
};

struct Stationary {};
using InitialState = std::variant<Stationary, Vector>;

// Recording grid {0, stride, 2 stride, ...} up to the horizon (inclusive, with
// a 1e-9 relative allowance). Entries are i * stride, never accumulated sums.
std::vector<double> grid_times(double horizon, double stride);

// Block-IID RWM on Pi_d with proposal N(0, l^2/(d-1) I_d (x) Lambda).
struct RwmConfig {
  RwmConfig(BlockProductTarget target, SpdMatrix lambda, double l, Eigen::Index r, double horizon, double stride);

  BlockProductTarget target;
  SpdMatrix lambda;
  double l;
  Eigen::Index r;
  double horizon;
  double stride;

  Eigen::Index k() const noexcept { return target.block_dim(); }
  Eigen::Index d() const noexcept { return target.blocks(); }
  // Poisson event rate k d of the accelerated continuous-time embedding.
  double event_rate() const noexcept { return static_cast<double>(k() * d()); }
  // l / sqrt(d - 1): multiplies chol(Lambda) z for each block increment.
  double proposal_scale() const noexcept;
};

struct StepResult {
  Vector state;
  bool accepted = false;
};

// One Metropolis transition. A non-finite proposal log-density counts as -inf
// and is rejected; a rejected proposal returns `x` bit for bit.
StepResult rwm_step(const Vector& x, const RwmConfig& cfg, RngStream& rng);

// log alpha(x -> y) = min(0, log Pi_d(y) - log Pi_d(x)), block sums in order.
double log_acceptance(const BlockProductTarget& target, const Vector& x, const Vector& y);

// Pure-jump process with Poisson(k d) event times on [0, horizon], each event a
// rwm_step. States are recorded cadlag on grid_times(horizon, stride).
ChainPath run_continuous(const RwmConfig& cfg, const InitialState& x0, RngStream& rng);

// Same kernel on a deterministic clock: event j happens at time j / (k d).
ChainPath run_discrete(const RwmConfig& cfg, const InitialState& x0, std::uint64_t n_steps, RngStream& rng);

}  // namespace rwmlab
