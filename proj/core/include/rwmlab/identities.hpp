#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/targets.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rwmlab {

enum class Comparison {
  two_sided,    // |estimate - reference| <= threshold * se + floor
  upper_bound,  // estimate - reference <= threshold * se + floor
};

struct IdentityReport {
  std::string identity_name;
  std::string target_name;
  Comparison comparison = Comparison::two_sided;
  // Row-major, rows x cols. `estimate` and `reference` are the two sides of
  // the identity; `standard_error` is the SE of their paired difference.
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  std::vector<double> estimate;
  std::vector<double> reference;
  std::vector<double> standard_error;
  double threshold_sigmas = 5.0;
  double abs_floor = 1e-9;
  bool pass = false;
  std::size_t n_samples = 0;
  std::size_t dropped = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool negative_control = false;
  std::vector<std::pair<std::string, double>> details;
};

// Recomputes `pass` from the stored components.
bool evaluate_verdict(const IdentityReport& report);

struct CheckSettings {
  std::size_t n = 1'000'000;
  double threshold_sigmas = 5.0;
  double abs_floor = 1e-9;
};

struct TestFunction {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

TestFunction constant_test_function();
TestFunction coordinate_test_function(Eigen::Index i);
TestFunction product_test_function(Eigen::Index i, Eigen::Index j);

// E f(X) score(X) = -E grad f(X).
IdentityReport check_ibp(const Target& target, const TestFunction& f, const CheckSettings& settings, RngStream& rng);

// Var score(X) = -E Hess log pi(X), entrywise.
IdentityReport check_score_covariance(const Target& target, const CheckSettings& settings, RngStream& rng);

// E exp<t, score(X)> <= exp(L ||t||^2 / 2) at every t in the grid (||t|| <= 1).
IdentityReport check_subgaussian(const Target& target, const std::vector<Vector>& t_grid,
                                 const CheckSettings& settings, RngStream& rng);

// Tangential Gaussian minorisation on random (x, x0) pairs and the uniform
// upper bound (L / 2 pi)^{k/2} exp(-||score(x)||^2 / 2L) at every evaluated
// point plus `x_grid`. Requires a normalised density and a declared L.
IdentityReport check_density_bounds(const Target& target, const std::vector<Vector>& x_grid, std::size_t n_pairs,
                                    RngStream& rng);

// ||score(x) - score(y)|| <= L ||x - y|| (1 + 1e-9) on mixed pairs: target
// draws, close pairs and heavy-tailed probes. `declared_L` overrides the target's L.
IdentityReport check_lipschitz_score(const Target& target, std::size_t n_pairs, RngStream& rng,
                                     std::optional<double> declared_L = std::nullopt);

// E ||score||^p for p = 2, 4, 6, 8 with standard errors (reported, not asserted).
struct ScoreMoments {
  std::vector<int> orders;
  std::vector<double> values;
  std::vector<double> standard_errors;
};
ScoreMoments score_moments(const Target& target, std::size_t n, RngStream& rng);

struct SuiteSettings {
  CheckSettings check;
  std::size_t n_pairs = 10'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool negative_controls = true;
  double corruption_factor = 1.1;
};

struct SuiteResult {
  std::vector<IdentityReport> checks;
  std::vector<IdentityReport> negative_controls;  // expected to fail
  ScoreMoments moments;
  bool checks_pass() const;
  // True when every negative control failed.
  bool controls_detected() const;
};

// Fixed battery: ibp with f = 1, x_1 and x_1 x_k; score covariance; sub-Gaussian
// MGF on a small t grid; density bounds; Lipschitz score. Negative controls
// rerun ibp (f = x_1), score covariance, sub-Gaussian, density bounds and
// Lipschitz against make_scaled_score(target, corruption_factor), plus the
// Lipschitz check with L/2 declared. Each check owns one stream.
SuiteResult run_identity_suite(const TargetPtr& target, const SuiteSettings& settings);

}  // namespace rwmlab
