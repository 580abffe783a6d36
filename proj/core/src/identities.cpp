#include "rwmlab/identities.hpp"

#include "rwmlab/errors.hpp"
#include "rwmlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rwmlab {
namespace {

// Accumulates per-sample difference vectors d_i together with both sides.
class PairedMean {
 public:
  explicit PairedMean(Eigen::Index dim) : lhs_(Vector::Zero(dim)), rhs_(Vector::Zero(dim)), diff_(Vector::Zero(dim)),
                                          diff_sq_(Vector::Zero(dim)) {}

  void add(const Vector& lhs, const Vector& rhs) {
    const Vector d = lhs - rhs;
    lhs_ += lhs;
    rhs_ += rhs;
    // Welford update on the paired difference.
    ++n_;
    const Vector delta = d - diff_;
    diff_ += delta / static_cast<double>(n_);
    diff_sq_ += delta.cwiseProduct(d - diff_);
  }

  std::size_t count() const noexcept { return n_; }
  Vector lhs_mean() const { return lhs_ / static_cast<double>(n_); }
  Vector rhs_mean() const { return rhs_ / static_cast<double>(n_); }
  Vector diff_se() const {
    const double n = static_cast<double>(n_);
    return (diff_sq_ / (n - 1.0) / n).cwiseSqrt();
  }

 private:
  Vector lhs_, rhs_, diff_, diff_sq_;
  std::size_t n_ = 0;
};

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void require_sampler(const Target& target, const char* who) {
  if (!target.has_sampler()) throw UsageError(std::string(who) + ": target has no sampler");
}

IdentityReport base_report(const char* name, const Target& target, const CheckSettings& s, const RngStream& rng) {
  IdentityReport r;
  r.identity_name = name;
  r.target_name = target.info().name;
  r.threshold_sigmas = s.threshold_sigmas;
  r.abs_floor = s.abs_floor;
  r.seed = rng.seed();
  r.stream = rng.stream_id();
  return r;
}

constexpr double kMaxDroppedFraction = 1e-3;

void finish(IdentityReport& r) {
  r.pass = evaluate_verdict(r);
  if (r.n_samples > 0 && static_cast<double>(r.dropped) > kMaxDroppedFraction * static_cast<double>(r.n_samples)) {
    r.pass = false;
  }
}

// Pair generator shared by the pointwise checks.
struct PairSampler {
  const Target& target;
  RngStream& rng;
  Vector probe_scale;

  Vector heavy_probe() {
    Vector x(target.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = probe_scale(i) * std::tan(std::numbers::pi * (rng.uniform() - 0.5));
    }
    return x;
  }

  Vector near(const Vector& x0) {
    // Separation log-uniform in [1e-3, 1] relative to max(1, ||x0||).
    const double delta = std::pow(10.0, -3.0 * rng.uniform()) * std::max(1.0, x0.norm());
    Vector xi(x0.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    return x0 + delta * xi / std::max(xi.norm(), 1e-300);
  }

  std::pair<Vector, Vector> operator()(std::size_t i) {
    switch (i % 4) {
      case 0: {
        Vector a = target.sample(rng);
        return {a, target.sample(rng)};
      }
      case 1: {
        Vector a = target.sample(rng);
        return {a, near(a)};
      }
      case 2: {
        Vector a = heavy_probe();
        return {a, near(a)};
      }
      default: {
        Vector a = heavy_probe();
        return {a, heavy_probe()};
      }
    }
  }
};

Vector default_probe_scale(const Target& target) {
  if (target.info().gamma) return target.info().gamma->matrix().diagonal().cwiseSqrt();
  return Vector::Ones(target.dim());
}

}  // namespace

bool evaluate_verdict(const IdentityReport& r) {
  for (std::size_t i = 0; i < r.estimate.size(); ++i) {
    const double diff = r.estimate[i] - r.reference[i];
    const double allowance = r.threshold_sigmas * r.standard_error[i] + r.abs_floor;
    if (!std::isfinite(diff)) return false;
    if (r.comparison == Comparison::two_sided ? std::abs(diff) > allowance : diff > allowance) return false;
  }
  return true;
}

TestFunction constant_test_function() {
  return {"f=1", [](const Vector&) { return 1.0; }, [](const Vector& x) { return Vector::Zero(x.size()).eval(); }};
}

TestFunction coordinate_test_function(Eigen::Index i) {
  return {"f=x_" + std::to_string(i + 1), [i](const Vector& x) { return x(i); },
          [i](const Vector& x) {
            Vector g = Vector::Zero(x.size());
            g(i) = 1.0;
            return g;
          }};
}

TestFunction product_test_function(Eigen::Index i, Eigen::Index j) {
  return {"f=x_" + std::to_string(i + 1) + "*x_" + std::to_string(j + 1), [i, j](const Vector& x) { return x(i) * x(j); },
          [i, j](const Vector& x) {
            Vector g = Vector::Zero(x.size());
            g(i) += x(j);
            g(j) += x(i);
            return g;
          }};
}

IdentityReport check_ibp(const Target& target, const TestFunction& f, const CheckSettings& s, RngStream& rng) {
  require_sampler(target, "check_ibp");
  IdentityReport r = base_report(("ibp[" + f.name + "]").c_str(), target, s, rng);
  const Eigen::Index k = target.dim();
  PairedMean acc(k);
  Vector x(k), score(k);
  for (std::size_t i = 0; i < s.n; ++i) {
    target.sample(rng, x);
    target.score(x, score);
    const Vector lhs = f.value(x) * score;
    const Vector rhs = -f.gradient(x);
    if (!lhs.allFinite() || !rhs.allFinite()) {
      ++r.dropped;
      continue;
    }
    acc.add(lhs, rhs);
  }
  r.rows = k;
  r.cols = 1;
  r.n_samples = s.n;
  r.estimate = to_std(acc.lhs_mean());
  r.reference = to_std(acc.rhs_mean());
  r.standard_error = to_std(acc.diff_se());
  finish(r);
  return r;
}

IdentityReport check_score_covariance(const Target& target, const CheckSettings& s, RngStream& rng) {
  require_sampler(target, "check_score_covariance");
  IdentityReport r = base_report("score-covariance", target, s, rng);
  const Eigen::Index k = target.dim();
  // First pass for the score mean so that the covariance is centred exactly.
  std::vector<Vector> xs;
  xs.reserve(s.n);
  Vector mean = Vector::Zero(k), score(k);
  for (std::size_t i = 0; i < s.n; ++i) {
    Vector x = target.sample(rng);
    target.score(x, score);
    if (!score.allFinite()) {
      ++r.dropped;
      continue;
    }
    mean += score;
    xs.push_back(std::move(x));
  }
  mean /= static_cast<double>(xs.size());
  PairedMean acc(k * k);
  Vector lhs(k * k), rhs(k * k);
  for (const Vector& x : xs) {
    target.score(x, score);
    const Vector c = score - mean;
    const Matrix outer = c * c.transpose();
    const Matrix h = -hessian_or_fd(target, x);
    if (!h.allFinite()) {
      ++r.dropped;
      continue;
    }
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) {
        lhs(a * k + b) = outer(a, b);
        rhs(a * k + b) = h(a, b);
      }
    acc.add(lhs, rhs);
  }
  const double n = static_cast<double>(acc.count());
  r.rows = k;
  r.cols = k;
  r.n_samples = s.n;
  r.estimate = to_std(acc.lhs_mean() * n / (n - 1.0));
  r.reference = to_std(acc.rhs_mean());
  r.standard_error = to_std(acc.diff_se());
  finish(r);
  return r;
}

IdentityReport check_subgaussian(const Target& target, const std::vector<Vector>& t_grid, const CheckSettings& s,
                                 RngStream& rng) {
  require_sampler(target, "check_subgaussian");
  if (!target.info().lipschitz) throw UsageError("check_subgaussian: target declares no Lipschitz constant");
  if (t_grid.empty()) throw UsageError("check_subgaussian: empty t grid");
  const Eigen::Index k = target.dim();
  for (const Vector& t : t_grid) {
    if (t.size() != k) throw UsageError("check_subgaussian: t has the wrong dimension");
    if (t.norm() > 1.0 + 1e-12) throw UsageError("check_subgaussian: MGF estimation needs ||t|| <= 1");
  }
  const double L = *target.info().lipschitz;
  IdentityReport r = base_report("subgaussian-mgf", target, s, rng);
  r.comparison = Comparison::upper_bound;
  const auto m = static_cast<Eigen::Index>(t_grid.size());
  Vector bound(m);
  for (Eigen::Index j = 0; j < m; ++j) bound(j) = std::exp(0.5 * L * t_grid[static_cast<std::size_t>(j)].squaredNorm());
  PairedMean acc(m);
  Vector x(k), score(k), mgf(m);
  for (std::size_t i = 0; i < s.n; ++i) {
    target.sample(rng, x);
    target.score(x, score);
    for (Eigen::Index j = 0; j < m; ++j) mgf(j) = std::exp(t_grid[static_cast<std::size_t>(j)].dot(score));
    if (!mgf.allFinite()) {
      ++r.dropped;
      continue;
    }
    acc.add(mgf, bound);
  }
  r.rows = m;
  r.cols = 1;
  r.n_samples = s.n;
  r.estimate = to_std(acc.lhs_mean());
  r.reference = to_std(bound);
  r.standard_error = to_std(acc.diff_se());
  finish(r);
  return r;
}

IdentityReport check_density_bounds(const Target& target, const std::vector<Vector>& x_grid, std::size_t n_pairs,
                                    RngStream& rng) {
  const TargetInfo& info = target.info();
  if (!info.normalized) throw UsageError("check_density_bounds: density must be normalised");
  if (!info.lipschitz) throw UsageError("check_density_bounds: target declares no Lipschitz constant");
  require_sampler(target, "check_density_bounds");
  const double L = *info.lipschitz;
  const Eigen::Index k = target.dim();
  const double log_cap = 0.5 * static_cast<double>(k) * std::log(L / (2.0 * std::numbers::pi));

  std::size_t minor_violations = 0, upper_violations = 0, upper_evaluations = 0;
  double worst_minor = -INFINITY, worst_upper = -INFINITY;
  auto check_upper = [&](const Vector& x) {
    const double lp = target.log_pdf(x);
    const double rhs = log_cap - target.score(x).squaredNorm() / (2.0 * L);
    const double slack = lp - rhs;
    const double tol = 1e-9 * std::max({1.0, std::abs(lp), std::abs(rhs)});
    worst_upper = std::max(worst_upper, slack);
    ++upper_evaluations;
    if (slack > tol) ++upper_violations;
  };

  PairSampler pairs{target, rng, default_probe_scale(target)};
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto [x0, x] = pairs(i);
    const Vector g = target.score(x0);
    const double lp0 = target.log_pdf(x0), lp = target.log_pdf(x);
    // log pi(x) >= log pi(x0) + ||g||^2 / 2L - (L/2) ||x - x0 - g/L||^2
    const double quad = 0.5 * L * (x - x0 - g / L).squaredNorm();
    const double lower = lp0 + g.squaredNorm() / (2.0 * L) - quad;
    const double slack = lower - lp;
    const double tol = 1e-9 * std::max({1.0, std::abs(lp), std::abs(lp0), quad});
    worst_minor = std::max(worst_minor, slack);
    if (slack > tol) ++minor_violations;
    check_upper(x0);
    check_upper(x);
  }
  for (const Vector& x : x_grid) {
    if (x.size() != k) throw UsageError("check_density_bounds: grid point has the wrong dimension");
    check_upper(x);
  }

  CheckSettings s;
  IdentityReport r = base_report("density-bounds", target, s, rng);
  r.rows = 2;
  r.cols = 1;
  r.n_samples = n_pairs;
  r.estimate = {static_cast<double>(minor_violations), static_cast<double>(upper_violations)};
  r.reference = {0.0, 0.0};
  r.standard_error = {0.0, 0.0};
  r.details = {{"tangent_minorant_pairs", static_cast<double>(n_pairs)},
               {"upper_bound_points", static_cast<double>(upper_evaluations)},
               {"max_minorant_excess", worst_minor},
               {"max_upper_bound_excess", worst_upper}};
  finish(r);
  return r;
}

IdentityReport check_lipschitz_score(const Target& target, std::size_t n_pairs, RngStream& rng,
                                     std::optional<double> declared_L) {
  if (!declared_L) declared_L = target.info().lipschitz;
  if (!declared_L) throw UsageError("check_lipschitz_score: no Lipschitz constant declared");
  require_sampler(target, "check_lipschitz_score");
  const double L = *declared_L;
  PairSampler pairs{target, rng, default_probe_scale(target)};
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto [x, y] = pairs(i);
    const double dx = (x - y).norm();
    if (dx == 0.0) continue;
    const double ratio = (target.score(x) - target.score(y)).norm() / dx;
    worst = std::max(worst, ratio);
    if (ratio > L * (1.0 + 1e-9)) ++violations;
  }
  CheckSettings s;
  IdentityReport r = base_report("lipschitz-score", target, s, rng);
  r.n_samples = n_pairs;
  r.estimate = {static_cast<double>(violations)};
  r.reference = {0.0};
  r.standard_error = {0.0};
  r.details = {{"declared_L", L}, {"max_ratio", worst}};
  finish(r);
  return r;
}

ScoreMoments score_moments(const Target& target, std::size_t n, RngStream& rng) {
  require_sampler(target, "score_moments");
  if (n < 2) throw UsageError("score_moments: need n >= 2");
  ScoreMoments out{{2, 4, 6, 8}, {}, {}};
  PairedMean acc(4);
  Vector x(target.dim()), score(target.dim()), powers(4);
  const Vector zero = Vector::Zero(4);
  for (std::size_t i = 0; i < n; ++i) {
    target.sample(rng, x);
    target.score(x, score);
    const double s2 = score.squaredNorm();
    powers << s2, s2 * s2, s2 * s2 * s2, s2 * s2 * s2 * s2;
    acc.add(powers, zero);
  }
  out.values = to_std(acc.lhs_mean());
  out.standard_errors = to_std(acc.diff_se());
  return out;
}

bool SuiteResult::checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const IdentityReport& r) { return r.pass; });
}

bool SuiteResult::controls_detected() const {
  return std::all_of(negative_controls.begin(), negative_controls.end(), [](const IdentityReport& r) { return !r.pass; });
}

SuiteResult run_identity_suite(const TargetPtr& target, const SuiteSettings& settings) {
  if (!target) throw UsageError("run_identity_suite: null target");
  const Eigen::Index k = target->dim();
  std::vector<Vector> t_grid;
  {
    Vector t = Vector::Zero(k);
    t_grid.push_back(t);
    t(0) = 0.5;
    t_grid.push_back(t);
    t(0) = -1.0;
    t_grid.push_back(t);
    t_grid.push_back(Vector::Constant(k, 1.0 / std::sqrt(static_cast<double>(k))));
  }
  std::vector<Vector> x_grid = {Vector::Zero(k), Vector::Unit(k, 0), Vector::Constant(k, -2.0)};
  const TargetPtr corrupted = make_scaled_score(target, settings.corruption_factor);

  using Job = std::function<IdentityReport(RngStream&)>;
  std::vector<std::pair<bool, Job>> jobs;  // (negative control?, job)
  const CheckSettings& cs = settings.check;
  jobs.emplace_back(false, [&](RngStream& rng) { return check_ibp(*target, constant_test_function(), cs, rng); });
  jobs.emplace_back(false, [&](RngStream& rng) { return check_ibp(*target, coordinate_test_function(0), cs, rng); });
  jobs.emplace_back(false, [&](RngStream& rng) { return check_ibp(*target, product_test_function(0, k - 1), cs, rng); });
  jobs.emplace_back(false, [&](RngStream& rng) { return check_score_covariance(*target, cs, rng); });
  jobs.emplace_back(false, [&](RngStream& rng) { return check_subgaussian(*target, t_grid, cs, rng); });
  jobs.emplace_back(false, [&](RngStream& rng) { return check_density_bounds(*target, x_grid, settings.n_pairs, rng); });
  jobs.emplace_back(false, [&](RngStream& rng) { return check_lipschitz_score(*target, settings.n_pairs, rng); });
  if (settings.negative_controls) {
    jobs.emplace_back(true, [&](RngStream& rng) { return check_ibp(*corrupted, coordinate_test_function(0), cs, rng); });
    jobs.emplace_back(true, [&](RngStream& rng) { return check_score_covariance(*corrupted, cs, rng); });
    jobs.emplace_back(true, [&](RngStream& rng) { return check_subgaussian(*corrupted, t_grid, cs, rng); });
    jobs.emplace_back(true, [&](RngStream& rng) { return check_density_bounds(*corrupted, x_grid, settings.n_pairs, rng); });
    jobs.emplace_back(true, [&](RngStream& rng) { return check_lipschitz_score(*corrupted, settings.n_pairs, rng); });
    jobs.emplace_back(true, [&](RngStream& rng) {
      const double half = 0.5 * target->info().lipschitz.value_or(1.0);
      IdentityReport r = check_lipschitz_score(*target, settings.n_pairs, rng, half);
      r.identity_name += "[declared L/2]";
      return r;
    });
  }

  const std::size_t moments_job = jobs.size();
  ScoreMoments moments;
  auto reports = parallel_map(jobs.size() + 1, settings.threads, [&](std::size_t i) {
    RngStream rng(settings.seed, stream_id(streams::kIdentity, static_cast<std::uint32_t>(i)));
    if (i == moments_job) {
      moments = score_moments(*target, cs.n, rng);
      return IdentityReport{};
    }
    IdentityReport r = jobs[i].second(rng);
    r.negative_control = jobs[i].first;
    return r;
  });

  SuiteResult out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    (jobs[i].first ? out.negative_controls : out.checks).push_back(std::move(reports[i]));
  }
  out.moments = std::move(moments);
  return out;
}

}  // namespace rwmlab
