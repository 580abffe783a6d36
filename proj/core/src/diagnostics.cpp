#include "rwmlab/diagnostics.hpp"

#include "rwmlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace rwmlab {

RateEstimate empirical_acceptance(const std::vector<ChainPath>& paths) {
  std::uint64_t accepted = 0, proposed = 0;
  for (const ChainPath& p : paths) {
    accepted += p.accept_count;
    proposed += p.proposal_count;
  }
  if (proposed == 0) throw UsageError("empirical_acceptance: no proposals recorded");
  const double n = static_cast<double>(proposed);
  const double rate = static_cast<double>(accepted) / n;
  return {rate, std::sqrt(rate * (1.0 - rate) / n)};
}

std::ptrdiff_t time_index(const ChainPath& path, double t) {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  const auto it = std::lower_bound(path.times.begin(), path.times.end(), t - tol);
  if (it == path.times.end() || std::abs(*it - t) > tol) return -1;
  return it - path.times.begin();
}

AcfEstimate stationary_acf(const std::vector<ChainPath>& paths, const PathFunctional& f,
                           const std::vector<double>& lags) {
  if (lags.empty()) throw UsageError("stationary_acf: no lags requested");
  std::vector<const ChainPath*> usable;
  for (const ChainPath& p : paths)
    if (!p.aborted) usable.push_back(&p);
  if (usable.size() < 30) throw UsageError("stationary_acf: need at least 30 replicas");

  const auto n = static_cast<Eigen::Index>(usable.size());
  const auto m = static_cast<Eigen::Index>(lags.size());
  Matrix y(n, m + 1);  // column 0 holds Y(0)
  for (Eigen::Index i = 0; i < n; ++i) {
    const ChainPath& p = *usable[static_cast<std::size_t>(i)];
    const std::ptrdiff_t i0 = time_index(p, 0.0);
    if (i0 < 0) throw UsageError("stationary_acf: lag 0 is not on the grid");
    y(i, 0) = f(p.states.row(i0).transpose());
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::ptrdiff_t idx = time_index(p, lags[static_cast<std::size_t>(j)]);
      if (idx < 0) throw UsageError("stationary_acf: lag " + std::to_string(lags[static_cast<std::size_t>(j)]) + " is not on the grid");
      y(i, j + 1) = f(p.states.row(idx).transpose());
    }
  }
  const double dn = static_cast<double>(n);
  const Vector u = y.col(0).array() - y.col(0).mean();
  const double var0 = u.squaredNorm() / dn;
  if (!(var0 > 0.0)) throw UsageError("stationary_acf: functional has zero variance");

  AcfEstimate out;
  out.lags = lags;
  out.n_paths = usable.size();
  out.influence.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vector v = y.col(j + 1).array() - y.col(j + 1).mean();
    const double rho = u.dot(v) / dn / var0;
    const Vector infl = (u.array() * v.array() - rho * u.array().square()) / var0;
    out.influence.col(j) = infl;
    out.values.push_back(rho);
    const double se = std::sqrt(infl.squaredNorm() / (dn * (dn - 1.0)));
    // Lag 0 has exactly zero sampling error; keep the SE strictly positive.
    out.standard_errors.push_back(std::max(se, std::numeric_limits<double>::min()));
  }
  return out;
}

SlopeEstimate acf_slope_at_zero(const AcfEstimate& acf, std::size_t m) {
  if (m < 3) throw UsageError("acf_slope_at_zero: need m >= 3 lags");
  if (acf.lags.size() < m) throw UsageError("acf_slope_at_zero: too few lags");
  if (std::abs(acf.lags[0]) > 1e-12) throw UsageError("acf_slope_at_zero: first lag must be 0");
  double denom = 0.0;
  std::vector<double> coef(m, 0.0);
  for (std::size_t i = 1; i < m; ++i) {
    const double w = 1.0 / (acf.standard_errors[i] * acf.standard_errors[i]);
    coef[i] = w * acf.lags[i];
    denom += w * acf.lags[i] * acf.lags[i];
  }
  SlopeEstimate out;
  Vector infl = Vector::Zero(acf.influence.rows());
  for (std::size_t i = 1; i < m; ++i) {
    const double a = coef[i] / denom;
    out.slope += a * (acf.values[i] - 1.0);
    infl += a * acf.influence.col(static_cast<Eigen::Index>(i));
  }
  const double n = static_cast<double>(infl.size());
  out.standard_error = std::sqrt(infl.squaredNorm() / (n * (n - 1.0)));
  return out;
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;  // the series is 1 to double precision here
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)};
}

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw UsageError("ks_one_sample: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double ne = std::sqrt(n);
  return {d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)};
}

std::vector<double> marginal_at(const std::vector<ChainPath>& paths, double t, Eigen::Index coord) {
  std::vector<double> out;
  out.reserve(paths.size());
  for (const ChainPath& p : paths) {
    if (p.aborted) continue;
    const std::ptrdiff_t idx = time_index(p, t);
    if (idx < 0) throw UsageError("marginal_at: time " + std::to_string(t) + " is not on the grid");
    if (coord < 0 || coord >= p.states.cols()) throw UsageError("marginal_at: coordinate out of range");
    out.push_back(p.states(idx, coord));
  }
  return out;
}

KsResult marginal_distance(const std::vector<ChainPath>& a, const std::vector<ChainPath>& b, double t,
                           Eigen::Index coord) {
  std::vector<double> xa = marginal_at(a, t, coord), xb = marginal_at(b, t, coord);
  if (xa.size() < 500 || xb.size() < 500) throw UsageError("marginal_distance: need >= 500 replicas per side");
  return ks_two_sample(std::move(xa), std::move(xb));
}

bool ComparisonReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const ComparisonEntry& e) { return e.pass; });
}

void ComparisonReport::add(std::string metric, double time, double value, double threshold) {
  entries.push_back({std::move(metric), time, value, threshold, value <= threshold});
}

}  // namespace rwmlab
