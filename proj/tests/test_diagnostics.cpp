#include "rwmlab/diagnostics.hpp"
#include "rwmlab/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwmlab;

namespace {

ChainPath counts_only(std::uint64_t acc, std::uint64_t prop) {
  ChainPath p;
  p.times = {0.0};
  p.states = Matrix::Zero(1, 1);
  p.accept_count = acc;
  p.proposal_count = prop;
  return p;
}

// Replicas whose recorded values are y(t) = rho^t y0 + sqrt(1 - rho^{2t}) e.
std::vector<ChainPath> ar_paths(std::size_t n, const std::vector<double>& times, std::uint64_t seed) {
  std::vector<ChainPath> out;
  for (std::size_t r = 0; r < n; ++r) {
    RngStream rng(seed, r);
    ChainPath p;
    p.times = times;
    p.states.resize(static_cast<Eigen::Index>(times.size()), 1);
    const double y0 = rng.normal();
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double c = std::exp(-times[i]);
      p.states(static_cast<Eigen::Index>(i), 0) = c * y0 + std::sqrt(1 - c * c) * rng.normal();
    }
    out.push_back(std::move(p));
  }
  return out;
}

const PathFunctional first = [](const Eigen::Ref<const Vector>& y) { return y(0); };

}  // namespace

TEST(EmpiricalAcceptance, PooledRate) {
  const RateEstimate all = empirical_acceptance({counts_only(10, 10), counts_only(5, 5)});
  EXPECT_EQ(all.rate, 1.0);
  EXPECT_EQ(all.standard_error, 0.0);
  const RateEstimate half = empirical_acceptance({counts_only(30, 100), counts_only(70, 100)});
  EXPECT_DOUBLE_EQ(half.rate, 0.5);
  EXPECT_NEAR(half.standard_error, std::sqrt(0.25 / 200), 1e-15);
  EXPECT_THROW(empirical_acceptance({counts_only(0, 0)}), UsageError);
}

TEST(Acf, LagZeroIsOneAndSePositive) {
  const auto paths = ar_paths(500, {0.0, 0.1, 0.2}, 1);
  const AcfEstimate acf = stationary_acf(paths, first, {0.0, 0.1, 0.2});
  EXPECT_NEAR(acf.values[0], 1.0, 1e-12);
  for (double se : acf.standard_errors) EXPECT_GT(se, 0.0);
  EXPECT_EQ(acf.n_paths, 500u);
  EXPECT_EQ(acf.influence.rows(), 500);
}

TEST(Acf, ExponentialDecayRecovered) {
  const std::vector<double> t = {0.0, 0.25, 0.5, 1.0, 2.0};
  const auto paths = ar_paths(20000, t, 2);
  const AcfEstimate acf = stationary_acf(paths, first, t);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(acf.values[i], std::exp(-t[i]), 5 * acf.standard_errors[i]);
}

TEST(Acf, StandardErrorsAreCalibrated) {
  // Spread of the lag-1 estimate over independent batches vs its reported SE.
  const std::vector<double> t = {0.0, 1.0};
  std::vector<double> est, se;
  for (std::uint64_t b = 0; b < 200; ++b) {
    const AcfEstimate a = stationary_acf(ar_paths(200, t, 100 + b), first, t);
    est.push_back(a.values[1]);
    se.push_back(a.standard_errors[1]);
  }
  double m = 0, v = 0, mse = 0;
  for (double x : est) m += x / est.size();
  for (double x : est) v += (x - m) * (x - m) / (est.size() - 1);
  for (double s : se) mse += s / se.size();
  EXPECT_NEAR(std::sqrt(v) / mse, 1.0, 0.15);
}

TEST(Acf, Rejections) {
  const auto paths = ar_paths(100, {0.0, 0.5}, 3);
  EXPECT_THROW(stationary_acf(ar_paths(29, {0.0, 0.5}, 3), first, {0.5}), UsageError);
  EXPECT_THROW(stationary_acf(paths, first, {0.25}), UsageError);
  EXPECT_THROW(stationary_acf(paths, [](const Eigen::Ref<const Vector>&) { return 1.0; }, {0.5}), UsageError);
}

TEST(AcfSlope, ExactExponential) {
  AcfEstimate acf;
  acf.lags = {0.0, 0.01, 0.02, 0.03};
  for (double t : acf.lags) {
    acf.values.push_back(std::exp(-t));
    acf.standard_errors.push_back(t == 0.0 ? 1e-300 : 1e-3);
  }
  acf.influence = Matrix::Zero(10, 4);
  acf.n_paths = 10;
  const SlopeEstimate s = acf_slope_at_zero(acf);
  EXPECT_NEAR(s.slope, -1.0, 0.02);
}

TEST(AcfSlope, OnSimulatedDecay) {
  const std::vector<double> t = {0.0, 0.02, 0.04, 0.06};
  const AcfEstimate acf = stationary_acf(ar_paths(100000, t, 4), first, t);
  const SlopeEstimate s = acf_slope_at_zero(acf);
  EXPECT_NEAR(s.slope, -1.0, 5 * s.standard_error + 0.03);
  EXPECT_GT(s.standard_error, 0.0);
}

TEST(AcfSlope, Preconditions) {
  AcfEstimate acf;
  acf.lags = {0.1, 0.2, 0.3};
  acf.values = {1, 1, 1};
  acf.standard_errors = {1, 1, 1};
  EXPECT_THROW(acf_slope_at_zero(acf, 3), UsageError);
  EXPECT_THROW(acf_slope_at_zero(acf, 2), UsageError);
  EXPECT_THROW(acf_slope_at_zero(acf, 4), UsageError);
}

// Reference values from scipy.stats.kstwobign.sf.
TEST(Ks, KolmogorovSurvival) {
  EXPECT_NEAR(kolmogorov_sf(0.5), 9.63945244e-01, 1e-8);
  EXPECT_NEAR(kolmogorov_sf(1.0), 2.69999672e-01, 1e-8);
  EXPECT_NEAR(kolmogorov_sf(1.36), 4.94858768e-02, 1e-9);
  EXPECT_NEAR(kolmogorov_sf(2.0), 6.70925256e-04, 1e-11);
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
}

TEST(Ks, StatisticsMatchReference) {
  const KsResult two = ks_two_sample({0.1, 0.4, 0.7, 1.5, 2.0}, {0.2, 0.3, 0.9, 1.1, 1.2, 3.0});
  EXPECT_NEAR(two.statistic, 0.26666666666666666, 1e-15);
  const double ne = std::sqrt(30.0 / 11.0);
  EXPECT_NEAR(two.p_value, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * two.statistic), 1e-15);
  const KsResult one = ks_one_sample({0.1, 0.2, 0.5, 0.55, 0.9}, [](double x) { return x; });
  EXPECT_NEAR(one.statistic, 0.25, 1e-15);
}

TEST(Ks, NullPValuesRoughlyUniform) {
  std::vector<double> ps;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    RngStream rng(5, rep);
    std::vector<double> a(500), b(500);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    ps.push_back(ks_two_sample(a, b).p_value);
  }
  std::sort(ps.begin(), ps.end());
  const double median = 0.5 * (ps[49] + ps[50]);
  EXPECT_GT(median, 0.3);
  EXPECT_LT(median, 0.7);
}

TEST(MarginalDistance, NeedsGridTimeAndEnoughReplicas) {
  const auto a = ar_paths(600, {0.0, 0.5}, 6), b = ar_paths(600, {0.0, 0.5}, 7);
  const KsResult r = marginal_distance(a, b, 0.5, 0);
  EXPECT_GT(r.p_value, 0.001);
  EXPECT_THROW(marginal_distance(a, b, 0.3, 0), UsageError);
  EXPECT_THROW(marginal_distance(ar_paths(100, {0.0}, 8), b, 0.0, 0), UsageError);
}

TEST(TimeIndex, Tolerance) {
  ChainPath p;
  p.times = {0.0, 0.1, 0.2};
  EXPECT_EQ(time_index(p, 0.1 + 1e-12), 1);
  EXPECT_EQ(time_index(p, 0.15), -1);
}

TEST(ComparisonReport, RecordsThresholds) {
  ComparisonReport r;
  r.add("ks", 1.0, 0.03, 0.05);
  EXPECT_TRUE(r.all_pass());
  r.add("ks", 2.0, 0.06, 0.05);
  EXPECT_FALSE(r.all_pass());
  EXPECT_EQ(r.entries[1].threshold, 0.05);
  EXPECT_FALSE(r.entries[1].pass);
}
