#include "rwmlab/diagnostics.hpp"
#include "rwmlab/diffusion.hpp"
#include "rwmlab/errors.hpp"
#include "rwmlab/normal.hpp"
#include "rwmlab/tuning.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwmlab;

namespace {

std::vector<ChainPath> replicas(const DiffusionConfig& cfg, std::size_t n, std::uint64_t seed,
                                const InitialState& x0 = Stationary{}) {
  std::vector<ChainPath> out;
  for (std::uint32_t rep = 0; rep < n; ++rep) {
    RngStream rng(seed, stream_id(streams::kDiffusion, rep));
    out.push_back(integrate(cfg, x0, rng));
  }
  return out;
}

}  // namespace

TEST(Diffusion, StandardizedOuCoefficients) {
  const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(generator_rate(cfg), 1.0);
  EXPECT_DOUBLE_EQ(speed_factor(cfg), 1.0);
  Vector x(1);
  x << 1.7;
  EXPECT_DOUBLE_EQ(drift(x, cfg)(0), -1.7);
  EXPECT_DOUBLE_EQ(diffusion_factor(cfg)(0, 0), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(cfg.dt, 1e-3);
}

TEST(Diffusion, AsDisplayedConventionDoublesTheGenerator) {
  DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), 2.0, 1, 1.0, 0.1);
  Vector x(1);
  x << 1.0;
  const double d1 = drift(x, cfg)(0), b1 = diffusion_factor(cfg)(0, 0);
  cfg.convention = SdeConvention::as_displayed;
  EXPECT_DOUBLE_EQ(drift(x, cfg)(0), 2 * d1);
  EXPECT_NEAR(diffusion_factor(cfg)(0, 0), std::sqrt(2.0) * b1, 1e-15);
}

TEST(Diffusion, LModeDriftAndSpeed) {
  Vector lam(2);
  lam << 4, 1;
  const double l = 1.3;
  const DiffusionConfig cfg(make_standard_normal(2), SpdMatrix::diagonal(lam), l, 1, 1.0, 0.1);
  const double s = 2.0 * l * l * acceptance_curve(l, 5.0);  // k l^2 a(l)
  EXPECT_NEAR(speed_factor(cfg), s, 1e-14);
  Vector x(2);
  x << 0.3, -2.0;
  const Vector d = drift(x, cfg);
  EXPECT_NEAR(d(0), -(s / 2) * 4 * 0.3, 1e-14);
  EXPECT_NEAR(d(1), -(s / 2) * 1 * -2.0, 1e-14);
  const Matrix b = diffusion_factor(cfg);
  EXPECT_NEAR(b(0, 0), std::sqrt(s) * 2.0, 1e-13);
  EXPECT_NEAR(b(1, 1), std::sqrt(s), 1e-13);
  EXPECT_NEAR(b(0, 1), 0.0, 1e-14);
}

TEST(Diffusion, ZeroScoreGivesZeroDrift) {
  const DiffusionConfig cfg(make_standard_normal(2), SpdMatrix::identity(2), 1.0, 3, 1.0, 0.1);
  EXPECT_EQ(drift(Vector::Zero(6), cfg), Vector::Zero(6));
}

TEST(Diffusion, ConfigValidation) {
  EXPECT_THROW(DiffusionConfig(make_standard_normal(2), SpdMatrix::identity(1), 1.0, 1, 1.0, 0.1), UsageError);
  EXPECT_THROW(DiffusionConfig(make_standard_normal(1), SpdMatrix::identity(1), 1.0, 1, 1.0, 0.1, -1.0), UsageError);
  EXPECT_THROW(drift(Vector::Zero(3), DiffusionConfig(make_standard_normal(1), SpdMatrix::identity(1), 1.0, 2, 1.0, 0.1)),
               UsageError);
}

TEST(Diffusion, ZeroHorizonReturnsStart) {
  const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 2, 0.0, 0.1);
  RngStream rng(1, 0);
  Vector x0(2);
  x0 << 0.5, -0.5;
  const ChainPath p = integrate(cfg, x0, rng);
  ASSERT_EQ(p.times.size(), 1u);
  EXPECT_EQ(p.states.row(0).transpose(), x0);
}

TEST(Diffusion, OuStationaryVarianceAndKs) {
  const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, 1.0, 0.5);
  const auto paths = replicas(cfg, 2000, 2);
  const auto xs = marginal_at(paths, 1.0, 0);
  double s2 = 0;
  for (double v : xs) s2 += v * v;
  EXPECT_NEAR(s2 / 2000, 1.0, 5 * std::sqrt(2.0 / 2000));
  EXPECT_GT(ks_one_sample(xs, normal_cdf).p_value, 0.01);
}

TEST(Diffusion, OuTransientMeanAndVariance) {
  // From x0 = 2 the OU law at t is N(2 e^{-t}, 1 - e^{-2t}).
  const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, 1.0, 0.5);
  Vector x0(1);
  x0 << 2.0;
  const auto paths = replicas(cfg, 4000, 3, x0);
  const auto xs = marginal_at(paths, 1.0, 0);
  const double m = 2 * std::exp(-1.0), v = 1 - std::exp(-2.0);
  const KsResult ks = ks_one_sample(xs, [&](double x) { return normal_cdf((x - m) / std::sqrt(v)); });
  EXPECT_GT(ks.p_value, 0.01);
}

TEST(Diffusion, OuAutocorrelationIsExponential) {
  const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, 1.0, 0.25);
  const auto paths = replicas(cfg, 4000, 4);
  const AcfEstimate acf = stationary_acf(paths, [](const Eigen::Ref<const Vector>& y) { return y(0); },
                                         {0.0, 0.25, 0.5, 1.0});
  for (std::size_t i = 0; i < acf.lags.size(); ++i) {
    EXPECT_NEAR(acf.values[i], std::exp(-acf.lags[i]), 5 * acf.standard_errors[i] + 2e-3) << acf.lags[i];
  }
}

TEST(Diffusion, TimeChangeEquivalence) {
  // G^{l,Lambda} run for T matches G^Lambda run for T * acceleration_factor.
  const double l = 1.0, T = 0.5;
  const SpdMatrix lam = SpdMatrix::identity(1);
  const double factor = acceleration_factor(l, lam, SpdMatrix::identity(1));
  const DiffusionConfig a(make_standard_normal(1), lam, l, 1, T, T);
  const DiffusionConfig b(make_standard_normal(1), lam, std::nullopt, 1, T * factor, T * factor);
  Vector x0(1);
  x0 << 2.0;
  const auto pa = replicas(a, 2000, 5, x0), pb = replicas(b, 2000, 6, x0);
  const KsResult ks = ks_two_sample(marginal_at(pa, T, 0), marginal_at(pb, T * factor, 0));
  EXPECT_GT(ks.p_value, 0.01);
}

TEST(Diffusion, WeakOrderOneSelfConvergence) {
  // E X(T)^2 from x0 = 2. Euler on the OU process gives m <- (1 - h)^2 m + 2h,
  // whose bias against 4e^{-2T} + 1 - e^{-2T} is first order in h.
  const double T = 0.5, x0v = 2.0;
  const double exact = x0v * x0v * std::exp(-2 * T) + 1 - std::exp(-2 * T);
  auto recursion = [&](double h) {
    double m = x0v * x0v;
    for (int i = 0; i < static_cast<int>(std::lround(T / h)); ++i) m = (1 - h) * (1 - h) * m + 2 * h;
    return m;
  };
  const double bias_coarse = recursion(0.1) - exact, bias_fine = recursion(0.025) - exact;
  EXPECT_NEAR(bias_coarse / bias_fine, 4.0, 0.5);

  auto second_moment = [&](double dt, double& se) {
    const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, T, T, dt);
    Vector x0(1);
    x0 << x0v;
    double s = 0, s2 = 0;
    const int n = 400000;
    for (std::uint32_t rep = 0; rep < static_cast<std::uint32_t>(n); ++rep) {
      RngStream rng(7, rep);
      const double x = integrate(cfg, x0, rng).states(1, 0);
      s += x * x;
      s2 += x * x * x * x;
    }
    se = std::sqrt((s2 / n - (s / n) * (s / n)) / n);
    return s / n;
  };
  double se_c = 0, se_f = 0;
  const double m_coarse = second_moment(0.1, se_c), m_fine = second_moment(0.025, se_f);
  EXPECT_NEAR(m_coarse, recursion(0.1), 5 * se_c);
  EXPECT_NEAR(m_fine, recursion(0.025), 5 * se_f);
}

TEST(Diffusion, ExplodingEulerAbortsWithDiagnostic) {
  const DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, 5000.0, 5.0, 5.0);
  RngStream rng(8, 0);
  const ChainPath p = integrate(cfg, Stationary{}, rng);
  EXPECT_TRUE(p.aborted);
  EXPECT_FALSE(p.diagnostic.empty());
  EXPECT_EQ(static_cast<Eigen::Index>(p.times.size()), p.states.rows());
  EXPECT_LT(p.times.size(), grid_times(5000.0, 5.0).size());
  EXPECT_TRUE(p.states.allFinite());
}

TEST(Diffusion, TamedEulerStaysFinite) {
  DiffusionConfig cfg(make_standard_normal(1), SpdMatrix::identity(1), std::nullopt, 1, 5000.0, 5.0, 5.0);
  cfg.scheme = Scheme::tamed_euler;
  RngStream rng(8, 0);
  const ChainPath p = integrate(cfg, Stationary{}, rng);
  EXPECT_FALSE(p.aborted);
}

TEST(Acceleration, Values) {
  const SpdMatrix one = SpdMatrix::identity(1);
  EXPECT_EQ(acceleration_factor(0.0, one, one), 0.0);
  const double l = optimal_l(1.0);
  EXPECT_NEAR(acceleration_factor(l, one, one), 4 * omega_star().h_tilde, 1e-12);
  EXPECT_NEAR(acceleration_factor(l, one, one), 0.66, 5e-3);
}
