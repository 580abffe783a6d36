#include "rwmlab/errors.hpp"
#include "rwmlab/identities.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwmlab;

namespace {

CheckSettings settings(std::size_t n) {
  CheckSettings s;
  s.n = n;
  return s;
}

TargetPtr logistic_product() {
  Vector c(2);
  c << 1.0, 2.0;
  return make_rotated_scale_family(make_logistic_1d(), c, Matrix::Identity(2, 2));
}

}  // namespace

TEST(Verdict, TwoSidedAndUpperBound) {
  IdentityReport r;
  r.estimate = {1.0, 2.0};
  r.reference = {1.1, 2.0};
  r.standard_error = {0.02, 0.0};
  EXPECT_TRUE(evaluate_verdict(r));
  r.standard_error = {0.019, 0.0};
  EXPECT_FALSE(evaluate_verdict(r));
  r.comparison = Comparison::upper_bound;
  EXPECT_TRUE(evaluate_verdict(r));
  r.estimate = {1.3, 2.0};
  EXPECT_FALSE(evaluate_verdict(r));
  r.estimate = {1.0, std::nan("")};
  EXPECT_FALSE(evaluate_verdict(r));
}

TEST(TestFunctions, Gradients) {
  Vector x(3);
  x << 1.0, 2.0, 3.0;
  EXPECT_EQ(constant_test_function().value(x), 1.0);
  EXPECT_EQ(constant_test_function().gradient(x), Vector::Zero(3));
  EXPECT_EQ(coordinate_test_function(1).value(x), 2.0);
  EXPECT_EQ(coordinate_test_function(1).gradient(x), Vector::Unit(3, 1));
  const TestFunction f = product_test_function(0, 2);
  EXPECT_EQ(f.value(x), 3.0);
  Vector g(3);
  g << 3.0, 0.0, 1.0;
  EXPECT_EQ(f.gradient(x), g);
  EXPECT_EQ(product_test_function(1, 1).gradient(x), Vector::Unit(3, 1) * 4.0);
}

TEST(Ibp, StandardNormalCoordinate) {
  RngStream rng(1, 0);
  const IdentityReport r = check_ibp(*make_standard_normal(2), coordinate_test_function(0), settings(100000), rng);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.reference[0], -1.0);
  EXPECT_EQ(r.reference[1], 0.0);
  EXPECT_NEAR(r.estimate[0], -1.0, 5 * r.standard_error[0]);
  EXPECT_EQ(r.n_samples, 100000u);
  EXPECT_EQ(r.dropped, 0u);
}

TEST(Ibp, ConstantFunctionMeansZeroScore) {
  RngStream rng(2, 0);
  const IdentityReport r = check_ibp(*make_logistic_1d(), constant_test_function(), settings(100000), rng);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.reference[0], 0.0);
}

TEST(Ibp, LogisticProductBilinear) {
  RngStream rng(3, 0);
  const IdentityReport r = check_ibp(*logistic_product(), product_test_function(0, 1), settings(200000), rng);
  EXPECT_TRUE(r.pass);
  // Cross term: E x1 x2 s_1 = -E x2 = 0 and E x1 x2 s_2 = -E x1 = 0.
  for (double v : r.reference) EXPECT_NEAR(v, 0.0, 0.05);
}

TEST(Ibp, DetectsCorruptedScore) {
  RngStream rng(4, 0);
  const auto bad = make_scaled_score(make_logistic_1d(), 1.1);
  EXPECT_FALSE(check_ibp(*bad, coordinate_test_function(0), settings(100000), rng).pass);
}

TEST(ScoreCovariance, GaussianClosedForm) {
  RngStream rng(5, 0);
  Vector d(2);
  d << 1.0, 4.0;
  const auto t = make_gaussian(Vector::Zero(2), SpdMatrix::diagonal(d));
  const IdentityReport r = check_score_covariance(*t, settings(100000), rng);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.rows, 2);
  EXPECT_EQ(r.cols, 2);
  EXPECT_NEAR(r.reference[0], 1.0, 1e-12);
  EXPECT_NEAR(r.reference[3], 0.25, 1e-12);
}

TEST(ScoreCovariance, LogisticAboutOneThird) {
  RngStream rng(6, 0);
  const IdentityReport r = check_score_covariance(*make_logistic_1d(), settings(200000), rng);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.estimate[0], 1.0 / 3.0, 0.005);
  EXPECT_NEAR(r.reference[0], 1.0 / 3.0, 0.005);
}

TEST(ScoreCovariance, DetectsCorruptedScore) {
  RngStream rng(7, 0);
  EXPECT_FALSE(check_score_covariance(*make_scaled_score(make_standard_normal(1), 1.1), settings(100000), rng).pass);
}

TEST(SubGaussian, Examples) {
  RngStream rng(8, 0);
  std::vector<Vector> ts = {Vector::Zero(1), Vector::Constant(1, 0.5)};
  const IdentityReport r = check_subgaussian(*make_standard_normal(1), ts, settings(100000), rng);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.comparison, Comparison::upper_bound);
  EXPECT_EQ(r.estimate[0], 1.0);
  EXPECT_NEAR(r.reference[1], std::exp(0.125), 1e-15);
  EXPECT_NEAR(r.estimate[1], std::exp(0.125), 5 * r.standard_error[1]);
  const IdentityReport l = check_subgaussian(*make_logistic_1d(), {Vector::Ones(1)}, settings(100000), rng);
  EXPECT_TRUE(l.pass);
  EXPECT_NEAR(l.reference[0], std::exp(0.25), 1e-15);
  // E exp(score) = sinh(1) for a uniform(-1, 1) score.
  EXPECT_NEAR(l.estimate[0], std::sinh(1.0), 5 * l.standard_error[0]);
}

TEST(SubGaussian, Preconditions) {
  RngStream rng(9, 0);
  EXPECT_THROW(check_subgaussian(*make_standard_normal(1), {Vector::Constant(1, 1.5)}, settings(1000), rng), UsageError);
  EXPECT_THROW(check_subgaussian(*make_standard_normal(1), {}, settings(1000), rng), UsageError);
}

TEST(SubGaussian, GaussianCorruptionDetected) {
  RngStream rng(10, 0);
  const IdentityReport r =
      check_subgaussian(*make_scaled_score(make_standard_normal(1), 1.1), {Vector::Ones(1)}, settings(100000), rng);
  EXPECT_FALSE(r.pass);
}

TEST(SubGaussian, LogisticCorruptionStaysBelowBound) {
  // The 1.1-scaled logistic score is uniform on (-1.1, 1.1): its MGF
  // sinh(1.1 t)/(1.1 t) stays below exp(t^2 / 4) for every t, so the check
  // has no power against this corruption.
  for (double t = 0.01; t <= 50.0; t *= 1.2) EXPECT_LT(std::sinh(1.1 * t) / (1.1 * t), std::exp(t * t / 4));
  RngStream rng(11, 0);
  const IdentityReport r =
      check_subgaussian(*make_scaled_score(make_logistic_1d(), 1.1), {Vector::Ones(1)}, settings(100000), rng);
  EXPECT_TRUE(r.pass);
}

TEST(DensityBounds, StandardNormalTightAtZero) {
  RngStream rng(12, 0);
  const IdentityReport r = check_density_bounds(*make_standard_normal(1), {Vector::Zero(1)}, 1000, rng);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.estimate[0], 0.0);
  EXPECT_EQ(r.estimate[1], 0.0);
}

TEST(DensityBounds, LogisticAndScaleFamily) {
  RngStream rng(13, 0);
  EXPECT_TRUE(check_density_bounds(*make_logistic_1d(), {Vector::Zero(1)}, 10000, rng).pass);
  EXPECT_TRUE(check_density_bounds(*logistic_product(), {Vector::Zero(2)}, 10000, rng).pass);
}

TEST(DensityBounds, CorruptionDetected) {
  RngStream rng(14, 0);
  EXPECT_FALSE(check_density_bounds(*make_scaled_score(make_standard_normal(2), 1.1), {}, 10000, rng).pass);
  EXPECT_FALSE(check_density_bounds(*make_scaled_score(make_logistic_1d(), 1.1), {}, 10000, rng).pass);
}

TEST(Lipschitz, DeclaredConstantsHold) {
  RngStream rng(15, 0);
  EXPECT_TRUE(check_lipschitz_score(*make_logistic_1d(), 10000, rng).pass);
  EXPECT_TRUE(check_lipschitz_score(*logistic_product(), 10000, rng).pass);
  Vector d(2);
  d << 1.0, 0.25;
  EXPECT_TRUE(check_lipschitz_score(*make_gaussian(Vector::Zero(2), SpdMatrix::diagonal(d)), 10000, rng).pass);
}

TEST(Lipschitz, UnderstatedConstantDetected) {
  RngStream rng(16, 0);
  EXPECT_FALSE(check_lipschitz_score(*make_logistic_1d(), 10000, rng, 0.25).pass);
  EXPECT_FALSE(check_lipschitz_score(*make_scaled_score(make_logistic_1d(), 1.1), 10000, rng).pass);
}

TEST(ScoreMoments, StandardNormal) {
  RngStream rng(17, 0);
  const ScoreMoments m = score_moments(*make_standard_normal(1), 200000, rng);
  ASSERT_EQ(m.orders.size(), 4u);
  const double exact[] = {1, 3, 15, 105};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m.values[i], exact[i], 5 * m.standard_errors[i]);
}

TEST(Suite, DeterministicAcrossThreadCounts) {
  SuiteSettings s;
  s.check.n = 20000;
  s.n_pairs = 2000;
  s.seed = 99;
  s.threads = 1;
  const SuiteResult a = run_identity_suite(make_logistic_1d(), s);
  s.threads = 4;
  const SuiteResult b = run_identity_suite(make_logistic_1d(), s);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].estimate, b.checks[i].estimate);
    EXPECT_EQ(a.checks[i].standard_error, b.checks[i].standard_error);
    EXPECT_NE(a.checks[i].stream, 0u);
  }
  EXPECT_EQ(a.checks.size(), 7u);
  EXPECT_EQ(a.negative_controls.size(), 6u);
  EXPECT_TRUE(a.checks_pass());
}
