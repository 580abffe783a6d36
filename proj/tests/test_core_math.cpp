#include "rwmlab/errors.hpp"
#include "rwmlab/linalg.hpp"
#include "rwmlab/normal.hpp"
#include "rwmlab/rng.hpp"
#include "rwmlab/spd_matrix.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace rwmlab;
using rwmlab::testing::random_orthogonal;
using rwmlab::testing::random_spd;

TEST(RngStream, SameSeedAndStreamReproduce) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctStreamsDiffer) {
  RngStream a(42, 7), b(42, 8), c(43, 7);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStream, UniformStaysInOpenInterval) {
  RngStream rng(1, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
}

TEST(RngStream, NormalMoments) {
  RngStream rng(2, 0);
  const int n = 400000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(RngStream, ExponentialMean) {
  RngStream rng(3, 0);
  const int n = 200000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += rng.exponential(4.0);
  EXPECT_NEAR(s / n, 0.25, 5 * 0.25 / std::sqrt(n));
}

TEST(StreamId, Namespacing) {
  EXPECT_NE(stream_id(streams::kRwm, 0), stream_id(streams::kDiffusion, 0));
  EXPECT_EQ(stream_id(1, 5), (std::uint64_t{1} << 32) | 5);
}

TEST(Frobenius, Examples) {
  EXPECT_DOUBLE_EQ(frobenius(Matrix::Identity(3, 3), Matrix::Identity(3, 3)), 3.0);
  Matrix d1(2, 2), d2 = Matrix::Identity(2, 2);
  d1 << 1, 0, 0, 4;
  EXPECT_DOUBLE_EQ(frobenius(d1, d2), 5.0);
  Matrix a(2, 2);
  a << 2, 1, 1, 3;
  EXPECT_DOUBLE_EQ(frobenius(a, d2), 5.0);
  Matrix b(2, 2);
  b << 1, 2, 2, -1;
  // 2*1 + 1*2 + 1*2 + 3*(-1)
  EXPECT_DOUBLE_EQ(frobenius(a, b), 3.0);
}

TEST(Frobenius, DimensionMismatchThrows) {
  EXPECT_THROW(frobenius(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), UsageError);
}

// Reference values from tests/oracles/normal_cdf_oracle.py (mpmath, 50 digits).
TEST(NormalCdf, HighPrecisionReference) {
  const std::pair<double, double> ref[] = {
      {-8, 6.2209605742717841235e-16}, {-5, 2.8665157187919391167e-7}, {-1.1906, 0.1169053258155364949},
      {-1, 0.15865525393145705141},    {-0.5, 0.30853753872598689636}, {0, 0.5},
      {0.3, 0.61791142218895263731},   {1.5, 0.933192798731141934},    {3, 0.99865010196836990547},
      {8, 0.9999999999999993779},
  };
  for (const auto& [x, phi] : ref) {
    EXPECT_NEAR(normal_cdf(x), phi, 1e-15) << "x = " << x;
    if (x < 0) EXPECT_NEAR(normal_cdf(x) / phi, 1.0, 1e-13) << "x = " << x;
  }
}

TEST(NormalCdf, SymmetryAndMonotonicity) {
  double prev = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = -8.0 + 16.0 * i / 10000.0;
    const double p = normal_cdf(x);
    ASSERT_GE(p, prev);
    ASSERT_LE(std::abs(p + normal_cdf(-x) - 1.0), 1e-15) << x;
    prev = p;
  }
  EXPECT_EQ(normal_cdf(0.0), 0.5);
}

TEST(NormalPdf, Value) { EXPECT_NEAR(normal_pdf(0.0), 0.3989422804014327, 1e-16); }

TEST(SampleMvn, SmallCovarianceConcentrates) {
  RngStream rng(5, 0);
  Vector mean(2);
  mean << 1.0, -2.0;
  const double eps = 1e-8;
  const SpdMatrix cov = SpdMatrix::identity(2).scaled(eps);
  for (int i = 0; i < 100; ++i) {
    const Vector x = sample_mvn(mean, cov.cholesky(), rng);
    EXPECT_LE((x - mean).cwiseAbs().maxCoeff(), 6 * std::sqrt(eps));
  }
}

TEST(SampleMvn, CovarianceMatches) {
  RngStream rng(6, 0);
  Matrix c(2, 2);
  c << 4, 0, 0, 1;
  const SpdMatrix cov(c);
  const int n = 100000;
  Vector s = Vector::Zero(2);
  Matrix ss = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vector x = sample_mvn(Vector::Zero(2), cov.cholesky(), rng);
    s += x;
    ss += x * x.transpose();
  }
  const Vector m = s / n;
  const Matrix est = ss / n - m * m.transpose();
  EXPECT_NEAR(est(0, 0) / 4.0, 1.0, 0.05);
  EXPECT_NEAR(est(1, 1), 1.0, 0.05);
  EXPECT_LE((est - c).norm() / c.norm(), 0.05);
}

TEST(SampleMvn, DimensionMismatchThrows) {
  RngStream rng(1, 1);
  EXPECT_THROW(sample_mvn(Vector::Zero(3), Matrix::Identity(2, 2), rng), UsageError);
}

TEST(Isserlis, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(isserlis_fourth_moment(SpdMatrix::identity(1), 1.0), 3.0);
  EXPECT_DOUBLE_EQ(isserlis_fourth_moment(SpdMatrix::identity(2), 1.0), 8.0);
  Vector d(2);
  d << 1, 4;
  EXPECT_DOUBLE_EQ(isserlis_fourth_moment(SpdMatrix::diagonal(d), 1.0), 59.0);
  EXPECT_DOUBLE_EQ(isserlis_fourth_moment(SpdMatrix::identity(1), 2.0), 48.0);
}

TEST(SpdMatrix, RejectsIndefinite) {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  EXPECT_THROW(SpdMatrix{m}, UsageError);
  EXPECT_THROW(SpdMatrix{Matrix::Zero(2, 2)}, UsageError);
  EXPECT_THROW(SpdMatrix{Matrix::Identity(2, 3)}, UsageError);
}

TEST(SpdMatrix, SymmetrizesInput) {
  Matrix m(2, 2);
  m << 2, 1, 1 + 1e-14, 2;
  const SpdMatrix s(m);
  EXPECT_EQ(s(0, 1), s(1, 0));
}

TEST(SpdMatrix, CholeskyRoundTripProperty) {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index k = 1 + trial % 12;
    const SpdMatrix s = random_spd(k, rng, 1e-3);
    const Matrix& l = s.cholesky();
    EXPECT_LE((l * l.transpose() - s.matrix()).norm(), 1e-10 * s.matrix().norm());
    EXPECT_GT(l.diagonal().minCoeff(), 0.0);
    EXPECT_LE((s.inverse().matrix() * s.matrix() - Matrix::Identity(k, k)).norm(), 1e-8 * k);
    const Matrix r = s.sqrt();
    EXPECT_LE((r * r - s.matrix()).norm(), 1e-10 * s.matrix().norm());
    EXPECT_NEAR(s.log_determinant(), std::log(s.matrix().determinant()), 1e-8 * std::max(1.0, std::abs(s.log_determinant())));
  }
}

TEST(Eigenvalues, Examples) {
  Matrix d(2, 2);
  d << 1, 0, 0, 4;
  const Vector e1 = eigenvalues(d);
  EXPECT_DOUBLE_EQ(e1(0), 1.0);
  EXPECT_DOUBLE_EQ(e1(1), 4.0);
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  const Vector e2 = eigenvalues(a);
  EXPECT_NEAR(e2(0), 1.0, 1e-14);
  EXPECT_NEAR(e2(1), 3.0, 1e-14);
  EXPECT_TRUE(eigenvalues(Matrix::Identity(5, 5)).isApprox(Vector::Ones(5)));
  EXPECT_NEAR(min_eigenvalue(a), 1.0, 1e-14);
  EXPECT_NEAR(max_eigenvalue(a), 3.0, 1e-14);
}

TEST(Eigenvalues, RejectsNonSymmetric) {
  Matrix a(2, 2);
  a << 1, 2, 0, 1;
  EXPECT_THROW(eigenvalues(a), UsageError);
}

TEST(Eigenvalues, RecoversKnownSpectrumProperty) {
  RngStream rng(8, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index k = 2 + trial % 30;
    const Matrix q = random_orthogonal(k, rng);
    Vector d(k);
    for (Eigen::Index i = 0; i < k; ++i) d(i) = std::exp(3.0 * rng.normal());
    const Matrix a = q * d.asDiagonal() * q.transpose();
    Vector sorted = d;
    std::sort(sorted.data(), sorted.data() + k);
    const Vector e = eigenvalues(0.5 * (a + a.transpose()));
    for (Eigen::Index i = 0; i < k; ++i) EXPECT_NEAR(e(i) / sorted(i), 1.0, 1e-8) << "k=" << k << " i=" << i;
  }
}

TEST(Eigenvalues, AgreesWithEigenSolverUpTo64) {
  RngStream rng(9, 0);
  for (Eigen::Index k : {3, 8, 17, 32, 64}) {
    const Matrix a = rwmlab::testing::random_spd(k, rng).matrix();
    const Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
    const SymmetricEigen mine = symmetric_eigen(a);
    for (Eigen::Index i = 0; i < k; ++i) {
      EXPECT_NEAR(mine.values(i), ref.eigenvalues()(i), 1e-10 * ref.eigenvalues().cwiseAbs().maxCoeff());
    }
    const Matrix rebuilt = mine.vectors * mine.values.asDiagonal() * mine.vectors.transpose();
    EXPECT_LE((rebuilt - a).norm(), 1e-10 * a.norm());
  }
}

TEST(SymmetricSqrt, InverseSqrt) {
  RngStream rng(10, 0);
  const Matrix a = random_spd(4, rng).matrix();
  const Matrix r = symmetric_sqrt(a), ri = symmetric_inverse_sqrt(a);
  EXPECT_LE((r * ri - Matrix::Identity(4, 4)).norm(), 1e-9);
  EXPECT_LE((r - r.transpose()).norm(), 1e-12 * r.norm());
}
