#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "perfpeel/errors.hpp"
#include "perfpeel/linops.hpp"
#include "perfpeel/rng.hpp"

using namespace perfpeel;

namespace {

// Dense Poisson solution operator from explicit DFT matrices.
MatrixXd poisson_by_dft(Index t) {
  using C = std::complex<double>;
  const double pi = std::numbers::pi;
  Eigen::MatrixXcd F(t, t);
  for (Index a = 0; a < t; ++a)
    for (Index b = 0; b < t; ++b) F(a, b) = std::polar(1.0, -2.0 * pi * double(a * b) / double(t));
  const Eigen::MatrixXcd Finv = F.adjoint() / double(t);
  const auto kappa = [t](Index i) { return i <= t / 2 - 1 ? double(i) : double(i - t); };
  const Index n = t * t;
  MatrixXd A(n, n);
  for (Index col = 0; col < n; ++col) {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(t, t);
    f(col / t, col % t) = 1.0;
    Eigen::MatrixXcd g = F * f * F.transpose();
    for (Index i = 0; i < t; ++i)
      for (Index j = 0; j < t; ++j) {
        const double d2 = kappa(i) * kappa(i) + kappa(j) * kappa(j);
        g(i, j) *= (i == 0 && j == 0) ? C(0.0) : C(-1.0 / d2);
      }
    const Eigen::MatrixXcd u = Finv * g * Finv.transpose();
    for (Index i = 0; i < t; ++i)
      for (Index j = 0; j < t; ++j) A(i * t + j, col) = u(i, j).real();
  }
  return A;
}

}  // namespace

TEST(LinearOperator, CountsColumnsPerSide) {
  Rng rng(1);
  const MatrixXd M = rng.gaussian(6, 6);
  LinearOperator op = make_dense_operator(M);
  const MatrixXd X = rng.gaussian(6, 3);
  EXPECT_TRUE(op.apply(X, Side::forward).isApprox(M * X));
  EXPECT_TRUE(op.apply(X, Side::transpose).isApprox(M.transpose() * X));
  op.apply(X.leftCols(1), Side::transpose);
  EXPECT_EQ(op.counter().forward(), 3);
  EXPECT_EQ(op.counter().transpose(), 4);
  LinearOperator copy = op;
  copy.apply(X, Side::forward);
  EXPECT_EQ(op.counter().forward(), 6);
  op.reset_counter();
  EXPECT_EQ(copy.counter().forward(), 0);
}

TEST(LinearOperator, RejectsWrongRowCount) {
  LinearOperator op = make_zero_operator(4);
  EXPECT_THROW(op.apply(MatrixXd::Zero(5, 1), Side::forward), DimensionError);
}

TEST(LinearOperator, MaterializeUsesNForwardQueries) {
  Rng rng(2);
  const MatrixXd M = rng.gaussian(7, 7);
  LinearOperator op = make_dense_operator(M);
  EXPECT_TRUE(materialize(op).isApprox(M));
  EXPECT_EQ(op.counter().forward(), 7);
  EXPECT_EQ(op.counter().transpose(), 0);
}

TEST(Poisson, MatchesExplicitDft) {
  for (Index t : {4, 6, 8}) {
    LinearOperator op = make_poisson_operator(t);
    const MatrixXd A = materialize(op);
    const MatrixXd ref = poisson_by_dft(t);
    EXPECT_LE((A - ref).norm(), 1e-12 * ref.norm()) << "t = " << t;
  }
}

TEST(Poisson, SymmetricAndAnnihilatesConstants) {
  LinearOperator op = make_poisson_operator(8);
  const MatrixXd A = materialize(op);
  EXPECT_LE((A - A.transpose()).norm(), 1e-12 * A.norm());
  const VectorXd ones = VectorXd::Ones(64);
  EXPECT_LE((A * ones).norm(), 1e-12);
  Rng rng(3);
  const MatrixXd X = rng.gaussian(64, 2);
  EXPECT_LE((op.apply(X, Side::transpose) - A.transpose() * X).norm(), 1e-12 * X.norm());
}

TEST(Poisson, MultiplierConvention) {
  EXPECT_EQ(poisson_multiplier(8, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(poisson_multiplier(8, 1, 0), -1.0);
  EXPECT_DOUBLE_EQ(poisson_multiplier(8, 4, 0), -1.0 / 16.0);  // kappa = 4 - 8
  EXPECT_DOUBLE_EQ(poisson_multiplier(8, 3, 7), -1.0 / 10.0);  // 9 + 1
}

TEST(Kernel, InverseDistanceWithZeroDiagonal) {
  PointCloud c;
  c.points = {{0, 0, 0}, {3, 4, 0}, {0, 0, 2}};
  const MatrixXd K = kernel_matrix(c);
  EXPECT_DOUBLE_EQ(K(0, 1), 0.2);
  EXPECT_DOUBLE_EQ(K(2, 0), 0.5);
  EXPECT_EQ(K(1, 1), 0.0);
  EXPECT_LE((K - K.transpose()).norm(), 0.0);
  LinearOperator op = make_kernel_operator(c);
  EXPECT_TRUE(materialize(op).isApprox(K));
}

TEST(Kernel, RejectsCoincidentPoints) {
  PointCloud c;
  c.points = {{1, 2, 3}, {1, 2, 3}};
  EXPECT_THROW(make_kernel_operator(c), ConfigError);
}

TEST(Kernel, HelixIsDeterministic) {
  const PointCloud a = helix_points(64, 9);
  const PointCloud b = helix_points(64, 9);
  ASSERT_EQ(a.size(), 64);
  EXPECT_EQ(a.points, b.points);
  EXPECT_DOUBLE_EQ(a.points.front()[0], -4.0);
  EXPECT_DOUBLE_EQ(a.points.back()[0], 4.0);
  EXPECT_NE(helix_points(64, 10).points, a.points);
}

TEST(HardInstances, BlockLayout) {
  const Index k = 2;
  const MatrixXd A = hard_block_matrix(k, 1e3);
  ASSERT_EQ(A.rows(), 8 * k);
  const Index b = 2 * k;
  MatrixXd X = MatrixXd::Zero(b, b), Y = MatrixXd::Zero(b, b);
  X.topLeftCorner(k, k).setIdentity();
  Y.bottomRightCorner(k, k).setIdentity();
  Y *= 1e3;
  EXPECT_EQ(A.block(0, 2 * b, b, b), Y);
  EXPECT_EQ(A.block(2 * b, 0, b, b), Y);
  EXPECT_EQ(A.block(0, b, b, b), X);
  EXPECT_EQ(A.block(3 * b, 2 * b, b, b), X);
  EXPECT_TRUE(A.block(0, 0, b, b).isZero());
  EXPECT_TRUE(A.block(b, 3 * b, b, b).isZero());
  EXPECT_DOUBLE_EQ(A.squaredNorm(), 8.0 * k + 2.0 * k * 1e6);
}

TEST(HardInstances, ExponentialInstance) {
  const MatrixXd A = exp_hard_matrix(4, 1e8);
  ASSERT_EQ(A.rows(), 16);
  for (Index i = 0; i < 16; ++i) EXPECT_EQ(A(i, 0), i % 2 == 0 ? 1.0 : 0.0);
  for (Index i = 0; i < 16; ++i) {
    const bool power = i == 1 || i == 3 || i == 7 || i == 15;
    EXPECT_EQ(A(i, 1), power ? 1e8 : 0.0) << i;
  }
  EXPECT_EQ(A.rightCols(14).norm(), 0.0);
  EXPECT_THROW(exp_hard_matrix(1, 1e8), ConfigError);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(5, {1, 2});
  Rng b = Rng::stream(5, {1, 2});
  Rng c = Rng::stream(5, {2, 1});
  const MatrixXd ga = a.gaussian(4, 4);
  EXPECT_EQ(ga, b.gaussian(4, 4));
  EXPECT_NE(ga, c.gaussian(4, 4));
}

TEST(Rng, GaussianMoments) {
  Rng rng(11);
  const MatrixXd G = rng.gaussian(20000, 1);
  const double mean = G.mean();
  const double var = (G.array() - mean).square().sum() / double(G.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(var, 1.0, 0.04);
}

TEST(Rng, UniformIndexInRange) {
  Rng rng(12);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_index(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 850);
}
