// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "transfr/errors.hpp"
#include "transfr/rng.hpp"

namespace transfr {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = rng.normal();
  return m;
}

TEST(MatmulTest, IdentityLeavesMatrixUnchanged) {
  const Matrix m{{1.5, -2.0, 3.0}, {0.25, 4.0, -1.0}};
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(MatmulTest, HandCheckedTwoByTwo) {
  const Matrix out = matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{0}, {1}});
  EXPECT_EQ(out, (Matrix{{2}, {4}}));
}

TEST(MatmulTest, MatchesTripleLoop) {
  Rng rng(11, "matmul");
  const Matrix a = random_matrix(5, 3, rng), b = random_matrix(3, 4, rng);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-14);
    }
  }
}

TEST(MatmulTest, TransposedVariantsAgreeWithExplicitTranspose) {
  Rng rng(12, "matmul");
  const Matrix a = random_matrix(4, 3, rng), b = random_matrix(4, 5, rng);
  const Matrix c = random_matrix(6, 3, rng);
  EXPECT_LT(max_abs_diff(matmul_tn(a, b).data(), matmul(a.transpose(), b).data()), 1e-14);
  EXPECT_LT(max_abs_diff(matmul_nt(a, c).data(), matmul(a, c.transpose()).data()), 1e-14);
}

TEST(MatmulTest, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST(MatmulTest, AssociativeOnRandomInstances) {
  for (int t = 0; t < 50; ++t) {
    Rng rng(t, "assoc");
    const std::size_t n = 1 + rng.index(5), m = 1 + rng.index(5);
    const std::size_t p = 1 + rng.index(5), q = 1 + rng.index(5);
    const Matrix a = random_matrix(n, m, rng), b = random_matrix(m, p, rng);
    const Matrix c = random_matrix(p, q, rng);
    EXPECT_LT(max_abs_diff(matmul(matmul(a, b), c).data(), matmul(a, matmul(b, c)).data()), 1e-9);
  }
}

TEST(SigmoidTest, KnownValues) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  const double s = sigmoid(50.0);
  EXPECT_GT(s, 1.0 - 1e-9);
  EXPECT_LT(s, 1.0);
  EXPECT_NEAR(sigmoid(1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(sigmoid(1.0), 0.7310585786300049, 1e-15);
}

TEST(SigmoidTest, SymmetricAndMonotone) {
  double prev = 0.0;
  for (double x = -40; x <= 40; x += 0.37) {
    EXPECT_NEAR(sigmoid(-x), 1.0 - sigmoid(x), 1e-15);
    EXPECT_GE(sigmoid(x), prev);
    if (std::fabs(x) < 30) {
      EXPECT_GT(sigmoid(x), prev);
    }
    prev = sigmoid(x);
  }
  EXPECT_GT(sigmoid(-800.0), 0.0);
  EXPECT_LT(sigmoid(800.0), 1.0);
}

TEST(SoftplusTest, MatchesDirectFormulaAndSaturates) {
  for (double x : {-5.0, -0.5, 0.0, 0.5, 5.0}) {
    EXPECT_NEAR(softplus(x), std::log1p(std::exp(x)), 1e-14);
  }
  EXPECT_NEAR(softplus(1000.0), 1000.0, 1e-12);
  EXPECT_GE(softplus(-1000.0), 0.0);
}

TEST(SoftmaxTest, EqualRowIsUniform) {
  const Matrix out = softmax_rows(Matrix{{3, 3, 3, 3}});
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(SoftmaxTest, LargeEntriesDoNotOverflow) {
  const Matrix out = softmax_rows(Matrix{{1000, 0}});
  EXPECT_NEAR(out(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.0, 1e-15);
  EXPECT_TRUE(all_finite(out.data()));
}

TEST(SoftmaxTest, MatchesDirectFormula) {
  const Matrix out = softmax_rows(Matrix{{1, 2, 3}});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out(0, i), std::exp(i + 1.0) / z, 1e-12);
}

TEST(SoftmaxTest, RowsSumToOne) {
  Rng rng(5, "softmax");
  Matrix m(20, 7);
  for (auto& x : m.data()) x = (rng.uniform() * 2 - 1) * 1e3;
  const Matrix out = softmax_rows(m);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double s = 0;
    for (double v : out.row(r)) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SgdStepTest, ZeroGradientIsNoOp) {
  const Vector p{1.0, -2.0, 3.5};
  EXPECT_EQ(sgd_step(p, Vector(3, 0.0), 0.1), p);
}

TEST(SgdStepTest, HandArithmetic) {
  EXPECT_EQ(sgd_step(Vector{1, 1}, Vector{1, 2}, 0.5), (Vector{0.5, 0.0}));
}

TEST(SgdStepTest, QuadraticConvergesMonotonically) {
  Vector x{1.0};
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    x = sgd_step(x, Vector{2 * x[0]}, 0.1);
    EXPECT_LT(std::fabs(x[0]), prev);
    prev = std::fabs(x[0]);
  }
  EXPECT_LT(prev, 1e-9);
}

TEST(SgdStepTest, LinearInGradient) {
  Rng rng(3, "sgd");
  for (int t = 0; t < 20; ++t) {
    Vector p(6), g1(6), g2(6), sum(6);
    for (std::size_t i = 0; i < 6; ++i) {
      p[i] = rng.normal();
      g1[i] = rng.normal();
      g2[i] = rng.normal();
      sum[i] = g1[i] + g2[i];
    }
    EXPECT_LT(max_abs_diff(sgd_step(p, sum, 0.3), sgd_step(sgd_step(p, g1, 0.3), g2, 0.3)), 1e-14);
  }
}

TEST(SgdStepTest, RejectsMismatchAndNonPositiveRate) {
  EXPECT_THROW(sgd_step(Vector{1, 2}, Vector{1}, 0.1), ShapeError);
  EXPECT_THROW(sgd_step(Vector{1}, Vector{1}, 0.0), DomainError);
}

TEST(FiniteDifferenceTest, ConstantHasZeroGradient) {
  const Vector g = finite_difference_gradient([](const Vector&) { return 4.2; }, Vector{1, 2, 3}, 1e-5);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifferenceTest, HalfSquaredNormRecoversPoint) {
  const Vector x{0.3, -1.2, 2.0};
  const Vector g = finite_difference_gradient(
      [](const Vector& v) { return 0.5 * dot(v, v); }, x, 1e-5);
  EXPECT_LT(max_abs_diff(g, x), 1e-9);
}

TEST(FiniteDifferenceTest, NonFiniteEvaluationThrows) {
  EXPECT_THROW(finite_difference_gradient([](const Vector& v) { return std::log(v[0]); }, Vector{0.0}, 1e-3),
               NumericError);
}

TEST(RelativeErrorTest, ZeroVectorsCompareEqual) {
  EXPECT_EQ(relative_error(Vector{0, 0}, Vector{0, 0}), 0.0);
  EXPECT_NEAR(relative_error(Vector{1, 0}, Vector{0, 0}), 1.0, 1e-15);
}

}  // namespace
}  // namespace transfr
