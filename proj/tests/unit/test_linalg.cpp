#include <gtest/gtest.h>

#include <cmath>

#include "olinear/error.hpp"
#include "olinear/linalg.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace olinear;
using olinear::testing::naive_matmul;
using olinear::testing::random_matrix;

namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  Matrix a = random_matrix(n, n, seed);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

}  // namespace

TEST(Matmul, MatchesNaiveOnRandomShapes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 1 + seed % 7, k = 1 + (seed * 3) % 11, n = 1 + (seed * 5) % 9;
    const Matrix a = random_matrix(m, k, seed);
    const Matrix b = random_matrix(k, n, seed + 100);
    EXPECT_LE(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-14) << "seed " << seed;
  }
}

TEST(Matmul, RejectsMismatchedShapes) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST(Matmul, RejectsNonFiniteOutput) {
  Matrix a{{1e308, 1e308}};
  Matrix b{{1e308}, {1e308}};
  EXPECT_THROW(matmul(a, b), NumericalError);
}

TEST(Matrix, TransposeAndIdentity) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  const Matrix t = a.transposed();
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t(2, 1), 6.0);
  EXPECT_EQ(matmul(a, Matrix::identity(3)), a);
}

TEST(Eigen, DiagonalMatrixSortsDescending) {
  const Matrix d{{1, 0, 0}, {0, 3, 0}, {0, 0, 2}};
  const auto e = symmetric_eigendecomp(d);
  ASSERT_EQ(e.lambda.size(), 3u);
  EXPECT_DOUBLE_EQ(e.lambda[0], 3.0);
  EXPECT_DOUBLE_EQ(e.lambda[1], 2.0);
  EXPECT_DOUBLE_EQ(e.lambda[2], 1.0);
  EXPECT_DOUBLE_EQ(e.q(1, 0), 1.0);
}

TEST(Eigen, TwoByTwoClosedForm) {
  const Matrix s{{2, 1}, {1, 2}};
  const auto e = symmetric_eigendecomp(s);
  EXPECT_NEAR(e.lambda[0], 3.0, 1e-14);
  EXPECT_NEAR(e.lambda[1], 1.0, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(e.q(0, 0), r, 1e-14);
  EXPECT_NEAR(e.q(1, 0), r, 1e-14);
  // First entry above 1e-12 in magnitude is positive.
  EXPECT_GT(e.q(0, 1), 0.0);
}

TEST(Eigen, ReconstructsRandomSymmetric) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::size_t n = 2 + seed * 3;
    const Matrix s = random_symmetric(n, seed);
    const auto e = symmetric_eigendecomp(s);
    EXPECT_LE(orthogonality_error(e.q), 1e-12);
    Matrix lq(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) lq(i, j) = e.q(i, j) * e.lambda[j];
    EXPECT_LE(max_abs_diff(naive_matmul(lq, e.q.transposed()), s), 1e-12);
    for (std::size_t i = 1; i < n; ++i) EXPECT_GE(e.lambda[i - 1], e.lambda[i]);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(e.q(i, j)) > 1e-12) {
          EXPECT_GT(e.q(i, j), 0.0);
          break;
        }
      }
    }
  }
}

TEST(Eigen, DeterministicBytes) {
  const Matrix s = random_symmetric(24, 7);
  const auto a = symmetric_eigendecomp(s);
  const auto b = symmetric_eigendecomp(s);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.lambda, b.lambda);
}

TEST(Eigen, RepeatedEigenvaluesStillOrthonormal) {
  const auto e = symmetric_eigendecomp(Matrix::identity(5));
  EXPECT_EQ(e.q, Matrix::identity(5));
  for (double l : e.lambda) EXPECT_EQ(l, 1.0);
}

TEST(Eigen, RejectsAsymmetricAndNonSquare) {
  EXPECT_THROW(symmetric_eigendecomp(Matrix{{1, 2}, {0, 1}}), InputError);
  EXPECT_THROW(symmetric_eigendecomp(Matrix(2, 3)), ShapeError);
}

TEST(Rank, MatchesGaussianEliminationOnLowRankProducts) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t r = 1 + seed % 4;
    const Matrix m = matmul(random_matrix(8, r, seed), random_matrix(r, 6, seed + 50));
    const auto rep = rank_report(m, 1e-9);
    EXPECT_EQ(rep.numerical_rank, olinear::testing::gauss_rank(m, 1e-9)) << "seed " << seed;
    EXPECT_EQ(rep.numerical_rank, r);
    EXPECT_LE(rep.effective_rank, static_cast<double>(r) + 1e-9);
    EXPECT_GE(rep.effective_rank, 1.0 - 1e-12);
  }
}

TEST(Rank, ZeroAndIdentity) {
  const auto z = rank_report(Matrix(4, 4), 1e-9);
  EXPECT_EQ(z.numerical_rank, 0u);
  EXPECT_EQ(z.effective_rank, 0.0);
  const auto i = rank_report(Matrix::identity(4), 1e-9);
  EXPECT_EQ(i.numerical_rank, 4u);
  EXPECT_NEAR(i.effective_rank, 4.0, 1e-12);
}
