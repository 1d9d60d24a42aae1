#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "sefa/analysis.hpp"
#include "sefa/linalg.hpp"

using sefa::ErrorCode;
using sefa::Matrix;
using sefa::Rng;
using sefa::Vector;
using support::code_of;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

Matrix seeded_8x4() {
  Rng rng(42);
  return Matrix::uniform(8, 4, rng);
}

// Frozen from oracle::naive_gram on seeded_8x4().
const double kSeededGram[4][4] = {
    {2.5598068646318248, -0.54513132460899105, 0.75240459305755159, -1.2203749495068845},
    {-0.54513132460899105, 2.5911529370858641, 0.19086470197461136, 1.2420032239251353},
    {0.75240459305755159, 0.19086470197461136, 2.742133614575049, 0.86072157243179126},
    {-1.2203749495068845, 1.2420032239251353, 0.86072157243179126, 2.9246419244487734},
};

// Frozen from oracle::power_iteration(naive_gram(seeded_8x4()), 4), residual 1e-13.
const double kSeededEigenvalues[4] = {4.8227168056715186, 3.3833933108137333, 1.8387988552783749,
                                      0.77282636897788504};

}  // namespace

TEST(Gram, SmallExample) {
  const Matrix s = sefa::gram(Matrix{{1, 2}, {3, 4}});
  EXPECT_EQ(s, (Matrix{{10, 14}, {14, 20}}));
}

TEST(Gram, IdentityMapsToIdentity) {
  EXPECT_EQ(sefa::gram(Matrix::identity(3)), Matrix::identity(3));
}

TEST(Gram, SeededMatchesNaiveOracle) {
  const Matrix a = seeded_8x4();
  const Matrix s = sefa::gram(a);
  EXPECT_LE(max_abs_diff(s, oracle::naive_gram(a)), 1e-15);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(s(i, j), kSeededGram[i][j], 1e-15);
}

TEST(Gram, ExactlySymmetricForOddShapes) {
  Rng rng(3);
  const Matrix a = Matrix::gaussian(67, 13, rng);
  const Matrix s = sefa::gram(a);
  for (std::size_t i = 0; i < 13; ++i)
    for (std::size_t j = 0; j < 13; ++j) EXPECT_EQ(s(i, j), s(j, i));
  EXPECT_LE(max_abs_diff(s, oracle::naive_gram(a)), 1e-12);
}

TEST(TopK, DiagonalMatrix) {
  const double diag[] = {9, 4, 1};
  const auto pairs = sefa::top_k_eigenpairs(Matrix::diagonal(diag), 2);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_DOUBLE_EQ(pairs[0].value, 9.0);
  EXPECT_DOUBLE_EQ(pairs[1].value, 4.0);
  EXPECT_EQ(pairs[0].vector, Vector::unit(3, 0));
  EXPECT_EQ(pairs[1].vector, Vector::unit(3, 1));
}

TEST(TopK, IdentityGivesOrthonormalBasis) {
  const std::size_t d = 6;
  const auto pairs = sefa::top_k_eigenpairs(Matrix::identity(d), d);
  std::vector<Vector> vectors;
  for (const auto& p : pairs) {
    EXPECT_DOUBLE_EQ(p.value, 1.0);
    vectors.push_back(p.vector);
  }
  std::vector<Vector> basis;
  for (std::size_t i = 0; i < d; ++i) basis.push_back(Vector::unit(d, i));
  for (double angle : sefa::principal_angles(vectors, basis)) EXPECT_LE(angle, 1e-7);
}

TEST(TopK, SeededGramMatchesPowerIterationOracle) {
  const Matrix s = sefa::gram(seeded_8x4());
  const auto pairs = sefa::top_k_eigenpairs(s, 4);
  const auto reference = oracle::power_iteration(s, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(pairs[i].value, kSeededEigenvalues[i], 1e-9 * kSeededEigenvalues[i]);
    EXPECT_NEAR(pairs[i].value, reference[i].value, 1e-9 * reference[i].value);
    double cos = 0.0;
    for (std::size_t j = 0; j < 4; ++j) cos += pairs[i].vector[j] * reference[i].vector[j];
    EXPECT_GE(std::abs(cos), 1.0 - 1e-9);
  }
}

TEST(TopK, RejectsAsymmetricInput) {
  EXPECT_EQ(code_of([] { sefa::top_k_eigenpairs(Matrix{{1, 2}, {2.1, 1}}, 1); }), ErrorCode::NotSymmetric);
  EXPECT_EQ(code_of([] { sefa::top_k_eigenpairs(Matrix(2, 3), 1); }), ErrorCode::NotSymmetric);
}

TEST(TopK, RejectsTooManyPairs) {
  EXPECT_EQ(code_of([] { sefa::top_k_eigenpairs(Matrix::identity(3), 4); }), ErrorCode::KTooLarge);
}

TEST(TopK, SignIsCanonical) {
  Rng rng(11);
  const Matrix s = sefa::gram(Matrix::gaussian(20, 9, rng));
  for (const auto& p : sefa::top_k_eigenpairs(s, 9)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.vector.dim(); ++i)
      if (std::abs(p.vector[i]) > std::abs(p.vector[best])) best = i;
    EXPECT_GT(p.vector[best], 0.0);
  }
}

TEST(TopK, DegenerateEigenspaceComparedAsSubspace) {
  // Q·diag(5, 5, 2, 1)·Qᵀ with a random orthogonal Q.
  Rng rng(5);
  Matrix q = Matrix::gaussian(4, 4, rng);
  std::vector<Vector> cols;
  for (std::size_t j = 0; j < 4; ++j) cols.push_back(q.column(j));
  auto basis = sefa::detail::orthonormal_basis(cols);
  const double lambdas[] = {5, 5, 2, 1};
  Matrix s(4, 4);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) s(i, j) += lambdas[k] * basis[k][i] * basis[k][j];
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);

  const auto pairs = sefa::top_k_eigenpairs(s, 2);
  EXPECT_NEAR(pairs[0].value, 5.0, 1e-12);
  EXPECT_NEAR(pairs[1].value, 5.0, 1e-12);
  const auto angles = sefa::principal_angles({pairs[0].vector, pairs[1].vector}, {basis[0], basis[1]});
  for (double a : angles) EXPECT_LE(a, 1e-10);
}

// Hand-rolled generator over random shapes and seeds.
TEST(TopKProperty, ResidualOrderingTraceAndOrthonormality) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * 24);
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 40);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(d));
    const Matrix a = Matrix::uniform(m, d, rng);
    const Matrix s = sefa::gram(a);
    const auto pairs = sefa::top_k_eigenpairs(s, k);
    const double norm_f = s.frobenius_norm();

    double sum = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      Vector r = s * pairs[i].vector;
      r -= pairs[i].value * pairs[i].vector;
      EXPECT_LE(r.norm(), 1e-8 * norm_f) << "seed " << seed;
      EXPECT_LE(std::abs(pairs[i].vector.norm() - 1.0), 1e-12);
      EXPECT_GE(pairs[i].value, 0.0);
      if (i > 0) {
        EXPECT_LE(pairs[i].value, pairs[i - 1].value);
      }
      for (std::size_t j = 0; j < pairs.size(); ++j) {
        const double expected = i == j ? 1.0 : 0.0;
        EXPECT_LE(std::abs(pairs[i].vector.dot(pairs[j].vector) - expected), 1e-10);
      }
      sum += pairs[i].value;
    }
    EXPECT_LE(sum, sefa::trace(s) * (1 + 1e-12)) << "seed " << seed;
  }
}

TEST(GramProperty, IsPositiveSemidefinite) {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = Matrix::gaussian(15, 10, rng);
    const Matrix s = sefa::gram(a);
    const double scale = a.frobenius_norm() * a.frobenius_norm();
    for (int i = 0; i < 100; ++i) {
      Vector x(10);
      for (std::size_t j = 0; j < 10; ++j) x[j] = rng.normal();
      EXPECT_GE(x.dot(s * x), -1e-10 * x.dot(x) * scale);
    }
  }
}
