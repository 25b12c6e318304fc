#include "regdata/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace regdata;
using regtest::random_matrix;
using regtest::random_orthogonal;
using regtest::random_symmetric;
using regtest::random_vector;

TEST(Vecv, SmallExample) {
  Vec b(2);
  b << 1, 2;
  Vec q = vecv(b);
  ASSERT_EQ(q.size(), 3);
  EXPECT_DOUBLE_EQ(q[0], 1.0);
  EXPECT_DOUBLE_EQ(q[1], 2.0);
  EXPECT_DOUBLE_EQ(q[2], 4.0);
}

TEST(Vecv, ZeroVector) {
  Vec q = vecv(Vec::Zero(3));
  EXPECT_EQ(q.size(), 6);
  EXPECT_EQ(q.norm(), 0.0);
}

TEST(Vecv, EmptyThrows) { EXPECT_THROW(vecv(Vec()), DimensionError); }

// vecs(P)' * vecv(b) must evaluate the quadratic form b'Pb.
TEST(Vecv, PairsWithVecsAsQuadraticForm) {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 7;
    Mat p = random_symmetric(rng, n);
    Vec b = random_vector(rng, n);
    const double direct = b.dot(p * b);
    const double paired = vecs(p).dot(vecv(b));
    EXPECT_NEAR(paired, direct, 1e-12 * std::max(1.0, std::abs(direct)));
  }
}

TEST(Vecs, SmallExample) {
  Mat p(2, 2);
  p << 1, 2, 2, 3;
  Vec s = vecs(p);
  ASSERT_EQ(s.size(), 3);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 4.0);
  EXPECT_DOUBLE_EQ(s[2], 3.0);
}

TEST(Vecs, Identity3) {
  Vec s = vecs(Mat::Identity(3, 3));
  Vec expect(6);
  expect << 1, 0, 0, 1, 0, 1;
  EXPECT_EQ(s, expect);
}

TEST(Vecs, RejectsAsymmetric) {
  Mat p(2, 2);
  p << 1, 2, 2.1, 3;
  EXPECT_THROW(vecs(p), NotSymmetricError);
}

TEST(Unvecs, InverseOfVecsExample) {
  Vec s(3);
  s << 1, 4, 3;
  Mat p = unvecs(s);
  Mat expect(2, 2);
  expect << 1, 2, 2, 3;
  EXPECT_EQ(p, expect);
}

TEST(Unvecs, ZeroVector) {
  EXPECT_EQ(unvecs(Vec::Zero(10)), Mat::Zero(4, 4));
}

TEST(Unvecs, BadLengthThrows) { EXPECT_THROW(unvecs(Vec::Zero(4)), DimensionError); }

TEST(Unvecs, RoundTripExact) {
  std::mt19937 rng(202);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 8;
    Vec s = random_vector(rng, sym_size(n));
    EXPECT_EQ(vecs(unvecs(s)), s);
    Mat p = random_symmetric(rng, n);
    EXPECT_EQ(unvecs(vecs(p)), p);
  }
}

TEST(Kron, IdentityTimesBlock) {
  Mat b(2, 2);
  b << 1, 2, 3, 4;
  Mat k = kron(Mat::Identity(2, 2), b);
  Mat expect = Mat::Zero(4, 4);
  expect.topLeftCorner(2, 2) = b;
  expect.bottomRightCorner(2, 2) = b;
  EXPECT_EQ(k, expect);
}

TEST(Kron, ScalarIdentity) {
  Mat one = Mat::Ones(1, 1);
  Mat b = random_matrix(*new std::mt19937(7), 3, 2);
  EXPECT_EQ(kron(one, b), b);
}

// (B' o A) vec(X) == vec(A X B), checked against the explicit triple product.
TEST(Kron, VecIdentity) {
  std::mt19937 rng(303);
  for (int trial = 0; trial < 100; ++trial) {
    Mat a = random_matrix(rng, 3, 3);
    Mat b = random_matrix(rng, 3, 3);
    Mat x = random_matrix(rng, 3, 3);
    Vec lhs = kron(b.transpose(), a) * vec(x);
    Vec rhs = vec(a * x * b);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(),
              1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST(DuplicationMatrix, N1) {
  EXPECT_EQ(duplication_matrix(1), Mat::Ones(1, 1));
}

TEST(DuplicationMatrix, N2Literal) {
  Mat m(4, 3);
  m << 1, 0, 0,
       0, 0.5, 0,
       0, 0.5, 0,
       0, 0, 1;
  EXPECT_EQ(duplication_matrix(2), m);
}

TEST(DuplicationMatrix, MapsVecsToVecExactly) {
  std::mt19937 rng(404);
  Mat m5 = duplication_matrix(5);
  for (int trial = 0; trial < 20; ++trial) {
    Mat h = random_symmetric(rng, 5);
    EXPECT_EQ(Vec(m5 * vecs(h)), vec(h));
  }
  EXPECT_EQ(numerical_rank(m5), 15);
}

TEST(Lstsq, IdentityReturnsRhs) {
  Vec b(3);
  b << 4, 5, 6;
  auto r = lstsq(Mat::Identity(3, 3), b);
  EXPECT_LE((r.x - b).norm(), 1e-14);
  EXPECT_LE(r.residual, 1e-14);
}

TEST(Lstsq, OverdeterminedConsistent) {
  std::mt19937 rng(505);
  for (int trial = 0; trial < 100; ++trial) {
    Mat a = random_matrix(rng, 12, 5);
    Vec x0 = random_vector(rng, 5);
    Vec b = a * x0;
    auto r = lstsq(a, b);
    EXPECT_LE(r.residual, 1e-10 * std::max(1.0, b.norm()));
    EXPECT_LE((r.x - x0).norm(), 1e-9 * std::max(1.0, x0.norm()));
  }
}

TEST(Lstsq, MeanOfTwoPoints) {
  Mat a(2, 1);
  a << 1, 1;
  Vec b(2);
  b << 0, 2;
  auto r = lstsq(a, b);
  EXPECT_NEAR(r.x(0, 0), 1.0, 1e-14);
}

TEST(Lstsq, RankDeficientThrows) {
  Mat a(4, 2);
  a.col(0) = Vec::Ones(4);
  a.col(1) = 2.0 * Vec::Ones(4);
  EXPECT_THROW(lstsq(a, Vec::Zero(4)), RankDeficientError);
}

TEST(Eigenvalues, RotationIsPlusMinusI) {
  Mat a(2, 2);
  a << 0, 1, -1, 0;
  auto ev = eigenvalues(a);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0].real(), 0.0, 1e-14);
  EXPECT_NEAR(ev[0].imag(), -1.0, 1e-14);
  EXPECT_NEAR(ev[1].imag(), 1.0, 1e-14);
}

TEST(Eigenvalues, Diagonal) {
  Mat a = Vec::LinSpaced(3, 1, 3).asDiagonal();
  auto ev = eigenvalues(a);
  ASSERT_EQ(ev.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(ev[i].real(), i + 1.0, 1e-14);
    EXPECT_NEAR(ev[i].imag(), 0.0, 1e-14);
  }
}

// Companion matrix of z^2 - 3z + 2; roots 1 and 2 recovered.
TEST(Eigenvalues, CompanionRoots) {
  Mat a(2, 2);
  a << 0, 1, -2, 3;
  auto ev = eigenvalues(a);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0].real(), 1.0, 1e-12);
  EXPECT_NEAR(ev[1].real(), 2.0, 1e-12);
  for (const auto& p : {1.0, 2.0}) {
    EXPECT_NEAR(p * p - 3 * p + 2, 0.0, 1e-12);
  }
}

TEST(Eigenvalues, PermutationSimilarityInvariant) {
  std::mt19937 rng(606);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4 + trial % 4;
    Mat a = random_matrix(rng, n, n);
    std::vector<int> perm(n);
    for (Index i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat p = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i) p(perm[i], i) = 1.0;
    auto ev1 = eigenvalues(a);
    auto ev2 = eigenvalues(Mat(p.transpose() * a * p));
    EXPECT_TRUE(regtest::spectra_match(ev1, ev2, 1e-8));
  }
}

TEST(NumericalRank, Identity) { EXPECT_EQ(numerical_rank(Mat::Identity(4, 4)), 4); }

TEST(NumericalRank, OuterProduct) {
  std::mt19937 rng(707);
  Vec u = random_vector(rng, 6), v = random_vector(rng, 5);
  EXPECT_EQ(numerical_rank(u * v.transpose()), 1);
}

TEST(NumericalRank, ConstructedFullColumnRank) {
  std::mt19937 rng(808);
  Mat q1 = random_orthogonal(rng, 50).leftCols(30);
  Mat q2 = random_orthogonal(rng, 30);
  Vec sv = Vec::LinSpaced(30, 1.0, 4.0);
  Mat a = q1 * sv.asDiagonal() * q2.transpose();
  EXPECT_EQ(numerical_rank(a), 30);
}

TEST(SolveLinear, Identity) {
  Vec b(2);
  b << 3, -1;
  EXPECT_LE((solve_linear(Mat::Identity(2, 2), b) - b).norm(), 1e-15);
}

TEST(SolveLinear, Diagonal) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 2;
  a(1, 1) = 4;
  Vec b(2);
  b << 2, 8;
  Vec x = solve_linear(a, b);
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 2.0, 1e-14);
}

TEST(SolveLinear, ResidualOnWellConditioned) {
  std::mt19937 rng(909);
  Mat a = random_orthogonal(rng, 20) *
          Vec::LinSpaced(20, 1.0, 5.0).asDiagonal().toDenseMatrix() *
          random_orthogonal(rng, 20);
  Vec x0 = random_vector(rng, 20);
  Vec x = solve_linear(a, Vec(a * x0));
  EXPECT_LE((x - x0).norm(), 1e-9 * x0.norm());
}

TEST(SolveLinear, SingularThrows) {
  Mat a = Mat::Ones(3, 3);
  EXPECT_THROW(solve_linear(a, Vec::Zero(3)), SingularMatrixError);
}

TEST(SymIndex, RowMajorUpperOrder) {
  EXPECT_EQ(sym_index(3, 0, 0), 0);
  EXPECT_EQ(sym_index(3, 0, 2), 2);
  EXPECT_EQ(sym_index(3, 1, 1), 3);
  EXPECT_EQ(sym_index(3, 2, 2), 5);
}
