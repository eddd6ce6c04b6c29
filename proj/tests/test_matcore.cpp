#include <gtest/gtest.h>

#include <cmath>

#include "cocycle/matcore.hpp"
#include "support.hpp"

using namespace cocycle;
using testing_support::Fixtures;
using testing_support::kPi;

namespace {

Direction dir(const Vector& v) { return Direction(v); }

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(SquareMatrix, RejectsSingularAndNonSquare) {
  EXPECT_THROW(SquareMatrix::from_rows({{1, 2}, {2, 4}}), DomainError);
  EXPECT_THROW(SquareMatrix(Matrix::Zero(2, 3)), DomainError);
  EXPECT_THROW(SquareMatrix(Matrix::Identity(1, 1)), DomainError);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(SquareMatrix{bad}, DomainError);
  EXPECT_THROW(SquareMatrix::diagonal({1.0, 1e-13}), DomainError);
}

TEST(SquareMatrix, NormsFromSingularValues) {
  const auto d = SquareMatrix::diagonal({2.0, 0.5});
  EXPECT_DOUBLE_EQ(d.norm(), 2.0);
  EXPECT_DOUBLE_EQ(d.inverse_norm(), 2.0);
  EXPECT_DOUBLE_EQ(d.determinant(), 1.0);
  EXPECT_DOUBLE_EQ(norm_N(SquareMatrix::identity(3)), 1.0);
  EXPECT_DOUBLE_EQ(norm_N(d), 2.0);
}

TEST(ProjectiveDistance, BasicValues) {
  EXPECT_DOUBLE_EQ(projective_distance(Direction::basis(2, 0), Direction::basis(2, 1)), 1.0);
  const Direction x = Direction::from_angle(0.7);
  EXPECT_NEAR(projective_distance(x, x), 0.0, 1e-15);
  EXPECT_THROW(projective_distance(Direction::basis(2, 0), Direction::basis(3, 0)), DomainError);
}

TEST(ProjectiveDistance, GramDeterminantOracleInR3) {
  Fixtures fx(11);
  for (int t = 0; t < 1000; ++t) {
    const Vector x = fx.unit(3), y = fx.unit(3);
    Eigen::Matrix2d gram;
    gram << x.dot(x), x.dot(y), y.dot(x), y.dot(y);
    EXPECT_NEAR(projective_distance(dir(x), dir(y)), std::sqrt(std::max(0.0, gram.determinant())), 1e-12);
  }
}

TEST(ProjectiveDistance, SymmetricAndSignInvariant) {
  Fixtures fx(12);
  for (int t = 0; t < 1000; ++t) {
    const Vector x = fx.unit(4), y = fx.unit(4);
    const double d = projective_distance(dir(x), dir(y));
    EXPECT_DOUBLE_EQ(d, projective_distance(dir(y), dir(x)));
    EXPECT_NEAR(d, projective_distance(dir(-x), dir(y)), 1e-15);
    EXPECT_NEAR(d, std::sqrt(std::max(0.0, 1.0 - x.dot(y) * x.dot(y))), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(WedgeNorm, ScalesWithBothVectors) {
  Fixtures fx(13);
  for (int t = 0; t < 200; ++t) {
    const Vector x = fx.unit(3), y = fx.unit(3);
    EXPECT_NEAR(wedge_norm(2.5 * x, 0.3 * y), 0.75 * wedge_norm(x, y), 1e-12);
  }
}

TEST(CocycleSigma, ExamplesAndOracle) {
  Fixtures fx(14);
  const Vector y = vec({0.3, -1.2});
  EXPECT_DOUBLE_EQ(cocycle_sigma(SquareMatrix::identity(2), y), 0.0);
  EXPECT_NEAR(cocycle_sigma(SquareMatrix::diagonal({2.0, 2.0}), y), std::log(2.0), 1e-15);
  EXPECT_THROW(cocycle_sigma(SquareMatrix::identity(2), Vector::Zero(2)), DomainError);
  for (int t = 0; t < 1000; ++t) {
    const SquareMatrix g(fx.matrix(3));
    const Vector v = fx.unit(3) * fx.uniform(0.1, 10.0);
    const Vector gv = g.values() * v;
    const double oracle = std::log(std::sqrt(gv.squaredNorm())) - std::log(std::sqrt(v.squaredNorm()));
    EXPECT_NEAR(cocycle_sigma(g, v), oracle, 1e-12);
    EXPECT_NEAR(cocycle_sigma(g, 7.0 * v), cocycle_sigma(g, v), 1e-12);
  }
}

TEST(CocycleSigma, BoundedByLogN) {
  Fixtures fx(15);
  for (int t = 0; t < 10000; ++t) {
    const SquareMatrix g(fx.matrix(2 + t % 3));
    const Vector v = fx.unit(g.dim());
    EXPECT_LE(std::abs(cocycle_sigma(g, v)), std::log(norm_N(g)) + 1e-10);
  }
}

TEST(NormN, MatchesSvdExtremes) {
  Fixtures fx(16);
  for (int t = 0; t < 500; ++t) {
    const SquareMatrix g(fx.matrix(3));
    const Eigen::JacobiSVD<Matrix> s(g.values());
    const double oracle = std::max(s.singularValues()(0), 1.0 / s.singularValues()(2));
    EXPECT_NEAR(norm_N(g), oracle, 1e-9 * oracle);
  }
}

TEST(Svd, DiagonalAndRotation) {
  const SvdTriple d = svd(SquareMatrix::diagonal({3.0, 1.0}));
  EXPECT_NEAR(d.sigma(0), 3.0, 1e-15);
  EXPECT_NEAR(d.sigma(1), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(d.U(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(d.V(0, 0)), 1.0, 1e-12);
  const SvdTriple r = svd(SquareMatrix::rotation(0.9));
  EXPECT_NEAR(r.sigma(0), 1.0, 1e-12);
  EXPECT_NEAR(r.sigma(1), 1.0, 1e-12);
}

TEST(Svd, CharacteristicPolynomialOracle2x2) {
  Fixtures fx(17);
  for (int t = 0; t < 1000; ++t) {
    const Matrix m = fx.matrix(2);
    const Matrix gtg = m.transpose() * m;
    const double tr = gtg.trace(), det = gtg.determinant();
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const SvdTriple s = svd(SquareMatrix(m));
    EXPECT_NEAR(s.sigma(0), std::sqrt(tr / 2.0 + disc), 1e-9 * s.sigma(0));
    EXPECT_NEAR(s.sigma(1), std::sqrt(det) / std::sqrt(tr / 2.0 + disc), 1e-9 * s.sigma(0));
  }
}

TEST(Svd, ReconstructsAndIsOrthogonal) {
  Fixtures fx(18);
  for (int t = 0; t < 300; ++t) {
    const int d = 2 + t % 4;
    const SquareMatrix g(fx.matrix(d));
    const SvdTriple s = svd(g);
    EXPECT_LE((s.reconstruct() - g.values()).norm(), 1e-9 * g.norm());
    EXPECT_LE((s.U.transpose() * s.U - Matrix::Identity(d, d)).norm(), 1e-12);
    EXPECT_LE((s.V * s.V.transpose() - Matrix::Identity(d, d)).norm(), 1e-12);
    for (int i = 1; i < d; ++i) EXPECT_GE(s.sigma(i - 1), s.sigma(i));
    // Deterministic for fixed input.
    const SvdTriple again = svd(g);
    EXPECT_EQ(s.U, again.U);
    EXPECT_EQ(s.V, again.V);
  }
}

TEST(ActProjective, IdentitySignAndAssociativity) {
  const Direction x = Direction::from_angle(0.4);
  EXPECT_TRUE(act_projective(SquareMatrix::identity(2), x) == x);
  EXPECT_TRUE(act_projective(SquareMatrix::diagonal({1.0, -1.0}), Direction::basis(2, 1)) == Direction::basis(2, 1));
  Fixtures fx(19);
  for (int t = 0; t < 200; ++t) {
    Direction v(fx.unit(3));
    Direction stepwise = v;
    SquareMatrix prod = SquareMatrix::identity(3);
    for (int k = 0; k < 5; ++k) {
      const SquareMatrix g(fx.matrix(3));
      stepwise = act_projective(g, stepwise);
      prod = g * prod;
    }
    EXPECT_LT(projective_distance(stepwise, act_projective(prod, v)), 1e-10);
  }
}

TEST(DetNormalize, Examples) {
  const SquareMatrix two = SquareMatrix::diagonal({2.0, 2.0});
  EXPECT_LT((det_normalize(two).values() - Matrix::Identity(2, 2)).norm(), 1e-15);
  const SquareMatrix unit = SquareMatrix::from_rows({{2.0, 1.0}, {1.0, 1.0}});
  EXPECT_LT((det_normalize(unit).values() - unit.values()).norm(), 1e-15);
  Fixtures fx(20);
  for (int t = 0; t < 500; ++t) {
    const SquareMatrix g(fx.matrix(2 + t % 3));
    const SquareMatrix h = det_normalize(g);
    EXPECT_NEAR(std::abs(h.determinant()), 1.0, 1e-10);
    // Proportional to g with a positive factor.
    const double ratio = h(0, 0) / g(0, 0);
    EXPECT_GT(ratio, 0.0);
    EXPECT_LT((h.values() - ratio * g.values()).norm(), 1e-10 * h.norm());
  }
}

TEST(ProjectiveIdentity, Sl2ExactIdentity) {
  Fixtures fx(21);
  for (int t = 0; t < 500; ++t) {
    const SquareMatrix h(fx.unimodular2());
    const Vector x = fx.unit(2), y = fx.unit(2);
    const double lhs = projective_distance(act_projective(h, dir(x)), act_projective(h, dir(y))) *
                       (h.values() * x).norm() * (h.values() * y).norm();
    EXPECT_NEAR(lhs, projective_distance(dir(x), dir(y)), 1e-10);
  }
}

TEST(ProjectiveIdentity, LipschitzBound) {
  Fixtures fx(22);
  for (int t = 0; t < 1000; ++t) {
    const SquareMatrix g(fx.matrix(3));
    const Vector x = fx.unit(3), y = fx.unit(3);
    const double before = projective_distance(dir(x), dir(y));
    const double after = projective_distance(act_projective(g, dir(x)), act_projective(g, dir(y)));
    // Normalize so that the smallest singular value is at least one.
    const double scale = 1.0 / g.sigma_min();
    EXPECT_LE(after, scale * scale * g.norm() * g.norm() * before + 1e-12);
  }
}

TEST(CocycleAdditivity, RandomPairs) {
  Fixtures fx(23);
  for (int t = 0; t < 1000; ++t) {
    const SquareMatrix g1(fx.matrix(3)), g2(fx.matrix(3));
    const Vector y = fx.unit(3);
    EXPECT_NEAR(cocycle_sigma(g2 * g1, y), cocycle_sigma(g2, g1.apply(y)) + cocycle_sigma(g1, y), 1e-10);
  }
}

TEST(DirectionEquality, CanonicalSignAndHash) {
  const Direction a(vec({1.0, -2.0, 0.5}));
  const Direction b(vec({-1.0, 2.0, -0.5}));
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_GT(a.canonical().vector()(0), 0.0);
  EXPECT_FALSE(a == Direction(vec({1.0, 2.0, 0.5})));
  EXPECT_THROW(Direction(Vector::Zero(2)), DomainError);
}

TEST(MatrixJson, RoundTripIsBitExact) {
  Fixtures fx(24);
  for (int t = 0; t < 50; ++t) {
    const Matrix m = fx.matrix(3);
    const nlohmann::json j = matrix_to_json(m);
    const Matrix back = matrix_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(m, back);
  }
  EXPECT_THROW(matrix_from_json(nlohmann::json::parse("[[1,2],[3]]")), DomainError);
  const Direction x = direction_from_json(nlohmann::json::parse("[3, 4]"));
  EXPECT_NEAR(x.vector()(0), 0.6, 1e-15);
}
