#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "momentrl/basis.hpp"

using namespace momentrl;
using namespace momentrl::basis;

TEST(Basis, MatchesCosineForm) {
  // T_k(cos t) = cos(k t)
  for (int k = 0; k <= 12; ++k) {
    for (double t : {0.0, 0.3, 1.1, 2.0, std::numbers::pi}) {
      EXPECT_NEAR(eval_basis(k, std::cos(t)), std::cos(k * t), 1e-13) << "k=" << k;
    }
  }
}

TEST(Basis, OutsideDomainThrows) {
  EXPECT_THROW(eval_basis(1, 1.5), DomainError);
  EXPECT_THROW(eval_basis(-1, 0.0), DomainError);
  EXPECT_NO_THROW(eval_basis(3, 1.0 + 1e-13));
}

TEST(Basis, IntegralsClosedForm) {
  const Eigen::VectorXd b = basis_integrals(6);
  EXPECT_DOUBLE_EQ(b(0), 2.0);
  EXPECT_DOUBLE_EQ(b(1), 0.0);
  EXPECT_NEAR(b(2), -2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(b(3), 0.0);
  EXPECT_NEAR(b(4), -2.0 / 15.0, 1e-15);
  EXPECT_NEAR(b(6), -2.0 / 35.0, 1e-15);
}

TEST(Basis, GaussLegendreExactOnMonomials) {
  for (int n : {1, 2, 5, 16, 64}) {
    const QuadratureRule rule = gauss_legendre(n);
    EXPECT_NEAR(rule.weights.sum(), 2.0, 1e-13);
    const int deg = 2 * n - 2;  // even degree inside the exactness range
    double q = 0.0;
    for (Eigen::Index j = 0; j < rule.size(); ++j) q += rule.weights(j) * std::pow(rule.nodes(j), deg);
    EXPECT_NEAR(q, 2.0 / (deg + 1), 1e-13) << "n=" << n;
  }
}

TEST(Basis, ConstantMomentsOfOne) {
  const MomentVector m = constant_moments(Eigen::VectorXd::Ones(1), BasisSpec::canonical(2));
  EXPECT_DOUBLE_EQ(m.block(0)(0), 2.0);
  EXPECT_DOUBLE_EQ(m.block(1)(0), 0.0);
  EXPECT_NEAR(m.block(2)(0), -2.0 / 3.0, 1e-15);
}

TEST(Basis, TransformOfConstantAgreesWithClosedForm) {
  const BasisSpec spec = BasisSpec::affine(8, 1.0, 0.4);
  const MomentVector q = project([](double) { return Eigen::Vector3d(0, 0, 1); }, spec, default_rule(8));
  const MomentVector c = constant_moments(Eigen::Vector3d(0, 0, 1), spec);
  EXPECT_LE((q.values() - c.values()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(c.block(0)(2), 0.8, 1e-15);
}

TEST(Basis, GramMatrixClosedForm) {
  // \int T_j T_k = (b_{j+k} + b_{|j-k|}) / 2
  const int order = 7;
  const Eigen::MatrixXd g = gram_matrix(order);
  const Eigen::VectorXd b = basis_integrals(2 * order);
  for (int j = 0; j <= order; ++j) {
    for (int k = 0; k <= order; ++k) {
      EXPECT_NEAR(g(j, k), 0.5 * (b(j + k) + b(std::abs(j - k))), 1e-13);
    }
  }
}

TEST(Basis, RoundTripPolynomials) {
  for (int order : {0, 1, 4, 10, 16}) {
    for (const auto& spec : {BasisSpec::canonical(order), BasisSpec::affine(order, 1.0, 0.4)}) {
      Eigen::VectorXd coeff(order + 1);
      for (int k = 0; k <= order; ++k) coeff(k) = std::sin(1.0 + 0.7 * k);
      auto f = [&](double eta) { return Eigen::VectorXd::Constant(1, eval_basis_all(order, eta).dot(coeff)); };
      const MomentVector m = project(f, spec, default_rule(order));
      const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(41, -1.0, 1.0);
      const Eigen::MatrixXd back = reconstruct(m, spec, grid);
      for (Eigen::Index i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(back(i, 0), f(grid(i))(0), 1e-9) << "order=" << order;
      }
    }
  }
}

TEST(Basis, TransformRejectsWrongSampleCount) {
  EXPECT_THROW(moment_transform(Eigen::MatrixXd::Zero(3, 1), BasisSpec::canonical(2), gauss_legendre(4)),
               DimensionError);
}

TEST(MomentVectorTest, ShapeChecks) {
  EXPECT_THROW(MomentVector(2, 3, Eigen::VectorXd::Zero(8)), DimensionError);
  EXPECT_THROW(MomentVector(-1, 1), DomainError);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  bad(1) = std::nan("");
  EXPECT_THROW(MomentVector(2, 1, bad), NumericalError);
  MomentVector m(1, 3);
  m.block(1) << 1, 2, 2;
  EXPECT_DOUBLE_EQ(m.norm(), 3.0);
}
