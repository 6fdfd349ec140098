#pragma once

// Chebyshev basis on [-1, 1] paired with the plain Lebesgue measure:
//   m_k = scale * \int_{-1}^{1} T_k(eta) f(eta) d eta.
// The pairing is not orthonormal; `reconstruct` inverts it through the Gram
// matrix G_jk = \int T_j T_k.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "momentrl/error.hpp"
#include "momentrl/moment_vector.hpp"

namespace momentrl::basis {

inline constexpr double kDomainSlack = 1e-12;

struct BasisSpec {
  int order_max = 0;
  double center = 0.0;     // parameter-domain center c
  double halfwidth = 1.0;  // parameter-domain halfwidth delta, eta = (beta - c) / delta
  double measure_scale = 1.0;

  static BasisSpec canonical(int order) { return BasisSpec{order, 0.0, 1.0, 1.0}; }

  /// [c - delta, c + delta] with the pushforward measure d(psi_# lambda) = delta d lambda.
  static BasisSpec affine(int order, double center, double halfwidth) {
    return BasisSpec{order, center, halfwidth, halfwidth};
  }

  void validate() const {
    if (order_max < 0) throw DomainError("BasisSpec: order_max must be >= 0");
    if (!(halfwidth > 0.0)) throw DomainError("BasisSpec: halfwidth must be > 0");
    if (!(measure_scale > 0.0)) throw DomainError("BasisSpec: measure_scale must be > 0");
  }

  double to_parameter(double eta) const { return center + halfwidth * eta; }
  double to_canonical(double beta) const { return (beta - center) / halfwidth; }
};

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  Eigen::Index size() const noexcept { return nodes.size(); }
};

/// T_k(eta) by the three-term recurrence.
inline double eval_basis(int k, double eta) {
  if (k < 0) throw DomainError("eval_basis: negative degree");
  if (!(std::abs(eta) <= 1.0 + kDomainSlack)) {
    throw DomainError("eval_basis: |eta| > 1 (eta = " + std::to_string(eta) + ")");
  }
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = eta;
  for (int j = 1; j < k; ++j) {
    const double next = 2.0 * eta * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// (T_0(eta), ..., T_N(eta)).
inline Eigen::VectorXd eval_basis_all(int order, double eta) {
  if (order < 0) throw DomainError("eval_basis_all: negative order");
  if (!(std::abs(eta) <= 1.0 + kDomainSlack)) throw DomainError("eval_basis_all: |eta| > 1");
  Eigen::VectorXd t(order + 1);
  t(0) = 1.0;
  if (order >= 1) t(1) = eta;
  for (int k = 1; k < order; ++k) t(k + 1) = 2.0 * eta * t(k) - t(k - 1);
  return t;
}

/// b_k = \int_{-1}^{1} T_k = ((-1)^k + 1) / (1 - k^2), b_1 = 0.
inline Eigen::VectorXd basis_integrals(int order) {
  if (order < 0) throw DomainError("basis_integrals: negative order");
  Eigen::VectorXd b(order + 1);
  for (int k = 0; k <= order; ++k) {
    if (k == 1) {
      b(k) = 0.0;
    } else {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      b(k) = (sign + 1.0) / (1.0 - static_cast<double>(k) * k);
    }
  }
  return b;
}

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: need at least one node");
  QuadratureRule rule{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(i) = -x;
    rule.nodes(n - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
  return rule;
}

/// Node count used when none is supplied: max(64, 2N + 8).
inline int default_node_count(int order) { return std::max(64, 2 * order + 8); }

inline QuadratureRule default_rule(int order) { return gauss_legendre(default_node_count(order)); }

/// Moments of a function sampled at the rule's nodes. `samples` is
/// (node count) x d; the result stores one d-block per degree k.
inline MomentVector moment_transform(const Eigen::MatrixXd& samples, const BasisSpec& spec,
                                     const QuadratureRule& rule) {
  spec.validate();
  if (samples.rows() != rule.size()) {
    throw DimensionError("moment_transform: " + std::to_string(samples.rows()) +
                         " samples for " + std::to_string(rule.size()) + " nodes");
  }
  const int d = static_cast<int>(samples.cols());
  const int order = spec.order_max;
  MomentVector m(order, d);
  for (Eigen::Index j = 0; j < rule.size(); ++j) {
    const Eigen::VectorXd t = eval_basis_all(order, rule.nodes(j));
    const double w = spec.measure_scale * rule.weights(j);
    for (int k = 0; k <= order; ++k) {
      m.block(k) += (w * t(k)) * samples.row(j).transpose();
    }
  }
  return m;
}

/// Samples `f` (eta -> R^d) at the rule's nodes and transforms.
template <class Fn>
MomentVector project(Fn&& f, const BasisSpec& spec, const QuadratureRule& rule) {
  const Eigen::VectorXd first = f(rule.nodes(0));
  Eigen::MatrixXd samples(rule.size(), first.size());
  samples.row(0) = first.transpose();
  for (Eigen::Index j = 1; j < rule.size(); ++j) samples.row(j) = f(rule.nodes(j)).transpose();
  return moment_transform(samples, spec, rule);
}

/// Moments of a constant R^d-valued function: scale * b_k * value per block.
inline MomentVector constant_moments(const Eigen::VectorXd& value, const BasisSpec& spec) {
  spec.validate();
  const Eigen::VectorXd b = basis_integrals(spec.order_max);
  MomentVector m(spec.order_max, static_cast<int>(value.size()));
  for (int k = 0; k <= spec.order_max; ++k) m.block(k) = spec.measure_scale * b(k) * value;
  return m;
}

/// G_jk = \int_{-1}^{1} T_j T_k, by Gauss-Legendre with N + 1 nodes (exact).
inline Eigen::MatrixXd gram_matrix(int order) {
  if (order < 0) throw DomainError("gram_matrix: negative order");
  const QuadratureRule rule = gauss_legendre(order + 1);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(order + 1, order + 1);
  for (Eigen::Index j = 0; j < rule.size(); ++j) {
    const Eigen::VectorXd t = eval_basis_all(order, rule.nodes(j));
    g.noalias() += rule.weights(j) * t * t.transpose();
  }
  return g;
}

/// Inverts the transform on span{T_0..T_N}: solves G c = m / scale per
/// component and evaluates sum_k c_k T_k on `grid`. Returns grid.size() x d.
inline Eigen::MatrixXd reconstruct(const MomentVector& m, const BasisSpec& spec,
                                   const Eigen::VectorXd& grid) {
  spec.validate();
  if (m.order() != spec.order_max) throw DimensionError("reconstruct: order mismatch");
  const int order = m.order();
  const int d = m.block_dim();
  const Eigen::LDLT<Eigen::MatrixXd> gram(gram_matrix(order));
  if (gram.info() != Eigen::Success || gram.vectorD().cwiseAbs().minCoeff() < 1e-14) {
    throw NumericalError("reconstruct: singular Gram matrix");
  }
  // rhs(k, c) = m_k[c] / scale
  Eigen::MatrixXd rhs(order + 1, d);
  for (int k = 0; k <= order; ++k) rhs.row(k) = m.block(k).transpose() / spec.measure_scale;
  const Eigen::MatrixXd coeff = gram.solve(rhs);
  Eigen::MatrixXd out(grid.size(), d);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    out.row(i) = eval_basis_all(order, grid(i)).transpose() * coeff;
  }
  return out;
}

}  // namespace momentrl::basis
