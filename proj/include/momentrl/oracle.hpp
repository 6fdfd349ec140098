#pragma once

// Ground-truth solvers for the linear-quadratic cases and the two
// convergence demonstrations (sampled finite populations vs. the moment
// hierarchy) used for comparison against the policy search.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "momentrl/basis.hpp"
#include "momentrl/error.hpp"
#include "momentrl/ode.hpp"
#include "momentrl/systems.hpp"

namespace momentrl::oracle {

struct RiccatiSolution {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> p;     // P(t_i), symmetric
  std::vector<Eigen::MatrixXd> gain;  // K(t_i) = R^{-1} B' P(t_i)
};

/// Backward RK4 on -dP/dt = Q + A'P + PA - P B R^{-1} B' P, P(T) = P_T.
inline RiccatiSolution riccati_finite(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                                      const Eigen::MatrixXd& r, const Eigen::MatrixXd& p_terminal,
                                      const TimeGrid& grid) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || p_terminal.rows() != n ||
      p_terminal.cols() != n || r.rows() != b.cols() || r.cols() != b.cols()) {
    throw DimensionError("riccati_finite: inconsistent dimensions");
  }
  const Eigen::LLT<Eigen::MatrixXd> r_chol(r);
  if (r_chol.info() != Eigen::Success) throw DomainError("riccati_finite: R must be positive definite");
  const Eigen::MatrixXd s = b * r_chol.solve(b.transpose());

  auto dp = [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd {
    return -(q + a.transpose() * p + p * a - p * s * p);
  };

  const int nodes = grid.node_count();
  const double h = grid.step();
  RiccatiSolution sol{grid, std::vector<Eigen::MatrixXd>(nodes), std::vector<Eigen::MatrixXd>(nodes)};
  Eigen::MatrixXd p = p_terminal;
  sol.p[nodes - 1] = p;
  for (int i = nodes - 1; i > 0; --i) {
    const Eigen::MatrixXd k1 = dp(p);
    const Eigen::MatrixXd k2 = dp(p - 0.5 * h * k1);
    const Eigen::MatrixXd k3 = dp(p - 0.5 * h * k2);
    const Eigen::MatrixXd k4 = dp(p - h * k3);
    p -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p = 0.5 * (p + p.transpose()).eval();
    if (!p.allFinite()) throw NumericalError("riccati_finite: blow-up at node " + std::to_string(i - 1));
    sol.p[i - 1] = p;
  }
  for (int i = 0; i < nodes; ++i) sol.gain[i] = r_chol.solve(b.transpose() * sol.p[i]);
  return sol;
}

/// Solves A'X + XA = -C as a dense system in vec(X).
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd at = a.transpose();
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n * n, n * n);
  // vec(A'X) = (I (x) A') vec X,  vec(XA) = (A' (x) I) vec X
  for (Eigen::Index j = 0; j < n; ++j) {
    op.block(j * n, j * n, n, n) += at;
    for (Eigen::Index i = 0; i < n; ++i) {
      op.block(i * n, j * n, n, n).diagonal().array() += at(i, j);
    }
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(c.data(), n * n);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(op);
  Eigen::VectorXd x = lu.solve(rhs);
  if (!x.allFinite()) throw NumericalError("solve_lyapunov: singular operator");
  Eigen::MatrixXd out = Eigen::Map<Eigen::MatrixXd>(x.data(), n, n);
  return 0.5 * (out + out.transpose());
}

struct KleinmanResult {
  Eigen::MatrixXd p;
  Eigen::MatrixXd gain;
  std::vector<Eigen::MatrixXd> iterates;  // P_1, P_2, ...
};

/// Policy iteration for rho P = Q + A'P + PA - P B R^{-1} B' P, run on the
/// shifted system A - (rho/2) I from the stabilizing gain `k0`.
inline KleinmanResult kleinman_discounted(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                          const Eigen::MatrixXd& q, const Eigen::MatrixXd& r, double rho,
                                          Eigen::MatrixXd k0 = {}) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m) {
    throw DimensionError("kleinman_discounted: inconsistent dimensions");
  }
  const Eigen::LLT<Eigen::MatrixXd> r_chol(r);
  if (r_chol.info() != Eigen::Success) throw DomainError("kleinman_discounted: R must be positive definite");
  const Eigen::MatrixXd shifted = a - 0.5 * rho * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd k = k0.size() == 0 ? Eigen::MatrixXd::Zero(m, n) : std::move(k0);

  constexpr int kMaxIters = 100;
  constexpr double kTol = 1e-10;
  KleinmanResult out;
  Eigen::MatrixXd p_prev;
  for (int it = 0; it < kMaxIters; ++it) {
    const Eigen::MatrixXd closed = shifted - b * k;
    const Eigen::MatrixXd p = solve_lyapunov(closed, q + k.transpose() * r * k);
    out.iterates.push_back(p);
    k = r_chol.solve(b.transpose() * p);
    if (p_prev.size() != 0 && (p - p_prev).cwiseAbs().maxCoeff() <= kTol) {
      out.p = p;
      out.gain = k;
      return out;
    }
    p_prev = p;
  }
  throw NumericalError("kleinman_discounted: no convergence in 100 iterations");
}

/// max |rho P - Q - A'P - PA + P B R^{-1} B' P|.
inline double discounted_are_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                                      const Eigen::MatrixXd& r, double rho, const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd s = b * r.llt().solve(b.transpose());
  return (rho * p - q - a.transpose() * p - p * a + p * s * p).cwiseAbs().maxCoeff();
}

struct ConvergenceRow {
  int index = 0;  // n (sampled) or N (moment order)
  double value = 0.0;        // V*(x0)
  double value_diff = std::numeric_limits<double>::quiet_NaN();
  double policy_diff = std::numeric_limits<double>::quiet_NaN();
  long param_count = 0;
  double wall_time_s = 0.0;
  Eigen::VectorXd policy;       // u*(t) on the simulation grid
  Eigen::VectorXd value_trace;  // V*(x*(t)) on the simulation grid
};

struct ConvergenceTable {
  TimeGrid sim_grid;
  std::vector<ConvergenceRow> rows;
};

struct DemoSettings {
  double rho = 2.5;
  TimeGrid sim_grid{0.0, 5.0, 500};
};

namespace detail {
inline ConvergenceRow discounted_row(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                                     const Eigen::MatrixXd& r, const Eigen::VectorXd& x0, const DemoSettings& s) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const KleinmanResult kr = kleinman_discounted(a, b, q, r, s.rho);
  const Eigen::MatrixXd closed = a - b * kr.gain;
  const Eigen::MatrixXd states = rk4_linear(closed, x0, s.sim_grid);
  ConvergenceRow row;
  row.value = x0.dot(kr.p * x0);
  row.policy = (-kr.gain * states).row(0).transpose();
  row.value_trace = (states.array() * (kr.p * states).array()).colwise().sum().transpose();
  row.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  return row;
}

inline void fill_differences(ConvergenceTable& table) {
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    auto& cur = table.rows[i];
    const auto& prev = table.rows[i - 1];
    cur.value_diff = std::abs(cur.value - prev.value);
    cur.policy_diff = (cur.policy - prev.policy).cwiseAbs().maxCoeff();
  }
}
}  // namespace detail

/// n sampled scalar systems dx_i/dt = a_i x_i + u, a_i uniform on [-1, 1],
/// reward x'x/n + u^2 discounted at rho, x0 = ones.
inline ConvergenceTable sampled_demo(int n_first, int n_last, const DemoSettings& settings = {}) {
  if (n_first < 2 || n_last < n_first) throw DomainError("sampled_demo: need 2 <= n_first <= n_last");
  ConvergenceTable table{settings.sim_grid, {}};
  for (int n = n_first; n <= n_last; ++n) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) a(i, i) = -1.0 + 2.0 * i / (n - 1);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Ones(n, 1);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n) / n;
    const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);
    ConvergenceRow row = detail::discounted_row(a, b, q, r, Eigen::VectorXd::Ones(n), settings);
    row.index = n;
    row.param_count = static_cast<long>(n) * (n + 1) / 2;
    table.rows.push_back(std::move(row));
  }
  detail::fill_differences(table);
  return table;
}

/// Discounted LQR on the order-N moment system (Q = I, R = 2) for each N,
/// started from the moments of x0 = 1.
inline ConvergenceTable frl_infinite_demo(int n_first, int n_last, const DemoSettings& settings = {},
                                          bool exact_row0 = false) {
  if (n_first < 0 || n_last < n_first) throw DomainError("frl_infinite_demo: need 0 <= N_first <= N_last");
  ConvergenceTable table{settings.sim_grid, {}};
  for (int order = n_first; order <= n_last; ++order) {
    const LqrMomentModel model(order, exact_row0);
    const Eigen::Index n = model.state_dim();
    const Eigen::MatrixXd b = model.input();
    const Eigen::MatrixXd q = LqrMomentModel::kStateWeight * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, LqrMomentModel::kControlWeight);
    ConvergenceRow row =
        detail::discounted_row(model.drift(), b, q, r, model.initial_state().values(), settings);
    row.index = order;
    row.param_count = static_cast<long>(n) * (n + 1) / 2;
    table.rows.push_back(std::move(row));
  }
  detail::fill_differences(table);
  return table;
}

}  // namespace momentrl::oracle
