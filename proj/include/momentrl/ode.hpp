#pragma once

// Uniform time grids, node-sampled trajectories and policies, and fixed-step
// RK4 in both time directions. Values between nodes are linear interpolants;
// RK4 half-steps use the midpoint average of adjacent nodes.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "momentrl/error.hpp"
#include "momentrl/moment_vector.hpp"
#include "momentrl/systems.hpp"

namespace momentrl {

class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double t0, double t_final, int steps) : t0_(t0), t_final_(t_final), steps_(steps) {
    if (!(t_final > t0)) throw DomainError("TimeGrid: T must exceed t0");
    if (steps < 1) throw DomainError("TimeGrid: steps must be >= 1");
  }

  double t0() const noexcept { return t0_; }
  double t_final() const noexcept { return t_final_; }
  int steps() const noexcept { return steps_; }
  int node_count() const noexcept { return steps_ + 1; }
  double step() const noexcept { return (t_final_ - t0_) / steps_; }
  double node(int i) const noexcept { return i == steps_ ? t_final_ : t0_ + i * step(); }

  Eigen::VectorXd nodes() const {
    Eigen::VectorXd t(node_count());
    for (int i = 0; i < node_count(); ++i) t(i) = node(i);
    return t;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double t0_ = 0.0;
  double t_final_ = 1.0;
  int steps_ = 200;
};

namespace detail {
/// Column-per-node table with linear interpolation in t.
inline Eigen::VectorXd interpolate_columns(const TimeGrid& grid, const Eigen::MatrixXd& table, double t) {
  const double h = grid.step();
  double s = (t - grid.t0()) / h;
  if (s <= 0.0) return table.col(0);
  if (s >= grid.steps()) return table.col(grid.steps());
  const int i = static_cast<int>(std::floor(s));
  const double a = s - i;
  return (1.0 - a) * table.col(i) + a * table.col(i + 1);
}
}  // namespace detail

/// Control values u(t_i) in R^r at every grid node.
class PolicyTable {
 public:
  PolicyTable() = default;
  PolicyTable(TimeGrid grid, Eigen::MatrixXd controls) : grid_(grid), controls_(std::move(controls)) {
    if (controls_.cols() != grid_.node_count()) {
      throw DimensionError("PolicyTable: " + std::to_string(controls_.cols()) + " columns for " +
                           std::to_string(grid_.node_count()) + " nodes");
    }
  }

  static PolicyTable zeros(const TimeGrid& grid, Eigen::Index control_dim) {
    return PolicyTable(grid, Eigen::MatrixXd::Zero(control_dim, grid.node_count()));
  }
  static PolicyTable constant(const TimeGrid& grid, const Eigen::VectorXd& value) {
    return PolicyTable(grid, value.replicate(1, grid.node_count()));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  Eigen::Index control_dim() const noexcept { return controls_.rows(); }
  const Eigen::MatrixXd& controls() const noexcept { return controls_; }
  Eigen::MatrixXd& controls() noexcept { return controls_; }
  Eigen::VectorXd at(int node) const { return controls_.col(node); }
  Eigen::VectorXd midpoint(int i) const { return 0.5 * (controls_.col(i) + controls_.col(i + 1)); }
  Eigen::VectorXd eval(double t) const { return detail::interpolate_columns(grid_, controls_, t); }

 private:
  TimeGrid grid_;
  Eigen::MatrixXd controls_;
};

/// Moment state at every grid node (one column per node).
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(TimeGrid grid, int order, int block_dim, Eigen::MatrixXd states)
      : grid_(grid), order_(order), block_dim_(block_dim), states_(std::move(states)) {
    if (states_.cols() != grid_.node_count()) throw DimensionError("Trajectory: one state per node required");
    if (states_.rows() != static_cast<Eigen::Index>(block_dim) * (order + 1)) {
      throw DimensionError("Trajectory: state length does not match order and block_dim");
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  int order() const noexcept { return order_; }
  int block_dim() const noexcept { return block_dim_; }
  const Eigen::MatrixXd& states() const noexcept { return states_; }
  Eigen::VectorXd state(int node) const { return states_.col(node); }
  Eigen::VectorXd final_state() const { return states_.col(states_.cols() - 1); }
  Eigen::VectorXd midpoint(int i) const { return 0.5 * (states_.col(i) + states_.col(i + 1)); }
  Eigen::VectorXd eval(double t) const { return detail::interpolate_columns(grid_, states_, t); }
  MomentVector moments(int node) const { return MomentVector(order_, block_dim_, states_.col(node)); }

 private:
  TimeGrid grid_;
  int order_ = 0;
  int block_dim_ = 1;
  Eigen::MatrixXd states_;
};

/// Classical RK4 on a generic right-hand side f(t, x, node_or_half) driven by
/// node values; `control(i, stage)` returns u at node i (stage 0), the
/// midpoint (stage 1), or node i + 1 (stage 2).
template <class Rhs, class Control>
Eigen::MatrixXd rk4_integrate(Rhs&& f, Control&& control, const Eigen::VectorXd& x0, const TimeGrid& grid) {
  const double h = grid.step();
  Eigen::MatrixXd out(x0.size(), grid.node_count());
  out.col(0) = x0;
  Eigen::VectorXd x = x0;
  for (int i = 0; i < grid.steps(); ++i) {
    const Eigen::VectorXd u0 = control(i, 0);
    const Eigen::VectorXd um = control(i, 1);
    const Eigen::VectorXd u1 = control(i, 2);
    const Eigen::VectorXd k1 = f(x, u0);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1, um);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2, um);
    const Eigen::VectorXd k4 = f(x + h * k3, u1);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) {
      throw NumericalError("rk4: non-finite state at node " + std::to_string(i + 1));
    }
    out.col(i + 1) = x;
  }
  return out;
}

/// Forward rollout of the moment system under a node-sampled policy.
template <SystemModel M>
Trajectory rk4_forward(const M& model, const PolicyTable& policy, const MomentVector& m0, const TimeGrid& grid) {
  if (!(policy.grid() == grid)) throw DimensionError("rk4_forward: policy grid differs from integration grid");
  if (policy.control_dim() != model.control_dim()) throw DimensionError("rk4_forward: control dimension mismatch");
  if (m0.size() != model.state_dim()) throw DimensionError("rk4_forward: initial state dimension mismatch");
  auto control = [&](int i, int stage) -> Eigen::VectorXd {
    return stage == 0 ? policy.at(i) : stage == 1 ? policy.midpoint(i) : policy.at(i + 1);
  };
  auto f = [&](const Eigen::VectorXd& m, const Eigen::VectorXd& u) { return model.vector_field(m, u); };
  return Trajectory(grid, model.order(), model.block_dim(), rk4_integrate(f, control, m0.values(), grid));
}

/// Linear autonomous system dx/dt = A x sampled on `grid`.
inline Eigen::MatrixXd rk4_linear(const Eigen::MatrixXd& a, const Eigen::VectorXd& x0, const TimeGrid& grid) {
  auto control = [](int, int) { return Eigen::VectorXd(); };
  auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) -> Eigen::VectorXd { return a * x; };
  return rk4_integrate(f, control, x0, grid);
}

/// (deltaV, DV, D^2V) at one instant.
struct ValueExpansion {
  double delta_v = 0.0;
  Eigen::VectorXd dv;
  Eigen::MatrixXd d2v;

  ValueExpansion& operator+=(const ValueExpansion& o) {
    delta_v += o.delta_v;
    dv += o.dv;
    d2v += o.d2v;
    return *this;
  }
  friend ValueExpansion operator*(double s, ValueExpansion v) {
    v.delta_v *= s;
    v.dv *= s;
    v.d2v *= s;
    return v;
  }
  friend ValueExpansion operator+(ValueExpansion a, const ValueExpansion& b) { return a += b; }
};

/// Per-node backward-pass values. D2V is symmetric at every node.
struct BackwardPassResult {
  TimeGrid grid;
  Eigen::VectorXd delta_v;            // per node
  Eigen::MatrixXd dv;                 // n x nodes
  std::vector<Eigen::MatrixXd> d2v;   // per node, n x n

  double delta_v_sup() const { return delta_v.cwiseAbs().maxCoeff(); }
};

/// Integrates the coupled (deltaV, DV, D^2V) system from T down to t0 with
/// RK4. `rhs(m, u, y)` returns dy/dt; m and u are interpolated linearly at
/// half-steps. D^2V is symmetrized after every step.
template <class Rhs>
BackwardPassResult rk4_backward(Rhs&& rhs, const ValueExpansion& terminal, const Trajectory& trajectory,
                                const PolicyTable& policy) {
  const TimeGrid& grid = trajectory.grid();
  if (!(policy.grid() == grid)) throw DimensionError("rk4_backward: policy and trajectory grids differ");
  const Eigen::Index n = trajectory.states().rows();
  if (terminal.dv.size() != n || terminal.d2v.rows() != n || terminal.d2v.cols() != n) {
    throw DimensionError("rk4_backward: terminal condition dimension mismatch");
  }
  const int nodes = grid.node_count();
  const double h = grid.step();

  BackwardPassResult out{grid, Eigen::VectorXd(nodes), Eigen::MatrixXd(n, nodes), std::vector<Eigen::MatrixXd>(nodes)};
  ValueExpansion y = terminal;
  out.delta_v(nodes - 1) = y.delta_v;
  out.dv.col(nodes - 1) = y.dv;
  out.d2v[nodes - 1] = y.d2v;

  for (int i = nodes - 1; i > 0; --i) {
    const Eigen::VectorXd m1 = trajectory.state(i);
    const Eigen::VectorXd u1 = policy.at(i);
    const Eigen::VectorXd mm = trajectory.midpoint(i - 1);
    const Eigen::VectorXd um = policy.midpoint(i - 1);
    const Eigen::VectorXd m0 = trajectory.state(i - 1);
    const Eigen::VectorXd u0 = policy.at(i - 1);
    const ValueExpansion k1 = rhs(m1, u1, y);
    const ValueExpansion k2 = rhs(mm, um, y + (-0.5 * h) * k1);
    const ValueExpansion k3 = rhs(mm, um, y + (-0.5 * h) * k2);
    const ValueExpansion k4 = rhs(m0, u0, y + (-h) * k3);
    y += (-h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y.d2v = 0.5 * (y.d2v + y.d2v.transpose()).eval();
    if (!std::isfinite(y.delta_v) || !y.dv.allFinite() || !y.d2v.allFinite()) {
      throw NumericalError("rk4_backward: non-finite value expansion at node " + std::to_string(i - 1));
    }
    out.delta_v(i - 1) = y.delta_v;
    out.dv.col(i - 1) = y.dv;
    out.d2v[i - 1] = y.d2v;
  }
  return out;
}

/// Running reward r(m(t_i), u(t_i)) at every node.
template <SystemModel M>
Eigen::VectorXd running_rewards(const M& model, const Trajectory& trajectory, const PolicyTable& policy) {
  if (!(policy.grid() == trajectory.grid())) throw DimensionError("running_rewards: grids differ");
  const int nodes = trajectory.grid().node_count();
  Eigen::VectorXd r(nodes);
  for (int i = 0; i < nodes; ++i) r(i) = model.running_reward(trajectory.state(i), policy.at(i));
  return r;
}

/// Composite trapezoid of the running reward plus the terminal reward.
template <SystemModel M>
double cumulative_reward(const M& model, const Trajectory& trajectory, const PolicyTable& policy) {
  const Eigen::VectorXd r = running_rewards(model, trajectory, policy);
  const double h = trajectory.grid().step();
  const double integral = h * (r.sum() - 0.5 * (r(0) + r(r.size() - 1)));
  return integral + model.terminal_reward(trajectory.final_state());
}

}  // namespace momentrl
