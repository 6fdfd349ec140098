#pragma once

// Second-order policy search on a truncated moment system.
//
// One iteration: roll the nominal policy forward, integrate (deltaV, DV, D^2V)
// backward along the nominal, replace the policy by the node-wise Hamiltonian
// minimizer, roll out again. The search stops early once the predicted value
// variation sup_t |deltaV| exceeds eta.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "momentrl/error.hpp"
#include "momentrl/ode.hpp"
#include "momentrl/systems.hpp"

namespace momentrl {

struct SearchConfig {
  double eta = 1.0;              // value-variation threshold for early stopping
  int max_iters = 50;            // K
  double hessian_floor = 1e-10;  // minimum eigenvalue allowed on d^2H/du^2
  double damping = 1.0;          // u <- u + damping (u_tilde - u), in (0, 1]
  /// Conventional stop when sup|deltaV| <= tol. Off by default; only the
  /// oracle comparisons use it.
  std::optional<double> converge_tol;

  void validate() const {
    if (!(eta > 0.0)) throw DomainError("SearchConfig: eta must be > 0");
    if (max_iters < 1) throw DomainError("SearchConfig: max_iters must be >= 1");
    if (!(hessian_floor >= 0.0)) throw DomainError("SearchConfig: hessian_floor must be >= 0");
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("SearchConfig: damping must lie in (0, 1]");
  }
};

struct IterationRecord {
  double cost = 0.0;                 // cost of the improved policy
  double delta_v_sup = 0.0;          // sup_t |deltaV| along the nominal
  double control_update_norm = 0.0;  // max over nodes of |u_new - u_old|
};

using IterationLog = std::vector<IterationRecord>;

struct SearchResult {
  PolicyTable policy;
  Trajectory trajectory;
  double cost = 0.0;
  double initial_cost = 0.0;
  IterationLog log;
  bool stopped_early = false;
};

/// Right-hand side of the backward (deltaV, DV, D^2V) system at (m, u),
/// with u_tilde = argmin_a H(m, a, DV):
///   d deltaV/dt = H(m, u, DV) - H(m, u_tilde, DV)
///   d DV/dt     = -DH - D^2V (F(m, u_tilde) - F(m, u))
///   d D^2V/dt   = -D^2H - DF' D^2V - D^2V DF + Q' (H_uu)^{-1} Q,
///   Q = (dDH/du)' + (dF/du)' D^2V,
/// everything but the first H evaluated at (m, u_tilde, DV).
template <SystemModel M>
class BackwardRhs {
 public:
  BackwardRhs(const M& model, double hessian_floor) : model_(model), floor_(hessian_floor) {}

  ValueExpansion operator()(const Eigen::VectorXd& m, const Eigen::VectorXd& u, const ValueExpansion& y) const {
    const Eigen::VectorXd& dv = y.dv;
    const Eigen::MatrixXd& d2v = y.d2v;
    const Eigen::VectorXd u_tilde = model_.argmin_hamiltonian(m, dv);
    const HamiltonianExpansion e = model_.expand_hamiltonian(m, u_tilde, dv);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e.d2h_du2, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < floor_) {
      throw NumericalError("backward_pass: d2H/du2 minimum eigenvalue " +
                           std::to_string(eig.eigenvalues().minCoeff()) + " below floor");
    }

    ValueExpansion dy;
    dy.delta_v = hamiltonian(model_, m, u, dv) - hamiltonian(model_, m, u_tilde, dv);
    dy.dv = -e.dh_dm - d2v * (model_.vector_field(m, u_tilde) - model_.vector_field(m, u));
    const Eigen::MatrixXd q = e.d2h_dmdu.transpose() + e.df_du.transpose() * d2v;
    dy.d2v = -e.d2h_dm2 - e.df_dm.transpose() * d2v - d2v * e.df_dm + q.transpose() * e.d2h_du2.ldlt().solve(q);
    return dy;
  }

 private:
  const M& model_;
  double floor_;
};

template <SystemModel M>
BackwardPassResult backward_pass(const M& model, const Trajectory& trajectory, const PolicyTable& policy,
                                 double hessian_floor = 1e-10) {
  const Eigen::VectorXd m_final = trajectory.final_state();
  const ValueExpansion terminal{0.0, model.terminal_gradient(m_final), model.terminal_hessian(m_final)};
  return rk4_backward(BackwardRhs<M>(model, hessian_floor), terminal, trajectory, policy);
}

/// Node-wise minimizer u(t_i) = argmin_a H(m(t_i), a, DV(t_i)).
template <SystemModel M>
PolicyTable improve_policy(const M& model, const Trajectory& trajectory, const BackwardPassResult& bp) {
  if (!(bp.grid == trajectory.grid())) throw DimensionError("improve_policy: backward pass grid differs");
  const int nodes = trajectory.grid().node_count();
  Eigen::MatrixXd controls(model.control_dim(), nodes);
  for (int i = 0; i < nodes; ++i) controls.col(i) = model.argmin_hamiltonian(trajectory.state(i), bp.dv.col(i));
  return PolicyTable(trajectory.grid(), std::move(controls));
}

/// Early-stopped second-order policy search. Each logged iteration applies
/// one improvement; the returned policy is the last one rolled out.
template <SystemModel M>
SearchResult policy_search(const M& model, const PolicyTable& initial_policy, const MomentVector& m0,
                           const SearchConfig& config) {
  config.validate();
  const TimeGrid& grid = initial_policy.grid();
  SearchResult result;
  result.policy = initial_policy;
  result.trajectory = rk4_forward(model, result.policy, m0, grid);
  result.cost = cumulative_reward(model, result.trajectory, result.policy);
  result.initial_cost = result.cost;

  while (static_cast<int>(result.log.size()) < config.max_iters) {
    const BackwardPassResult bp = backward_pass(model, result.trajectory, result.policy, config.hessian_floor);
    PolicyTable next = improve_policy(model, result.trajectory, bp);
    if (config.damping != 1.0) {
      next.controls() = result.policy.controls() + config.damping * (next.controls() - result.policy.controls());
    }
    IterationRecord rec;
    rec.delta_v_sup = bp.delta_v_sup();
    rec.control_update_norm = (next.controls() - result.policy.controls()).colwise().norm().maxCoeff();

    result.policy = std::move(next);
    result.trajectory = rk4_forward(model, result.policy, m0, grid);
    result.cost = cumulative_reward(model, result.trajectory, result.policy);
    rec.cost = result.cost;
    result.log.push_back(rec);

    if (rec.delta_v_sup > config.eta) {
      result.stopped_early = true;
      break;
    }
    if (config.converge_tol && rec.delta_v_sup <= *config.converge_tol) break;
  }
  return result;
}

/// Max over nodes of |dH/du| at the given policy, with DV from a backward
/// pass along the policy's own trajectory.
template <SystemModel M>
double hamiltonian_stationarity(const M& model, const Trajectory& trajectory, const PolicyTable& policy,
                                const BackwardPassResult& bp) {
  double worst = 0.0;
  for (int i = 0; i < trajectory.grid().node_count(); ++i) {
    const Eigen::VectorXd m = trajectory.state(i);
    const Eigen::VectorXd u = policy.at(i);
    const Eigen::VectorXd dv = bp.dv.col(i);
    worst = std::max(worst, model.expand_hamiltonian(m, u, dv).dh_du.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace momentrl
