#pragma once

// Evaluation of a learned policy on the original beta-indexed systems,
// sampled on a uniform beta grid.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "momentrl/error.hpp"
#include "momentrl/ode.hpp"
#include "momentrl/systems.hpp"

namespace momentrl {

inline constexpr int kDefaultBetaCount = 101;

struct EnsembleRun {
  Eigen::VectorXd beta_samples;
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> states;  // per beta: state_dim x nodes

  Eigen::Index state_dim() const { return states.empty() ? 0 : states.front().rows(); }
};

namespace detail {
inline Eigen::VectorXd uniform_samples(double lo, double hi, int count) {
  if (count < 2) throw DomainError("ensemble: beta_count must be >= 2");
  return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

inline auto node_control(const PolicyTable& policy) {
  return [&policy](int i, int stage) -> Eigen::VectorXd {
    return stage == 0 ? policy.at(i) : stage == 1 ? policy.midpoint(i) : policy.at(i + 1);
  };
}

/// Trapezoid mean of values sampled on a uniform grid.
inline double trapezoid_mean(const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  return (y.sum() - 0.5 * (y(0) + y(n - 1))) / static_cast<double>(n - 1);
}
}  // namespace detail

/// dx/dt = beta x + u(t), x(0) = 1, beta uniform on [-1, 1].
inline EnsembleRun simulate_linear_ensemble(const PolicyTable& policy, int beta_count, const TimeGrid& grid) {
  if (!(policy.grid() == grid)) throw DimensionError("simulate_linear_ensemble: policy grid differs");
  if (policy.control_dim() != 1) throw DimensionError("simulate_linear_ensemble: expected a scalar control");
  EnsembleRun run{detail::uniform_samples(-1.0, 1.0, beta_count), grid, {}};
  run.states.reserve(beta_count);
  for (int j = 0; j < beta_count; ++j) {
    const double beta = run.beta_samples(j);
    auto f = [beta](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
      return beta * x + u;
    };
    run.states.push_back(rk4_integrate(f, detail::node_control(policy), Eigen::VectorXd::Ones(1), grid));
  }
  return run;
}

/// dx/dt = beta (u Omega_y + v Omega_x) x from (0, 0, 1) at the given betas.
/// Policy rows are (u, v).
inline EnsembleRun simulate_bloch_at(const PolicyTable& policy, const Eigen::VectorXd& betas, const TimeGrid& grid) {
  if (!(policy.grid() == grid)) throw DimensionError("simulate_bloch_ensemble: policy grid differs");
  if (policy.control_dim() != 2) throw DimensionError("simulate_bloch_ensemble: expected controls (u, v)");
  const Eigen::Matrix3d ox = BlochMomentModel::omega_x();
  const Eigen::Matrix3d oy = BlochMomentModel::omega_y();
  EnsembleRun run{betas, grid, {}};
  run.states.reserve(betas.size());
  for (Eigen::Index j = 0; j < betas.size(); ++j) {
    const double beta = betas(j);
    auto f = [&, beta](const Eigen::VectorXd& x, const Eigen::VectorXd& c) -> Eigen::VectorXd {
      return beta * ((c(0) * oy + c(1) * ox) * x);
    };
    run.states.push_back(rk4_integrate(f, detail::node_control(policy), Eigen::Vector3d(0, 0, 1), grid));
  }
  return run;
}

/// Same, with beta uniform on [1 - delta, 1 + delta].
inline EnsembleRun simulate_bloch_ensemble(const PolicyTable& policy, double delta, int beta_count,
                                           const TimeGrid& grid) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("simulate_bloch_ensemble: delta must lie in (0, 1)");
  return simulate_bloch_at(policy, detail::uniform_samples(1.0 - delta, 1.0 + delta, beta_count), grid);
}

struct ExcitationMetrics {
  double mean_x1_final = 0.0;
  double min_x1_final = 0.0;
  Eigen::MatrixXd per_beta;         // rows: (beta, x1, x2, x3) at T
  Eigen::VectorXd mean_x1_vs_time;  // per node
};

inline ExcitationMetrics excitation_metrics(const EnsembleRun& run) {
  if (run.state_dim() != 3) throw DimensionError("excitation_metrics: needs a Bloch run");
  const Eigen::Index nb = run.beta_samples.size();
  const int nodes = run.grid.node_count();
  ExcitationMetrics out;
  out.per_beta.resize(nb, 4);
  Eigen::MatrixXd x1(nb, nodes);
  for (Eigen::Index j = 0; j < nb; ++j) {
    const Eigen::MatrixXd& s = run.states[j];
    out.per_beta(j, 0) = run.beta_samples(j);
    out.per_beta.block(j, 1, 1, 3) = s.col(nodes - 1).transpose();
    x1.row(j) = s.row(0);
  }
  out.mean_x1_vs_time.resize(nodes);
  for (int i = 0; i < nodes; ++i) out.mean_x1_vs_time(i) = detail::trapezoid_mean(x1.col(i));
  out.mean_x1_final = out.mean_x1_vs_time(nodes - 1);
  out.min_x1_final = out.per_beta.col(1).minCoeff();
  return out;
}

/// max over beta and nodes of | |x| - 1 |.
inline double sphere_drift(const EnsembleRun& run) {
  double worst = 0.0;
  for (const auto& s : run.states) {
    worst = std::max(worst, (s.colwise().norm().array() - 1.0).abs().maxCoeff());
  }
  return worst;
}

/// Trapezoid beta-average of the state at every node (state_dim x nodes).
inline Eigen::MatrixXd ensemble_mean(const EnsembleRun& run) {
  const Eigen::Index nb = run.beta_samples.size();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(run.state_dim(), run.grid.node_count());
  for (Eigen::Index j = 0; j < nb; ++j) {
    const double w = (j == 0 || j == nb - 1) ? 0.5 : 1.0;
    acc += w * run.states[j];
  }
  return acc / static_cast<double>(nb - 1);
}

/// Ensemble-average running reward int (mean_beta x^2 + u^2) dt plus mean_beta x(T)^2.
inline double linear_ensemble_reward(const EnsembleRun& run, const PolicyTable& policy) {
  const Eigen::Index nb = run.beta_samples.size();
  const int nodes = run.grid.node_count();
  Eigen::MatrixXd sq(nb, nodes);
  for (Eigen::Index j = 0; j < nb; ++j) sq.row(j) = run.states[j].row(0).array().square().matrix();
  Eigen::VectorXd r(nodes);
  for (int i = 0; i < nodes; ++i) r(i) = detail::trapezoid_mean(sq.col(i)) + policy.at(i).squaredNorm();
  const double h = run.grid.step();
  const double integral = h * (r.sum() - 0.5 * (r(0) + r(nodes - 1)));
  return integral + detail::trapezoid_mean(sq.col(nodes - 1));
}

}  // namespace momentrl
