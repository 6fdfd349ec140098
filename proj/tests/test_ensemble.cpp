#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "momentrl/basis.hpp"
#include "momentrl/ensemble.hpp"

using namespace momentrl;

namespace {

const TimeGrid kGrid(0.0, 1.0, 200);

PolicyTable ramp(const TimeGrid& grid) {
  Eigen::MatrixXd c(1, grid.node_count());
  for (int i = 0; i < grid.node_count(); ++i) c(0, i) = -1.5 + grid.node(i) * grid.node(i);
  return PolicyTable(grid, c);
}

}  // namespace

TEST(LinearEnsemble, FreeResponse) {
  const EnsembleRun run = simulate_linear_ensemble(PolicyTable::zeros(kGrid, 1), 11, kGrid);
  for (int j = 0; j < 11; ++j) {
    const double beta = run.beta_samples(j);
    EXPECT_LE(std::abs(run.states[j](0, kGrid.steps()) - std::exp(beta)) / std::exp(beta), 1e-9);
  }
}

TEST(LinearEnsemble, PureIntegratorAtZero) {
  const EnsembleRun run = simulate_linear_ensemble(PolicyTable::constant(kGrid, Eigen::VectorXd::Ones(1)), 3, kGrid);
  ASSERT_DOUBLE_EQ(run.beta_samples(1), 0.0);
  EXPECT_NEAR(run.states[1](0, kGrid.steps()), 2.0, 1e-13);
}

TEST(LinearEnsemble, RejectsBadInput) {
  EXPECT_THROW(simulate_linear_ensemble(PolicyTable::zeros(kGrid, 1), 1, kGrid), DomainError);
  EXPECT_THROW(simulate_linear_ensemble(PolicyTable::zeros(kGrid, 2), 5, kGrid), DimensionError);
}

TEST(LinearEnsemble, MeanMatchesZerothMomentWithExactCoupling) {
  // mean over beta of x(t, .) = m_0(t) / 2 on [-1, 1]
  const LqrMomentModel model(12, true);
  const PolicyTable u = ramp(kGrid);
  const Trajectory traj = rk4_forward(model, u, model.initial_state(), kGrid);
  const Eigen::MatrixXd mean = ensemble_mean(simulate_linear_ensemble(u, 101, kGrid));
  double worst = 0.0;
  for (int i = 0; i < kGrid.node_count(); ++i) worst = std::max(worst, std::abs(mean(0, i) - 0.5 * traj.state(i)(0)));
  EXPECT_LE(worst, 1e-2);
}

TEST(LinearEnsemble, RewardMatchesGramWeightedMomentReward) {
  // mean_beta x^2 = m' G^{-1} m / 2 when x(t, .) lies in span{T_0..T_N}
  const int order = 12;
  const LqrMomentModel model(order, true);
  const PolicyTable u = ramp(kGrid);
  const Trajectory traj = rk4_forward(model, u, model.initial_state(), kGrid);
  const Eigen::LDLT<Eigen::MatrixXd> gram(basis::gram_matrix(order));
  Eigen::VectorXd r(kGrid.node_count());
  for (int i = 0; i < kGrid.node_count(); ++i) {
    const Eigen::VectorXd m = traj.state(i);
    r(i) = 0.5 * m.dot(gram.solve(m)) + u.at(i).squaredNorm();
  }
  const double h = kGrid.step();
  const Eigen::VectorXd mt = traj.final_state();
  const double moment_reward = h * (r.sum() - 0.5 * (r(0) + r(r.size() - 1))) + 0.5 * mt.dot(gram.solve(mt));
  const double ensemble_reward = linear_ensemble_reward(simulate_linear_ensemble(u, 101, kGrid), u);
  EXPECT_LE(std::abs(moment_reward - ensemble_reward) / ensemble_reward, 1e-2);
}

TEST(BlochEnsemble, QuarterTurnAtUnitBeta) {
  const PolicyTable u = PolicyTable::constant(kGrid, Eigen::Vector2d(-std::numbers::pi / 2, 0.0));
  const EnsembleRun run = simulate_bloch_ensemble(u, 0.4, 3, kGrid);
  ASSERT_DOUBLE_EQ(run.beta_samples(1), 1.0);
  EXPECT_LE((run.states[1].col(kGrid.steps()) - Eigen::Vector3d(1, 0, 0)).cwiseAbs().maxCoeff(), 1e-8);
  // the opposite sign turns toward (-1, 0, 0)
  const PolicyTable w = PolicyTable::constant(kGrid, Eigen::Vector2d(std::numbers::pi / 2, 0.0));
  const EnsembleRun back = simulate_bloch_ensemble(w, 0.4, 3, kGrid);
  EXPECT_LE((back.states[1].col(kGrid.steps()) - Eigen::Vector3d(-1, 0, 0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BlochEnsemble, ZeroControlStaysPut) {
  const EnsembleRun run = simulate_bloch_ensemble(PolicyTable::zeros(kGrid, 2), 0.4, 21, kGrid);
  for (const auto& s : run.states) {
    for (int i = 0; i < kGrid.node_count(); ++i) EXPECT_EQ(s.col(i), Eigen::Vector3d(0, 0, 1));
  }
  EXPECT_DOUBLE_EQ(excitation_metrics(run).mean_x1_final, 0.0);
}

TEST(BlochEnsemble, NormDriftUnderRandomControls) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-std::numbers::pi / 2, std::numbers::pi / 2);
  Eigen::MatrixXd c(2, kGrid.node_count());
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = U(rng);
  const EnsembleRun run = simulate_bloch_ensemble(PolicyTable(kGrid, c), 0.4, 51, kGrid);
  EXPECT_LE(sphere_drift(run), 1e-8);
}

TEST(BlochEnsemble, RejectsBadDelta) {
  EXPECT_THROW(simulate_bloch_ensemble(PolicyTable::zeros(kGrid, 2), 1.2, 11, kGrid), DomainError);
  EXPECT_THROW(simulate_bloch_ensemble(PolicyTable::zeros(kGrid, 2), 0.4, 1, kGrid), DomainError);
}

TEST(Excitation, AllAtTarget) {
  EnsembleRun run{Eigen::VectorXd::LinSpaced(5, 0.6, 1.4), kGrid, {}};
  for (int j = 0; j < 5; ++j) {
    Eigen::MatrixXd s(3, kGrid.node_count());
    s.colwise() = Eigen::Vector3d(1, 0, 0);
    run.states.push_back(s);
  }
  const ExcitationMetrics m = excitation_metrics(run);
  EXPECT_DOUBLE_EQ(m.mean_x1_final, 1.0);
  EXPECT_DOUBLE_EQ(m.min_x1_final, 1.0);
  EXPECT_EQ(m.per_beta.rows(), 5);
  EXPECT_DOUBLE_EQ(m.per_beta(4, 0), 1.4);
}

TEST(Excitation, TrapezoidWeights) {
  // x1(T, beta) = beta on [0.6, 1.4]: trapezoid is exact for linear data
  EnsembleRun run{Eigen::VectorXd::LinSpaced(4, 0.6, 1.4), kGrid, {}};
  for (int j = 0; j < 4; ++j) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, kGrid.node_count());
    s.row(0).setConstant(run.beta_samples(j));
    run.states.push_back(s);
  }
  EXPECT_NEAR(excitation_metrics(run).mean_x1_final, 1.0, 1e-15);
}

TEST(Excitation, BetaResolutionStable) {
  Eigen::MatrixXd c(2, kGrid.node_count());
  for (int i = 0; i < kGrid.node_count(); ++i) {
    c(0, i) = -1.4 - std::sin(3.0 * kGrid.node(i));
    c(1, i) = 0.4 * std::cos(2.0 * kGrid.node(i));
  }
  const PolicyTable u(kGrid, c);
  const double coarse = excitation_metrics(simulate_bloch_ensemble(u, 0.4, 101, kGrid)).mean_x1_final;
  const double fine = excitation_metrics(simulate_bloch_ensemble(u, 0.4, 201, kGrid)).mean_x1_final;
  EXPECT_LE(std::abs(coarse - fine), 1e-4);
}
