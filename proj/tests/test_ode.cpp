#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>

#include "momentrl/ode.hpp"
#include "momentrl/systems.hpp"

using namespace momentrl;

namespace {

double final_error(const Eigen::MatrixXd& a, const Eigen::VectorXd& x0, double horizon, int steps) {
  const Eigen::MatrixXd traj = rk4_linear(a, x0, TimeGrid(0.0, horizon, steps));
  const Eigen::VectorXd exact = (a * horizon).exp() * x0;
  return (traj.col(steps) - exact).norm();
}

}  // namespace

TEST(TimeGridTest, NodesAndValidation) {
  const TimeGrid g(0.0, 1.0, 200);
  EXPECT_EQ(g.node_count(), 201);
  EXPECT_DOUBLE_EQ(g.step(), 0.005);
  EXPECT_DOUBLE_EQ(g.node(200), 1.0);
  EXPECT_DOUBLE_EQ(g.nodes()(100), 0.5);
  EXPECT_THROW(TimeGrid(1.0, 1.0, 10), DomainError);
  EXPECT_THROW(TimeGrid(0.0, 1.0, 0), DomainError);
}

TEST(PolicyTableTest, LinearInterpolation) {
  const TimeGrid g(0.0, 1.0, 4);
  Eigen::MatrixXd c(1, 5);
  c << 0, 1, 2, 3, 4;
  const PolicyTable p(g, c);
  EXPECT_DOUBLE_EQ(p.eval(0.375)(0), 1.5);
  EXPECT_DOUBLE_EQ(p.midpoint(2)(0), 2.5);
  EXPECT_DOUBLE_EQ(p.eval(-1.0)(0), 0.0);
  EXPECT_DOUBLE_EQ(p.eval(2.0)(0), 4.0);
}

TEST(Rk4, FourthOrderAgainstMatrixExponential) {
  Eigen::MatrixXd a(3, 3);
  a << 0.0, 1.0, 0.0, -2.0, -0.3, 1.0, 0.5, 0.0, -1.0;
  const Eigen::Vector3d x0(1.0, -0.5, 2.0);
  for (int steps : {8, 16, 32}) {
    const double ratio = final_error(a, x0, 1.0, steps) / final_error(a, x0, 1.0, 2 * steps);
    EXPECT_GE(ratio, 12.0) << "steps=" << steps;
    EXPECT_LE(ratio, 20.0) << "steps=" << steps;
  }
}

TEST(Rk4, FourthOrderOnMomentDrift) {
  const LqrMomentModel model(6);
  const Eigen::VectorXd x0 = model.initial_state().values();
  const double ratio = final_error(model.drift(), x0, 2.0, 10) / final_error(model.drift(), x0, 2.0, 20);
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Rk4, ForwardWithConstantControlMatchesAugmentedExponential) {
  // dm/dt = A m + B u with u constant is linear in (m, u)
  const LqrMomentModel model(3);
  const TimeGrid grid(0.0, 1.0, 200);
  const PolicyTable policy = PolicyTable::constant(grid, Eigen::VectorXd::Constant(1, 0.7));
  const Trajectory traj = rk4_forward(model, policy, model.initial_state(), grid);
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(5, 5);
  aug.topLeftCorner(4, 4) = model.drift();
  aug.block(0, 4, 4, 1) = model.input();
  Eigen::VectorXd z0(5);
  z0 << model.initial_state().values(), 0.7;
  const Eigen::VectorXd exact = aug.exp() * z0;
  EXPECT_LE((traj.final_state() - exact.head(4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rk4, ForwardChecksShapes) {
  const LqrMomentModel model(3);
  const TimeGrid grid(0.0, 1.0, 10);
  EXPECT_THROW(rk4_forward(model, PolicyTable::zeros(TimeGrid(0.0, 1.0, 20), 1), model.initial_state(), grid),
               DimensionError);
  EXPECT_THROW(rk4_forward(model, PolicyTable::zeros(grid, 2), model.initial_state(), grid), DimensionError);
  EXPECT_THROW(rk4_forward(model, PolicyTable::zeros(grid, 1), LqrMomentModel(2).initial_state(), grid),
               DimensionError);
}

TEST(Rk4, BlowUpIsReported) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(1, 1, 1e200);
  EXPECT_THROW(rk4_linear(a, Eigen::VectorXd::Ones(1), TimeGrid(0.0, 1e200, 1)), NumericalError);
}

TEST(Rk4, BackwardIntegratesLinearAdjoint) {
  // dv/dt = -v, d2v/dt = 0, ddelta/dt = 1 from (0, 1, I) at T = 1
  const TimeGrid grid(0.0, 1.0, 50);
  const Trajectory traj(grid, 0, 1, Eigen::MatrixXd::Zero(1, grid.node_count()));
  const PolicyTable policy = PolicyTable::zeros(grid, 1);
  auto rhs = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const ValueExpansion& y) {
    return ValueExpansion{1.0, -y.dv, Eigen::MatrixXd::Zero(1, 1)};
  };
  const ValueExpansion terminal{0.0, Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1)};
  const BackwardPassResult bp = rk4_backward(rhs, terminal, traj, policy);
  EXPECT_NEAR(bp.delta_v(0), -1.0, 1e-14);
  EXPECT_NEAR(bp.dv(0, 0), std::exp(1.0), 1e-8);  // RK4 error ~ e h^4 / 120
  EXPECT_DOUBLE_EQ(bp.d2v[0](0, 0), 1.0);
  EXPECT_NEAR(bp.delta_v_sup(), 1.0, 1e-14);
}

TEST(Rewards, TrapezoidOnConstantIntegrand) {
  // N = 0: A = 0, m stays at 2, r = 4, K = 4
  const LqrMomentModel model(0);
  const TimeGrid grid(0.0, 1.0, 200);
  const PolicyTable policy = PolicyTable::zeros(grid, 1);
  const Trajectory traj = rk4_forward(model, policy, model.initial_state(), grid);
  EXPECT_NEAR(cumulative_reward(model, traj, policy), 8.0, 1e-12);
}
