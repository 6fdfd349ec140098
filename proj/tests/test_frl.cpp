#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "momentrl/frl.hpp"

using namespace momentrl;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FrlConfig lqr_chain(int n0, int n_max, double eta) {
  FrlConfig c;
  c.n0 = n0;
  c.n_max = n_max;
  c.epsilon = 1e-12;
  c.search.eta = eta;
  c.search.max_iters = 50;
  return c;
}

}  // namespace

TEST(ValueProfile, OrderZeroClosedForm) {
  const LqrMomentModel model(0);
  const TimeGrid grid(0.0, 1.0, 200);
  const PolicyTable u = PolicyTable::zeros(grid, 1);
  const Trajectory traj = rk4_forward(model, u, model.initial_state(), grid);
  const Eigen::VectorXd v = value_profile(model, traj, u);
  for (int i = 0; i < grid.node_count(); ++i) EXPECT_NEAR(v(i), 4.0 * (1.0 - grid.node(i)) + 4.0, 1e-12);
}

TEST(ValueProfile, EndpointsMatchRewards) {
  const BlochMomentModel model(3, 0.4);
  const TimeGrid grid(0.0, 1.0, 100);
  const PolicyTable u = PolicyTable::constant(grid, Eigen::Vector2d(-1.2, 0.2));
  const Trajectory traj = rk4_forward(model, u, model.initial_state(), grid);
  const Eigen::VectorXd v = value_profile(model, traj, u);
  EXPECT_DOUBLE_EQ(v(grid.steps()), model.terminal_reward(traj.final_state()));
  EXPECT_NEAR(v(0), cumulative_reward(model, traj, u), 1e-12);
}

TEST(Frl, SingleHierarchyUsesZeroConvention) {
  FrlConfig c = lqr_chain(4, 4, 1.0);
  c.epsilon = 1e-3;
  const FrlResult r = run_frl(c);
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_DOUBLE_EQ(r.reports[0].projection_error, r.reports[0].value_profile.cwiseAbs().maxCoeff());
  EXPECT_FALSE(r.converged);
}

TEST(Frl, EpsilonStopsTheChain) {
  FrlConfig c = lqr_chain(2, 10, 1.0);
  c.epsilon = 1e-3;
  const FrlResult r = run_frl(c);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.last().projection_error, 1e-3);
  EXPECT_LT(r.reports.size(), 9u);
  for (std::size_t i = 0; i + 1 < r.reports.size(); ++i) EXPECT_GT(r.reports[i].projection_error, 1e-3);
}

TEST(Frl, ReportsAreConsistent) {
  const FrlResult r = run_frl(lqr_chain(2, 6, 1.0));
  ASSERT_EQ(r.reports.size(), 5u);
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    const auto& h = r.reports[i];
    EXPECT_EQ(h.order, 2 + static_cast<int>(i));
    EXPECT_GE(h.projection_error, 0.0);
    EXPECT_LE(h.iterations, 50);
    EXPECT_EQ(static_cast<std::size_t>(h.iterations), h.log.size());
    EXPECT_NEAR(h.value_profile(0), h.cost, 1e-12);
  }
}

TEST(Frl, ExplicitOrders) {
  FrlConfig c = lqr_chain(0, 0, 1.0);
  c.orders = {1, 3, 7};
  const FrlResult r = run_frl(c);
  ASSERT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.reports[2].order, 7);
  c.orders = {3, 3};
  EXPECT_THROW(run_frl(c), DomainError);
}

TEST(Frl, ConfigValidation) {
  FrlConfig c;
  c.n0 = 5;
  c.n_max = 4;
  EXPECT_THROW(c.validate(), DomainError);
  c = FrlConfig{};
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Frl, ProjectionErrorsSettleOnLqr) {
  // P alternates between odd and even orders instead of decreasing every
  // step; each parity subsequence decreases and all of P is below 1e-2 from
  // N = 7 on.
  const FrlResult r = run_frl(lqr_chain(2, 12, 1.0));
  ASSERT_EQ(r.reports.size(), 11u);
  for (const auto& h : r.reports) {
    if (h.order >= 7) EXPECT_LT(h.projection_error, 1e-2) << "N=" << h.order;
  }
  for (std::size_t i = 2; i < r.reports.size(); ++i) {
    if (r.reports[i].order >= 6) {
      EXPECT_LT(r.reports[i].projection_error, r.reports[i - 2].projection_error) << "N=" << r.reports[i].order;
    }
  }
}

TEST(Frl, ConvergedCostsAcrossOrders) {
  // With eta = inf each hierarchy reaches its own optimum. The optimal
  // truncated cost is not monotone in N (the N = 0 -> 1 step goes up, the
  // 1 -> 2 step goes down), but the sequence settles: successive changes
  // stay under 1% from N = 5 on.
  const FrlResult r = run_frl(lqr_chain(0, 8, kInf));
  std::vector<double> cost;
  for (const auto& h : r.reports) cost.push_back(h.cost);
  EXPECT_GT(cost[1], cost[0]);
  EXPECT_LT(cost[2], cost[1]);
  for (int n = 5; n <= 8; ++n) EXPECT_LT(std::abs(cost[n] - cost[n - 1]) / cost[n], 1e-2) << "N=" << n;
}

TEST(Frl, WarmStartNoWorseThanColdStart) {
  const FrlResult warm = run_frl(lqr_chain(2, 6, kInf));
  for (const auto& h : warm.reports) {
    FrlConfig cold = lqr_chain(h.order, h.order, kInf);
    const double cold_cost = run_frl(cold).last().cost;
    EXPECT_LE(h.cost, cold_cost + 1e-6) << "N=" << h.order;
  }
}

TEST(Frl, BlochChainRuns) {
  FrlConfig c;
  c.n0 = 1;
  c.n_max = 3;
  c.epsilon = 1e-12;
  c.problem = BlochProblem{0.4};
  c.search.max_iters = 10;
  const FrlResult r = run_frl(c);
  ASSERT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.last().policy.control_dim(), 2);
  const BlochMomentModel model(3, 0.4);
  EXPECT_LT(r.last().cost, model.terminal_reward(model.initial_state().values()));
}
