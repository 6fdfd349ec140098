#pragma once

// Filtrated policy search: a chain of truncated problems of increasing order,
// each warm-started from the previous hierarchy's policy. The policy lives on
// the time grid, so it transfers across orders unchanged.

#include <Eigen/Dense>

#include <chrono>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "momentrl/ddp.hpp"
#include "momentrl/error.hpp"
#include "momentrl/ode.hpp"
#include "momentrl/systems.hpp"

namespace momentrl {

struct LqrProblem {
  bool exact_row0 = false;
};

struct BlochProblem {
  double delta = 0.4;
};

using Problem = std::variant<LqrProblem, BlochProblem>;

struct FrlConfig {
  int n0 = 2;
  int n_max = 10;
  double epsilon = 1e-3;
  SearchConfig search;
  TimeGrid grid{0.0, 1.0, 200};
  Problem problem = LqrProblem{};
  /// Explicit strictly increasing orders; when non-empty it replaces n0..n_max.
  std::vector<int> orders;

  void validate() const {
    if (n0 < 0) throw DomainError("FrlConfig: N0 must be >= 0");
    if (n0 > n_max) throw DomainError("FrlConfig: N0 must not exceed Nmax");
    if (!(epsilon > 0.0)) throw DomainError("FrlConfig: epsilon must be > 0");
    for (std::size_t i = 1; i < orders.size(); ++i) {
      if (orders[i] <= orders[i - 1]) throw DomainError("FrlConfig: orders must be strictly increasing");
    }
    if (!orders.empty() && orders.front() < 0) throw DomainError("FrlConfig: orders must be >= 0");
    search.validate();
  }

  std::vector<int> schedule() const {
    if (!orders.empty()) return orders;
    std::vector<int> s;
    for (int n = n0; n <= n_max; ++n) s.push_back(n);
    return s;
  }
};

struct HierarchyReport {
  int order = 0;
  int iterations = 0;
  double cost = 0.0;                // V_N(0, m_N(0)) under the returned policy
  double projection_error = 0.0;    // sup_t |V_N(t) - V_{N_prev}(t)|
  double wall_time_s = 0.0;
  bool stopped_early = false;
  PolicyTable policy;
  Trajectory trajectory;
  Eigen::VectorXd value_profile;
  IterationLog log;
};

struct FrlResult {
  std::vector<HierarchyReport> reports;
  bool converged = false;  // P <= epsilon reached before the order cap

  const HierarchyReport& last() const { return reports.back(); }
};

/// V(t_i) = \int_{t_i}^T r ds + K(m(T)) by reverse cumulative trapezoid.
template <SystemModel M>
Eigen::VectorXd value_profile(const M& model, const Trajectory& trajectory, const PolicyTable& policy) {
  const Eigen::VectorXd r = running_rewards(model, trajectory, policy);
  const double h = trajectory.grid().step();
  const Eigen::Index n = r.size();
  Eigen::VectorXd v(n);
  v(n - 1) = model.terminal_reward(trajectory.final_state());
  for (Eigen::Index i = n - 2; i >= 0; --i) v(i) = v(i + 1) + 0.5 * h * (r(i) + r(i + 1));
  return v;
}

/// Runs the hierarchy over `orders`, building each model with `make_model(N)`.
/// The first hierarchy's P is taken against V_{N_-1} = 0; the epsilon test
/// applies from the second hierarchy on.
template <class Factory>
FrlResult run_frl(Factory&& make_model, const std::vector<int>& orders, double epsilon,
                  const SearchConfig& search, const TimeGrid& grid, Eigen::Index control_dim) {
  using Clock = std::chrono::steady_clock;
  FrlResult result;
  PolicyTable policy = PolicyTable::zeros(grid, control_dim);
  Eigen::VectorXd previous;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const auto start = Clock::now();
    const auto model = make_model(orders[i]);
    SearchResult sr = policy_search(model, policy, model.initial_state(), search);
    HierarchyReport rep;
    rep.order = orders[i];
    rep.iterations = static_cast<int>(sr.log.size());
    rep.cost = sr.cost;
    rep.stopped_early = sr.stopped_early;
    rep.value_profile = value_profile(model, sr.trajectory, sr.policy);
    rep.projection_error = previous.size() == 0 ? rep.value_profile.cwiseAbs().maxCoeff()
                                                : (rep.value_profile - previous).cwiseAbs().maxCoeff();
    rep.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    rep.policy = sr.policy;
    rep.trajectory = std::move(sr.trajectory);
    rep.log = std::move(sr.log);
    previous = rep.value_profile;
    policy = std::move(sr.policy);
    const bool done = i >= 1 && rep.projection_error <= epsilon;
    result.reports.push_back(std::move(rep));
    if (done) {
      result.converged = true;
      break;
    }
  }
  return result;
}

inline FrlResult run_frl(const FrlConfig& config) {
  config.validate();
  const std::vector<int> orders = config.schedule();
  return std::visit(
      [&](const auto& problem) -> FrlResult {
        using P = std::decay_t<decltype(problem)>;
        if constexpr (std::is_same_v<P, LqrProblem>) {
          return run_frl([&](int n) { return build_lqr(n, problem.exact_row0); }, orders, config.epsilon,
                         config.search, config.grid, 1);
        } else {
          return run_frl([&](int n) { return build_bloch(n, problem.delta); }, orders, config.epsilon,
                         config.search, config.grid, 2);
        }
      },
      config.problem);
}

}  // namespace momentrl
