#pragma once

// Truncated moment systems behind a common model contract.
//
// A model exposes the closed-form pieces the forward rollout and the
// second-order backward pass need: the vector field, running and terminal
// rewards with exact derivatives, the Hamiltonian minimizer, and the
// Hamiltonian expansion around (m, u, DV).

#include <Eigen/Dense>

#include <concepts>
#include <string>

#include "momentrl/basis.hpp"
#include "momentrl/error.hpp"
#include "momentrl/moment_vector.hpp"

namespace momentrl {

/// Derivatives of H(m, u, p) = r(m, u) + <p, F(m, u)> at a point.
/// n = state dimension, r = control dimension.
struct HamiltonianExpansion {
  Eigen::VectorXd dh_du;     // dH/du, r
  Eigen::VectorXd dh_dm;     // DH, n
  Eigen::MatrixXd d2h_dm2;   // D^2 H, n x n
  Eigen::MatrixXd df_dm;     // DF, n x n
  Eigen::MatrixXd df_du;     // dF/du, n x r
  Eigen::MatrixXd d2h_dmdu;  // d(DH)/du, n x r
  Eigen::MatrixXd d2h_du2;   // d^2 H / du^2, r x r
};

template <class M>
concept SystemModel = requires(const M& model, const Eigen::VectorXd& m, const Eigen::VectorXd& u) {
  { model.order() } -> std::convertible_to<int>;
  { model.block_dim() } -> std::convertible_to<int>;
  { model.state_dim() } -> std::convertible_to<Eigen::Index>;
  { model.control_dim() } -> std::convertible_to<Eigen::Index>;
  { model.initial_state() } -> std::convertible_to<MomentVector>;
  { model.vector_field(m, u) } -> std::convertible_to<Eigen::VectorXd>;
  { model.running_reward(m, u) } -> std::convertible_to<double>;
  { model.terminal_reward(m) } -> std::convertible_to<double>;
  { model.terminal_gradient(m) } -> std::convertible_to<Eigen::VectorXd>;
  { model.terminal_hessian(m) } -> std::convertible_to<Eigen::MatrixXd>;
  { model.argmin_hamiltonian(m, u) } -> std::convertible_to<Eigen::VectorXd>;
  { model.expand_hamiltonian(m, u, u) } -> std::convertible_to<HamiltonianExpansion>;
};

template <SystemModel M>
double hamiltonian(const M& model, const Eigen::VectorXd& m, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& dv) {
  return model.running_reward(m, u) + dv.dot(model.vector_field(m, u));
}

namespace detail {
inline void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected size " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Linear ensemble  dx/dt = beta x + u,  beta in [-1, 1].
//
// Moment system dm/dt = A m + B u with A = (L + R) / 2 truncated to order N,
// B = (b_0, ..., b_N). Reward ||m||^2 + 2u^2, terminal ||m||^2.
// ---------------------------------------------------------------------------
class LqrMomentModel {
 public:
  static constexpr double kStateWeight = 1.0;
  static constexpr double kControlWeight = 2.0;
  static constexpr double kTerminalWeight = 1.0;

  /// exact_row0 replaces the first-row coupling 1/2 with 1 (beta T_0 = T_1).
  explicit LqrMomentModel(int order, bool exact_row0 = false)
      : order_(order), exact_row0_(exact_row0) {
    if (order < 0) throw DomainError("build_lqr: order must be >= 0");
    const int n = order + 1;
    drift_ = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) {
      drift_(k, k + 1) = 0.5;
      drift_(k + 1, k) = 0.5;
    }
    if (exact_row0 && n > 1) drift_(0, 1) = 1.0;
    input_ = basis::basis_integrals(order);
    initial_ = basis::constant_moments(Eigen::VectorXd::Ones(1), basis::BasisSpec::canonical(order));
  }

  int order() const noexcept { return order_; }
  int block_dim() const noexcept { return 1; }
  Eigen::Index state_dim() const noexcept { return order_ + 1; }
  Eigen::Index control_dim() const noexcept { return 1; }
  bool exact_row0() const noexcept { return exact_row0_; }

  const Eigen::MatrixXd& drift() const noexcept { return drift_; }
  const Eigen::VectorXd& input() const noexcept { return input_; }

  /// Moments of x_0 = 1 on [-1, 1], i.e. (b_0, ..., b_N).
  const MomentVector& initial_state() const noexcept { return initial_; }

  Eigen::VectorXd vector_field(const Eigen::VectorXd& m, const Eigen::VectorXd& u) const {
    check(m, u);
    return drift_ * m + input_ * u(0);
  }

  double running_reward(const Eigen::VectorXd& m, const Eigen::VectorXd& u) const {
    check(m, u);
    return kStateWeight * m.squaredNorm() + kControlWeight * u(0) * u(0);
  }

  double terminal_reward(const Eigen::VectorXd& m) const {
    detail::require_size(m.size(), state_dim(), "LqrMomentModel state");
    return kTerminalWeight * m.squaredNorm();
  }
  Eigen::VectorXd terminal_gradient(const Eigen::VectorXd& m) const {
    detail::require_size(m.size(), state_dim(), "LqrMomentModel state");
    return 2.0 * kTerminalWeight * m;
  }
  Eigen::MatrixXd terminal_hessian(const Eigen::VectorXd& m) const {
    detail::require_size(m.size(), state_dim(), "LqrMomentModel state");
    return 2.0 * kTerminalWeight * Eigen::MatrixXd::Identity(state_dim(), state_dim());
  }

  /// u = -<DV, B> / 4.
  Eigen::VectorXd argmin_hamiltonian(const Eigen::VectorXd& m, const Eigen::VectorXd& dv) const {
    detail::require_size(m.size(), state_dim(), "LqrMomentModel state");
    detail::require_size(dv.size(), state_dim(), "LqrMomentModel DV");
    Eigen::VectorXd u(1);
    u(0) = -dv.dot(input_) / (2.0 * kControlWeight);
    return u;
  }

  HamiltonianExpansion expand_hamiltonian(const Eigen::VectorXd& m, const Eigen::VectorXd& u,
                                          const Eigen::VectorXd& dv) const {
    check(m, u);
    detail::require_size(dv.size(), state_dim(), "LqrMomentModel DV");
    const Eigen::Index n = state_dim();
    HamiltonianExpansion e;
    e.dh_du = Eigen::VectorXd::Constant(1, 2.0 * kControlWeight * u(0) + dv.dot(input_));
    e.dh_dm = 2.0 * kStateWeight * m + drift_.transpose() * dv;
    e.d2h_dm2 = 2.0 * kStateWeight * Eigen::MatrixXd::Identity(n, n);
    e.df_dm = drift_;
    e.df_du = input_;
    e.d2h_dmdu = Eigen::MatrixXd::Zero(n, 1);
    e.d2h_du2 = Eigen::MatrixXd::Constant(1, 1, 2.0 * kControlWeight);
    return e;
  }

 private:
  void check(const Eigen::VectorXd& m, const Eigen::VectorXd& u) const {
    detail::require_size(m.size(), state_dim(), "LqrMomentModel state");
    detail::require_size(u.size(), 1, "LqrMomentModel control");
  }

  int order_;
  bool exact_row0_;
  Eigen::MatrixXd drift_;
  Eigen::VectorXd input_;
  MomentVector initial_;
};

inline LqrMomentModel build_lqr(int order, bool exact_row0 = false) {
  return LqrMomentModel(order, exact_row0);
}

// ---------------------------------------------------------------------------
// Bloch ensemble  dx/dt = beta (u Omega_y + v Omega_x) x,  beta in [1-d, 1+d].
//
// With eta = (beta - 1) / d the moments obey dm/dt = (u B_y + v B_x) m,
// B_* = S (x) Omega_*,  S = (d/2)(L + R) + I. Controls (u, v); reward
// u^2 + v^2; terminal ||m - m_F||^2.
// ---------------------------------------------------------------------------
class BlochMomentModel {
 public:
  static Eigen::Matrix3d omega_x() {
    Eigen::Matrix3d o;
    o << 0, 0, 0, 0, 0, 1, 0, -1, 0;
    return o;
  }
  static Eigen::Matrix3d omega_y() {
    Eigen::Matrix3d o;
    o << 0, 0, -1, 0, 0, 0, 1, 0, 0;
    return o;
  }

  BlochMomentModel(int order, double delta) : order_(order), delta_(delta) {
    if (order < 0) throw DomainError("build_bloch: order must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) {
      throw DomainError("build_bloch: delta must lie in (0, 1), got " + std::to_string(delta));
    }
    const int n = order + 1;
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
    for (int k = 0; k + 1 < n; ++k) {
      s(k, k + 1) = 0.5 * delta;
      s(k + 1, k) = 0.5 * delta;
    }
    gen_x_ = kron3(s, omega_x());
    gen_y_ = kron3(s, omega_y());
    const basis::BasisSpec spec = basis::BasisSpec::affine(order, 1.0, delta);
    initial_ = basis::constant_moments(Eigen::Vector3d(0, 0, 1), spec);
    target_ = basis::constant_moments(Eigen::Vector3d(1, 0, 0), spec);
  }

  int order() const noexcept { return order_; }
  int block_dim() const noexcept { return 3; }
  Eigen::Index state_dim() const noexcept { return 3 * (order_ + 1); }
  Eigen::Index control_dim() const noexcept { return 2; }
  double delta() const noexcept { return delta_; }

  const Eigen::MatrixXd& generator_x() const noexcept { return gen_x_; }
  const Eigen::MatrixXd& generator_y() const noexcept { return gen_y_; }
  const MomentVector& initial_state() const noexcept { return initial_; }
  const MomentVector& target_state() const noexcept { return target_; }

  Eigen::VectorXd vector_field(const Eigen::VectorXd& m, const Eigen::VectorXd& u) const {
    check(m, u);
    return u(0) * (gen_y_ * m) + u(1) * (gen_x_ * m);
  }

  double running_reward(const Eigen::VectorXd& m, const Eigen::VectorXd& u) const {
    check(m, u);
    return u.squaredNorm();
  }

  double terminal_reward(const Eigen::VectorXd& m) const {
    detail::require_size(m.size(), state_dim(), "BlochMomentModel state");
    return (m - target_.values()).squaredNorm();
  }
  Eigen::VectorXd terminal_gradient(const Eigen::VectorXd& m) const {
    detail::require_size(m.size(), state_dim(), "BlochMomentModel state");
    return 2.0 * (m - target_.values());
  }
  Eigen::MatrixXd terminal_hessian(const Eigen::VectorXd& m) const {
    detail::require_size(m.size(), state_dim(), "BlochMomentModel state");
    return 2.0 * Eigen::MatrixXd::Identity(state_dim(), state_dim());
  }

  /// u = -<DV, B_y m> / 2,  v = -<DV, B_x m> / 2.
  Eigen::VectorXd argmin_hamiltonian(const Eigen::VectorXd& m, const Eigen::VectorXd& dv) const {
    detail::require_size(m.size(), state_dim(), "BlochMomentModel state");
    detail::require_size(dv.size(), state_dim(), "BlochMomentModel DV");
    return Eigen::Vector2d(-0.5 * dv.dot(gen_y_ * m), -0.5 * dv.dot(gen_x_ * m));
  }

  HamiltonianExpansion expand_hamiltonian(const Eigen::VectorXd& m, const Eigen::VectorXd& u,
                                          const Eigen::VectorXd& dv) const {
    check(m, u);
    detail::require_size(dv.size(), state_dim(), "BlochMomentModel DV");
    const Eigen::Index n = state_dim();
    HamiltonianExpansion e;
    e.df_dm = u(0) * gen_y_ + u(1) * gen_x_;
    e.dh_dm = e.df_dm.transpose() * dv;
    e.d2h_dm2 = Eigen::MatrixXd::Zero(n, n);
    e.df_du.resize(n, 2);
    e.df_du.col(0) = gen_y_ * m;
    e.df_du.col(1) = gen_x_ * m;
    e.d2h_dmdu.resize(n, 2);
    e.d2h_dmdu.col(0) = gen_y_.transpose() * dv;
    e.d2h_dmdu.col(1) = gen_x_.transpose() * dv;
    e.dh_du = 2.0 * u + e.df_du.transpose() * dv;
    e.d2h_du2 = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    return e;
  }

 private:
  static Eigen::MatrixXd kron3(const Eigen::MatrixXd& s, const Eigen::Matrix3d& omega) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3 * s.rows(), 3 * s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        if (s(i, j) != 0.0) out.block<3, 3>(3 * i, 3 * j) = s(i, j) * omega;
      }
    }
    return out;
  }

  void check(const Eigen::VectorXd& m, const Eigen::VectorXd& u) const {
    detail::require_size(m.size(), state_dim(), "BlochMomentModel state");
    detail::require_size(u.size(), 2, "BlochMomentModel control");
  }

  int order_;
  double delta_;
  Eigen::MatrixXd gen_x_;
  Eigen::MatrixXd gen_y_;
  MomentVector initial_;
  MomentVector target_;
};

inline BlochMomentModel build_bloch(int order, double delta) { return BlochMomentModel(order, delta); }

static_assert(SystemModel<LqrMomentModel>);
static_assert(SystemModel<BlochMomentModel>);

}  // namespace momentrl
