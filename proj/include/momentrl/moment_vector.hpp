#pragma once

#include <Eigen/Dense>

#include <string>

#include "momentrl/error.hpp"

namespace momentrl {

/// Truncated moment sequence (m_0, ..., m_N) of an R^d-valued function.
/// Block k holds the d-vector m_k; blocks are stored contiguously by k.
class MomentVector {
 public:
  MomentVector() = default;

  MomentVector(int order, int block_dim)
      : order_(order), block_dim_(block_dim),
        values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(block_dim) * (order + 1))) {
    check_shape();
  }

  MomentVector(int order, int block_dim, Eigen::VectorXd values)
      : order_(order), block_dim_(block_dim), values_(std::move(values)) {
    check_shape();
    if (!values_.allFinite()) throw NumericalError("MomentVector: non-finite entry");
  }

  int order() const noexcept { return order_; }
  int block_dim() const noexcept { return block_dim_; }
  Eigen::Index size() const noexcept { return values_.size(); }

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::VectorXd& values() noexcept { return values_; }

  auto block(int k) const { return values_.segment(static_cast<Eigen::Index>(k) * block_dim_, block_dim_); }
  auto block(int k) { return values_.segment(static_cast<Eigen::Index>(k) * block_dim_, block_dim_); }

  double norm() const { return values_.norm(); }

 private:
  void check_shape() const {
    if (order_ < 0) throw DomainError("MomentVector: negative order");
    if (block_dim_ < 1) throw DomainError("MomentVector: block_dim must be >= 1");
    if (values_.size() != static_cast<Eigen::Index>(block_dim_) * (order_ + 1)) {
      throw DimensionError("MomentVector: expected " +
                           std::to_string(block_dim_ * (order_ + 1)) + " values, got " +
                           std::to_string(values_.size()));
    }
  }

  int order_ = 0;
  int block_dim_ = 1;
  Eigen::VectorXd values_ = Eigen::VectorXd::Zero(1);
};

}  // namespace momentrl
