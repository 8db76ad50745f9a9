#pragma once

#include <string>

#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/mdp.hpp"

namespace qnac {

/// Linear state feedback a = -K s with theta = vec(K), K of shape
/// action_dim x state_dim, stacked column-major.
class LinearPolicy final : public DiffPolicy {
 public:
  LinearPolicy(Index state_dim, Index action_dim) : ns_(state_dim), na_(action_dim) {
    if (ns_ <= 0 || na_ <= 0) throw ContractError("LinearPolicy: dimensions must be positive");
  }

  [[nodiscard]] Index param_dim() const override { return ns_ * na_; }
  [[nodiscard]] Index state_dim() const override { return ns_; }
  [[nodiscard]] Index action_dim() const override { return na_; }

  [[nodiscard]] Mat gain(const Vec& theta) const {
    check(theta, nullptr);
    return unvec(theta, na_, ns_);
  }

  [[nodiscard]] Vec theta_from_gain(const Mat& k) const {
    if (k.rows() != na_ || k.cols() != ns_) {
      throw ContractError("LinearPolicy: gain must be " + std::to_string(na_) + "x" +
                          std::to_string(ns_));
    }
    return vec_mat(k);
  }

  [[nodiscard]] Vec act(const Vec& theta, const Vec& s) const override {
    check(theta, &s);
    return -(Eigen::Map<const Mat>(theta.data(), na_, ns_) * s);
  }

  /// Entry ((j * na) + i, i') = -s_j delta_{i i'} (0-based), i.e. -kron(s, I).
  [[nodiscard]] Mat jacobian(const Vec& theta, const Vec& s) const override {
    check(theta, &s);
    Mat jac = Mat::Zero(ns_ * na_, na_);
    for (Index j = 0; j < ns_; ++j) {
      for (Index i = 0; i < na_; ++i) jac(j * na_ + i, i) = -s(j);
    }
    return jac;
  }

 private:
  void check(const Vec& theta, const Vec* s) const {
    if (theta.size() != ns_ * na_) {
      throw ContractError("LinearPolicy: theta has " + std::to_string(theta.size()) +
                          " entries, expected " + std::to_string(ns_ * na_));
    }
    if (s != nullptr && s->size() != ns_) {
      throw ContractError("LinearPolicy: state has " + std::to_string(s->size()) +
                          " entries, expected " + std::to_string(ns_));
    }
  }

  Index ns_;
  Index na_;
};

[[nodiscard]] inline Vec linear_act(const Vec& theta, const Vec& s, Index action_dim) {
  if (action_dim <= 0 || theta.size() % action_dim != 0) {
    throw ContractError("linear_act: theta size is not a multiple of the action dimension");
  }
  return LinearPolicy(theta.size() / action_dim, action_dim).act(theta, s);
}

[[nodiscard]] inline Mat linear_jacobian(const Vec& theta, const Vec& s, Index action_dim) {
  if (action_dim <= 0 || theta.size() % action_dim != 0) {
    throw ContractError("linear_jacobian: theta size is not a multiple of the action dimension");
  }
  return LinearPolicy(theta.size() / action_dim, action_dim).jacobian(theta, s);
}

}  // namespace qnac
