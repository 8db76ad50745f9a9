#pragma once

// Quadratic compatible critic
//
//   Q^w(s, a) = V^v(s) + A^w(s, a),   V^v(s) = v' phi(s),
//   A^w(s, a) = psi' W psi + psi' g,  psi = jacobian(s) (a - pi(s)).
//
// The advantage vanishes on-policy (psi = 0), its action gradient there is
// jacobian' g and its action Hessian is 2 jacobian' W jacobian.

#include <functional>
#include <span>
#include <string>

#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/mdp.hpp"

namespace qnac {

struct CriticParams {
  Vec v;  // baseline weights
  Vec g;  // gradient part
  Mat W;  // curvature part, symmetric PSD
};

/// State features phi(s) with a fixed output dimension.
struct FeatureMap {
  std::string description;
  Index dim = 0;
  std::function<Vec(const Vec&)> map;

  [[nodiscard]] Vec operator()(const Vec& s) const { return map(s); }
};

/// Full quadratic monomials, ordered as
/// (1, s_1..s_n, s_1^2..s_n^2, s_i s_j for i < j in lexicographic order).
[[nodiscard]] inline Vec quad_features(const Vec& s) {
  const Index n = s.size();
  Vec out(1 + 2 * n + n * (n - 1) / 2);
  Index at = 0;
  out(at++) = 1.0;
  for (Index i = 0; i < n; ++i) out(at++) = s(i);
  for (Index i = 0; i < n; ++i) out(at++) = s(i) * s(i);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) out(at++) = s(i) * s(j);
  }
  return out;
}

[[nodiscard]] inline FeatureMap quad_feature_map(Index state_dim) {
  return FeatureMap{"quadratic monomials (1, s_i, s_i^2, s_i s_j i<j), n=" +
                        std::to_string(state_dim),
                    1 + 2 * state_dim + state_dim * (state_dim - 1) / 2,
                    [](const Vec& s) { return quad_features(s); }};
}

/// psi = jacobian (a - pi_s).
[[nodiscard]] inline Vec psi(const Mat& jacobian, const Vec& a, const Vec& pi_s) {
  if (a.size() != pi_s.size() || jacobian.cols() != a.size()) {
    throw ContractError("psi: jacobian is " + std::to_string(jacobian.rows()) + "x" +
                        std::to_string(jacobian.cols()) + ", action sizes " +
                        std::to_string(a.size()) + "/" + std::to_string(pi_s.size()));
  }
  return jacobian * (a - pi_s);
}

[[nodiscard]] inline double td_error(double cost, const Vec& phi_s, const Vec& phi_next,
                                     const Vec& v, double gamma) {
  if (phi_s.size() != v.size() || phi_next.size() != v.size()) {
    throw ContractError("td_error: feature and weight dimensions differ");
  }
  return cost + gamma * v.dot(phi_next) - v.dot(phi_s);
}

[[nodiscard]] inline double advantage(const Vec& psi_vec, const Vec& g, const Mat& W) {
  if (g.size() != psi_vec.size() || W.rows() != psi_vec.size() || W.cols() != psi_vec.size()) {
    throw ContractError("advantage: dimension mismatch");
  }
  return psi_vec.dot(W * psi_vec) + psi_vec.dot(g);
}

[[nodiscard]] inline double baseline_value(const FeatureMap& phi, const Vec& v, const Vec& s) {
  return v.dot(phi(s));
}

/// Mean compatibility residuals over a set of states.
///
///   eps1(s) = J' g - grad_a Q(s, pi(s))
///   eps2(s) = J' W J - hess_a Q(s, pi(s))        (W taken as the curvature)
///   eps2_doubled(s) = 2 J' W J - hess_a Q         (exact Hessian of A^w)
struct CompatResiduals {
  double eps1 = 0.0;          // mean ||eps1||^2
  double eps2 = 0.0;          // mean ||eps2||_F^2
  double eps2_doubled = 0.0;  // mean ||eps2_doubled||_F^2
};

using ActionGradOracle = std::function<Vec(const Vec& s)>;
using ActionHessOracle = std::function<Mat(const Vec& s)>;

[[nodiscard]] inline CompatResiduals compat_residuals(const DiffPolicy& policy,
                                                      const Vec& theta,
                                                      std::span<const Vec> states,
                                                      const ActionGradOracle& true_grad_q,
                                                      const ActionHessOracle& true_hess_q,
                                                      const Vec& g, const Mat& W) {
  if (!true_grad_q || !true_hess_q) {
    throw UnsupportedError("compat_residuals: no action-value oracle for this environment");
  }
  if (states.empty()) throw InputError("compat_residuals: empty state set");
  CompatResiduals out;
  for (const Vec& s : states) {
    const Mat jac = policy.jacobian(theta, s);
    const Mat curv = jac.transpose() * W * jac;
    const Mat hess = true_hess_q(s);
    out.eps1 += (jac.transpose() * g - true_grad_q(s)).squaredNorm();
    out.eps2 += (curv - hess).squaredNorm();
    out.eps2_doubled += (2.0 * curv - hess).squaredNorm();
  }
  const double n = static_cast<double>(states.size());
  out.eps1 /= n;
  out.eps2 /= n;
  out.eps2_doubled /= n;
  return out;
}

}  // namespace qnac
