#pragma once

// Actor side: policy-gradient and approximate-Hessian estimates assembled from
// the fitted critic, and the parameter updates that consume them.

#include <cmath>
#include <span>
#include <string>

#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/lstd.hpp"
#include "qnac/mdp.hpp"

namespace qnac {

enum class Method { QuasiNewton, FirstOrder };

[[nodiscard]] inline const char* method_name(Method m) {
  return m == Method::QuasiNewton ? "quasi-newton" : "first-order";
}

struct ActorStep {
  Vec grad;
  Mat hess;
  Vec direction;
  Method method = Method::QuasiNewton;
  double mu = 0.0;
  std::size_t iteration = 0;
};

/// (1/E) sum_e sum_k gamma^{k-1} J_k J_k' g, J_k = d pi / d theta at s_k.
[[nodiscard]] inline Vec estimate_grad(std::span<const Trajectory> batch,
                                       const DiffPolicy& policy, const Vec& theta,
                                       const Vec& g, double gamma) {
  if (batch.empty()) throw InputError("estimate_grad: empty batch");
  Vec grad = Vec::Zero(policy.param_dim());
  for (std::size_t e : detail::episode_order(batch)) {
    for (const Transition& tr : batch[e].transitions) {
      const Mat jac = policy.jacobian(theta, tr.state);
      grad.noalias() += detail::discount_weight(gamma, tr.k) * (jac * (jac.transpose() * g));
    }
  }
  return grad / static_cast<double>(batch.size());
}

/// (1/E) sum_e sum_k gamma^{k-1} J_k (J_k' W J_k) J_k'.
[[nodiscard]] inline Mat estimate_hess(std::span<const Trajectory> batch,
                                       const DiffPolicy& policy, const Vec& theta,
                                       const Mat& W, double gamma) {
  if (batch.empty()) throw InputError("estimate_hess: empty batch");
  const Index n = policy.param_dim();
  Mat hess = Mat::Zero(n, n);
  for (std::size_t e : detail::episode_order(batch)) {
    for (const Transition& tr : batch[e].transitions) {
      const Mat jac = policy.jacobian(theta, tr.state);
      const Mat jjt = jac * jac.transpose();
      hess.noalias() += detail::discount_weight(gamma, tr.k) * (jjt * W * jjt);
    }
  }
  hess /= static_cast<double>(batch.size());
  return 0.5 * (hess + hess.transpose());
}

struct QnUpdate {
  Vec theta;
  Vec direction;
  double mu = 0.0;
  bool pseudo_inverse = false;
};

/// theta - alpha d with (H + mu I) d = grad.
///
/// mu is the first of {0, mu_min, 10 mu_min, ...} for which the symmetric
/// system has condition below `max_condition`. At mu = 0 a singular but
/// consistent system (grad in the range of H) is solved by pseudoinverse.
[[nodiscard]] inline QnUpdate qn_update(const Vec& theta, const Vec& grad, const Mat& hess,
                                        double alpha, double mu_min = 1e-8,
                                        std::size_t iteration = 0,
                                        double max_condition = 1e10) {
  if (!(alpha > 0.0)) throw ContractError("qn_update: step size must be positive");
  if (!(mu_min > 0.0)) throw ContractError("qn_update: mu_min must be positive");
  const Index n = theta.size();
  if (grad.size() != n || hess.rows() != n || hess.cols() != n) {
    throw ContractError("qn_update: dimension mismatch");
  }

  const SymEig eig = sym_eig(hess);
  const double lmax = eig.eigenvalues(0);
  const double lmin = eig.eigenvalues(n - 1);
  auto condition_at = [&](double mu) {
    const double lo = lmin + mu;
    return lo > 0.0 ? (lmax + mu) / lo : std::numeric_limits<double>::infinity();
  };
  // d = U diag(1 / (lambda + mu)) U' grad, dropping directions with
  // non-positive shifted eigenvalue when `pseudo` is set.
  auto solve = [&](double mu, bool pseudo) {
    Vec coeff = eig.eigenvectors.transpose() * grad;
    const double cutoff = kDefaultRcond * std::max(std::abs(lmax), std::abs(lmin));
    for (Index i = 0; i < n; ++i) {
      const double lam = eig.eigenvalues(i) + mu;
      coeff(i) = (pseudo && !(std::abs(lam) > cutoff)) ? 0.0 : coeff(i) / lam;
    }
    return Vec(eig.eigenvectors * coeff);
  };

  QnUpdate out;
  if (condition_at(0.0) < max_condition) {
    out.direction = solve(0.0, false);
  } else {
    const Vec d = solve(0.0, true);
    const double gnorm = grad.norm();
    const bool consistent = (hess * d - grad).norm() <= 1e-8 * std::max(gnorm, 1e-300) ||
                            gnorm == 0.0;
    if (consistent) {
      out.direction = d;
      out.pseudo_inverse = true;
    } else {
      double mu = mu_min;
      for (int step = 0; step < 400 && !(condition_at(mu) < max_condition); ++step) mu *= 10.0;
      if (!(condition_at(mu) < max_condition)) {
        throw NumericError("qn_update: no damping level makes the system well-conditioned");
      }
      out.mu = mu;
      out.direction = solve(mu, false);
    }
  }
  out.theta = theta - alpha * out.direction;
  if (!out.theta.allFinite()) {
    throw DivergedError("quasi-Newton update produced a non-finite iterate", iteration);
  }
  return out;
}

[[nodiscard]] inline Vec fo_update(const Vec& theta, const Vec& grad, double alpha,
                                   std::size_t iteration = 0) {
  if (!(alpha >= 0.0)) throw ContractError("fo_update: step size must be non-negative");
  if (grad.size() != theta.size()) throw ContractError("fo_update: dimension mismatch");
  Vec next = theta - alpha * grad;
  if (!next.allFinite()) {
    throw DivergedError("first-order update produced a non-finite iterate", iteration);
  }
  return next;
}

}  // namespace qnac
