#pragma once

// Ground truth for the LQR task: discounted Riccati and Lyapunov solutions,
// the closed-form performance J(K), exact action derivatives of Q^K, and
// central finite differences of any scalar function of theta.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "qnac/envs.hpp"
#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"

namespace qnac {

struct LqrSolution {
  Mat P;
  Mat K_star;
  double J_star = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
};

inline constexpr double kOracleTol = 1e-12;
inline constexpr std::size_t kOracleMaxIter = 1'000'000;

namespace detail {

inline double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

inline Mat riccati_gain(const Mat& A, const Mat& B, const Mat& R, double gamma, const Mat& P) {
  const Mat s = R + gamma * B.transpose() * P * B;
  return gamma * s.ldlt().solve(B.transpose() * P * A);
}

}  // namespace detail

/// P <- Q + g A'PA - g^2 A'PB (R + g B'PB)^{-1} B'PA from P = Q, until the
/// largest entry change is below 1e-12; K* = g (R + g B'PB)^{-1} B'PA.
[[nodiscard]] inline LqrSolution solve_discounted_riccati(const Mat& A, const Mat& B,
                                                          const Mat& Q, const Mat& R,
                                                          double gamma) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw ContractError("solve_discounted_riccati: inconsistent dimensions");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ContractError("solve_discounted_riccati: gamma must lie in (0,1]");
  }
  if (min_sym_eigenvalue(R) <= 0.0) {
    throw ContractError("solve_discounted_riccati: R must be positive definite");
  }

  LqrSolution sol;
  Mat P = Q;
  for (std::size_t it = 1; it <= kOracleMaxIter; ++it) {
    const Mat K = detail::riccati_gain(A, B, R, gamma, P);
    // Equivalent closed-loop form; keeps P symmetric to roundoff.
    const Mat Ac = A - B * K;
    Mat next = Q + K.transpose() * R * K + gamma * Ac.transpose() * P * Ac;
    next = (0.5 * (next + next.transpose())).eval();
    if (!next.allFinite()) {
      throw NumericError("solve_discounted_riccati: iteration diverged (system not stabilizable?)");
    }
    const double change = detail::max_abs(next - P);
    P = std::move(next);
    if (change <= kOracleTol) {
      sol.iterations = it;
      sol.P = P;
      sol.K_star = detail::riccati_gain(A, B, R, gamma, P);
      return sol;
    }
  }
  throw NumericError("solve_discounted_riccati: no convergence within 1e6 iterations");
}

/// Bellman residual max |P - (Q + K'RK + g (A-BK)'P(A-BK))|.
[[nodiscard]] inline double bellman_residual(const Mat& A, const Mat& B, const Mat& Q,
                                             const Mat& R, double gamma, const Mat& K,
                                             const Mat& P) {
  const Mat Ac = A - B * K;
  return detail::max_abs(P - (Q + K.transpose() * R * K + gamma * Ac.transpose() * P * Ac));
}

[[nodiscard]] inline double closed_loop_radius(const Mat& A, const Mat& B, const Mat& K,
                                               double gamma) {
  return spectral_radius(std::sqrt(gamma) * (A - B * K));
}

/// Solves P = Qk + g Ac' P Ac by fixed-point iteration to 1e-12.
///
/// Without a starting point the iteration is seeded with the direct
/// (Kronecker) solution, so it only has to confirm it. Slow contraction can
/// leave the iterate short of the fixed point by far more than the last step
/// size, so the result is finished with iterative refinement against the
/// direct operator; the answer then does not depend on the start.
[[nodiscard]] inline Mat solve_discounted_lyapunov(const Mat& Ac, const Mat& Qk, double gamma,
                                                   const std::optional<Mat>& start = std::nullopt) {
  const Index n = Ac.rows();
  if (Ac.cols() != n || Qk.rows() != n || Qk.cols() != n) {
    throw ContractError("solve_discounted_lyapunov: inconsistent dimensions");
  }
  if (spectral_radius(std::sqrt(gamma) * Ac) >= 1.0) {
    throw DomainError("closed loop is not stable under discounting; J is infinite");
  }
  const Mat lhs = Mat::Identity(n * n, n * n) - gamma * kron(Ac.transpose(), Ac.transpose());
  const Eigen::PartialPivLU<Mat> lu(lhs);
  auto symmetrize = [](const Mat& m) { return Mat(0.5 * (m + m.transpose())); };
  auto apply = [&](const Mat& P) { return symmetrize(Qk + gamma * Ac.transpose() * P * Ac); };

  Mat P;
  if (start) {
    if (start->rows() != n || start->cols() != n) {
      throw ContractError("solve_discounted_lyapunov: starting point has wrong shape");
    }
    P = *start;
  } else {
    P = symmetrize(unvec(lu.solve(vec_mat(Qk)), n, n));
  }

  bool converged = false;
  for (std::size_t it = 0; it < kOracleMaxIter; ++it) {
    Mat next = apply(P);
    const double change = detail::max_abs(next - P);
    P = std::move(next);
    if (!P.allFinite()) throw NumericError("solve_discounted_lyapunov: iteration diverged");
    if (change <= kOracleTol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericError("solve_discounted_lyapunov: no convergence within 1e6 iterations");
  }
  for (int pass = 0; pass < 3; ++pass) {
    const Mat residual = apply(P) - P;
    P = symmetrize(P + unvec(lu.solve(vec_mat(residual)), n, n));
  }
  return P;
}

/// Value matrix of the linear policy a = -K s.
[[nodiscard]] inline Mat policy_value_matrix(const Mat& K, const LqrParams& p,
                                             const std::optional<Mat>& start = std::nullopt) {
  if (K.rows() != p.action_dim() || K.cols() != p.state_dim()) {
    throw ContractError("policy_value_matrix: gain must be " + std::to_string(p.action_dim()) +
                        "x" + std::to_string(p.state_dim()));
  }
  return solve_discounted_lyapunov(p.A - p.B * K, p.Q + K.transpose() * p.R * K, p.gamma, start);
}

/// J(K) = tr(P_K (S0 + m0 m0')) + g/(1-g) tr(P_K Sw).
[[nodiscard]] inline double closed_form_J(const Mat& K, const LqrParams& p,
                                          const std::optional<Mat>& start = std::nullopt) {
  const Mat P = policy_value_matrix(K, p, start);
  const Index n = p.state_dim();
  const Mat second_moment =
      p.initial_var * Mat::Identity(n, n) + p.initial_mean * p.initial_mean.transpose();
  double J = (P * second_moment).trace();
  if (p.noise_var > 0.0) {
    if (p.gamma >= 1.0) throw DomainError("closed_form_J: undiscounted noise accumulates without bound");
    J += p.gamma / (1.0 - p.gamma) * p.noise_var * P.trace();
  }
  return J;
}

[[nodiscard]] inline LqrSolution solve_lqr(const LqrParams& p) {
  p.validate();
  LqrSolution sol = solve_discounted_riccati(p.A, p.B, p.Q, p.R, p.gamma);
  sol.J_star = closed_form_J(sol.K_star, p);
  return sol;
}

/// grad_a Q^K(s, a) = 2 R a + 2 g B' P_K (A s + B a).
[[nodiscard]] inline Vec lqr_action_grad_q(const LqrParams& p, const Mat& P_K, const Vec& s,
                                           const Vec& a) {
  return 2.0 * p.R * a + 2.0 * p.gamma * p.B.transpose() * P_K * (p.A * s + p.B * a);
}

/// hess_a Q^K = 2 (R + g B' P_K B), independent of (s, a).
[[nodiscard]] inline Mat lqr_action_hess_q(const LqrParams& p, const Mat& P_K) {
  return 2.0 * (p.R + p.gamma * p.B.transpose() * P_K * p.B);
}

using ScalarFn = std::function<double(const Vec&)>;

inline constexpr double kFdStep = 1e-4;

namespace detail {

inline double checked_eval(const ScalarFn& f, const Vec& x) {
  const double y = f(x);
  if (!std::isfinite(y)) throw NumericError("finite difference: non-finite function value");
  return y;
}

inline double fd_step(double h, double x) { return h * std::max(1.0, std::abs(x)); }

}  // namespace detail

/// Central differences with step h * max(1, |theta_i|). The default
/// five-point stencil (order 4) keeps the truncation error negligible at the
/// default step; order 2 is the plain three-point quotient.
[[nodiscard]] inline Vec fd_grad_J(const ScalarFn& f, const Vec& theta, double h = kFdStep,
                                   int order = 4) {
  if (!(h > 0.0)) throw ContractError("fd_grad_J: step must be positive");
  if (order != 2 && order != 4) throw ContractError("fd_grad_J: order must be 2 or 4");
  Vec grad(theta.size());
  auto at = [&](Index i, double d) {
    Vec x = theta;
    x(i) += d;
    return detail::checked_eval(f, x);
  };
  for (Index i = 0; i < theta.size(); ++i) {
    const double hi = detail::fd_step(h, theta(i));
    if (order == 2) {
      grad(i) = (at(i, hi) - at(i, -hi)) / (2.0 * hi);
    } else {
      grad(i) = (8.0 * (at(i, hi) - at(i, -hi)) - (at(i, 2.0 * hi) - at(i, -2.0 * hi))) /
                (12.0 * hi);
    }
  }
  return grad;
}

/// Second-order central stencil, symmetrized.
[[nodiscard]] inline Mat fd_hess_J(const ScalarFn& f, const Vec& theta, double h = kFdStep) {
  if (!(h > 0.0)) throw ContractError("fd_hess_J: step must be positive");
  const Index n = theta.size();
  const double f0 = detail::checked_eval(f, theta);
  Mat hess(n, n);
  auto shifted = [&](Index i, double di, Index j, double dj) {
    Vec x = theta;
    x(i) += di;
    x(j) += dj;
    return detail::checked_eval(f, x);
  };
  for (Index i = 0; i < n; ++i) {
    const double hi = detail::fd_step(h, theta(i));
    hess(i, i) = (shifted(i, hi, i, 0.0) - 2.0 * f0 + shifted(i, -hi, i, 0.0)) / (hi * hi);
    for (Index j = i + 1; j < n; ++j) {
      const double hj = detail::fd_step(h, theta(j));
      hess(i, j) = (shifted(i, hi, j, hj) - shifted(i, hi, j, -hj) - shifted(i, -hi, j, hj) +
                    shifted(i, -hi, j, -hj)) /
                   (4.0 * hi * hj);
      hess(j, i) = hess(i, j);
    }
  }
  return hess;
}

/// J as a function of theta = vec(K) for the given LQR task.
[[nodiscard]] inline ScalarFn lqr_objective(const LqrParams& p) {
  const Index na = p.action_dim();
  const Index ns = p.state_dim();
  return [p, na, ns](const Vec& theta) { return closed_form_J(unvec(theta, na, ns), p); };
}

}  // namespace qnac
