#pragma once

// Three-stage batch LSTD for the quadratic compatible critic.
//
//   1. baseline   E[phi (phi - gamma phi')'] v = E[cost phi]
//   2. gradient   E[psi psi'] g = E[delta psi]
//   3. curvature  E[vec(psi psi') vec(psi psi')'] vec(W) = E[(delta - psi'g) vec(psi psi')]
//                 followed by projection of the symmetrized solution onto the
//                 PSD cone.
//
// Every expectation is sum_e sum_k gamma^{k-1} (.) / E over the batch. Sums
// run in increasing episode index, so the result does not depend on the
// order trajectories are stored in.

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qnac/critic.hpp"
#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/mdp.hpp"

namespace qnac {

struct LstdOptions {
  double rcond = kDefaultRcond;
  double ridge = 0.0;          // added to each normal matrix; off by default
  Index max_param_dim = 40;    // curvature system is max_param_dim^2 square
};

/// A normalized normal-equation system and its solution report.
struct LstdSystem {
  Mat A;
  Vec b;
  double condition = 0.0;
  Index rank = 0;
};

struct BaselineFit {
  Vec v;
  LstdSystem system;
};

/// Per-transition regression data for the gradient and curvature stages.
struct CompatSample {
  std::size_t episode = 0;
  std::size_t k = 1;
  double weight = 1.0;  // gamma^{k-1}
  double delta = 0.0;   // TD error under the fitted baseline
  Vec psi;
};

struct GradientFit {
  Vec g;
  LstdSystem system;
};

struct CurvatureFit {
  Mat W;      // projected, what the actor consumes
  Mat W_raw;  // symmetrized least-squares solution before projection
  int clamped = 0;
  LstdSystem system;
};

struct CriticFit {
  CriticParams params;
  Mat W_raw;
  double cond_Av = 0.0;
  double cond_Ag = 0.0;
  double cond_AW = 0.0;  // NaN when the curvature stage was skipped
  int clamped = 0;
  bool curvature_fitted = false;
};

namespace detail {

inline std::vector<std::size_t> episode_order(std::span<const Trajectory> batch) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch[a].episode < batch[b].episode;
  });
  return order;
}

inline double discount_weight(double gamma, std::size_t k) {
  return std::pow(gamma, static_cast<double>(k - 1));
}

inline LstdSystem solve_system(Mat a, Vec b, double episodes, const LstdOptions& opts,
                               Vec& solution) {
  a /= episodes;
  b /= episodes;
  if (!a.allFinite() || !b.allFinite()) {
    throw NumericError("lstd: accumulators are not finite (trajectories blew up)");
  }
  if (opts.ridge > 0.0) a.diagonal().array() += opts.ridge;
  const SolveReport rep = solve_or_pinv_report(a, b, opts.rcond);
  solution = rep.x;
  return LstdSystem{std::move(a), std::move(b), rep.condition, rep.rank};
}

}  // namespace detail

[[nodiscard]] inline BaselineFit fit_baseline(std::span<const Trajectory> batch,
                                              const FeatureMap& phi, double gamma,
                                              const LstdOptions& opts = {}) {
  if (batch.empty()) throw InputError("fit_baseline: empty batch");
  const Index d = phi.dim;
  Mat a = Mat::Zero(d, d);
  Vec b = Vec::Zero(d);
  for (std::size_t e : detail::episode_order(batch)) {
    for (const Transition& tr : batch[e].transitions) {
      const double w = detail::discount_weight(gamma, tr.k);
      const Vec f = phi(tr.state);
      const Vec f_next = phi(tr.next_state);
      a.noalias() += (w * f) * (f - gamma * f_next).transpose();
      b.noalias() += (w * tr.cost) * f;
    }
  }
  BaselineFit fit;
  fit.system = detail::solve_system(std::move(a), std::move(b),
                                    static_cast<double>(batch.size()), opts, fit.v);
  return fit;
}

/// TD errors and compatible features for every transition, in episode order.
[[nodiscard]] inline std::vector<CompatSample> compat_samples(std::span<const Trajectory> batch,
                                                              const DiffPolicy& policy,
                                                              const Vec& theta,
                                                              const FeatureMap& phi,
                                                              const Vec& v, double gamma) {
  std::vector<CompatSample> out;
  for (std::size_t e : detail::episode_order(batch)) {
    for (const Transition& tr : batch[e].transitions) {
      CompatSample smp;
      smp.episode = batch[e].episode;
      smp.k = tr.k;
      smp.weight = detail::discount_weight(gamma, tr.k);
      smp.delta = td_error(tr.cost, phi(tr.state), phi(tr.next_state), v, gamma);
      smp.psi = psi(policy.jacobian(theta, tr.state), tr.action, policy.act(theta, tr.state));
      out.push_back(std::move(smp));
    }
  }
  return out;
}

/// `episodes` is the E used for normalization.
[[nodiscard]] inline GradientFit fit_gradient(std::span<const CompatSample> samples,
                                              std::size_t episodes,
                                              const LstdOptions& opts = {}) {
  if (samples.empty() || episodes == 0) throw InputError("fit_gradient: empty batch");
  const Index n = samples.front().psi.size();
  Mat a = Mat::Zero(n, n);
  Vec b = Vec::Zero(n);
  for (const CompatSample& smp : samples) {
    if (smp.psi.size() != n) throw ContractError("fit_gradient: inconsistent psi dimension");
    a.noalias() += (smp.weight * smp.psi) * smp.psi.transpose();
    b.noalias() += (smp.weight * smp.delta) * smp.psi;
  }
  GradientFit fit;
  fit.system = detail::solve_system(std::move(a), std::move(b), static_cast<double>(episodes),
                                    opts, fit.g);
  return fit;
}

[[nodiscard]] inline CurvatureFit fit_curvature(std::span<const CompatSample> samples,
                                                const Vec& g, std::size_t episodes,
                                                const LstdOptions& opts = {}) {
  if (samples.empty() || episodes == 0) throw InputError("fit_curvature: empty batch");
  const Index n = samples.front().psi.size();
  if (g.size() != n) throw ContractError("fit_curvature: g and psi dimensions differ");
  if (n > opts.max_param_dim) {
    throw CapacityError("fit_curvature: " + std::to_string(n) + " policy parameters need a " +
                        std::to_string(n * n) + "-square curvature system, above the cap of " +
                        std::to_string(opts.max_param_dim) +
                        " parameters; use a smaller policy class");
  }
  const Index n2 = n * n;
  Mat a = Mat::Zero(n2, n2);
  Vec b = Vec::Zero(n2);
  Vec lifted(n2);
  for (const CompatSample& smp : samples) {
    if (smp.psi.size() != n) throw ContractError("fit_curvature: inconsistent psi dimension");
    const double delta_hat = smp.delta - smp.psi.dot(g);
    Eigen::Map<Mat>(lifted.data(), n, n).noalias() = smp.psi * smp.psi.transpose();
    a.selfadjointView<Eigen::Lower>().rankUpdate(lifted, smp.weight);
    b.noalias() += (smp.weight * delta_hat) * lifted;
  }
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();

  CurvatureFit fit;
  Vec w_vec;
  fit.system = detail::solve_system(std::move(a), std::move(b), static_cast<double>(episodes),
                                    opts, w_vec);
  const Mat w_ls = unvec(w_vec, n, n);
  fit.W_raw = 0.5 * (w_ls + w_ls.transpose());
  PsdProjection proj = project_psd_counted(fit.W_raw);
  fit.W = std::move(proj.matrix);
  fit.clamped = proj.clamped;
  return fit;
}

/// Runs the three stages on one batch collected at theta. With
/// `with_curvature` false the curvature stage is skipped and W = 0.
[[nodiscard]] inline CriticFit fit_critic(std::span<const Trajectory> batch,
                                          const DiffPolicy& policy, const Vec& theta,
                                          const FeatureMap& phi, double gamma,
                                          bool with_curvature, const LstdOptions& opts = {}) {
  CriticFit out;
  const BaselineFit base = fit_baseline(batch, phi, gamma, opts);
  const std::vector<CompatSample> samples =
      compat_samples(batch, policy, theta, phi, base.v, gamma);
  const GradientFit grad = fit_gradient(samples, batch.size(), opts);

  out.params.v = base.v;
  out.params.g = grad.g;
  out.cond_Av = base.system.condition;
  out.cond_Ag = grad.system.condition;
  out.cond_AW = std::numeric_limits<double>::quiet_NaN();

  const Index n = policy.param_dim();
  if (with_curvature) {
    CurvatureFit curv = fit_curvature(samples, grad.g, batch.size(), opts);
    out.params.W = std::move(curv.W);
    out.W_raw = std::move(curv.W_raw);
    out.cond_AW = curv.system.condition;
    out.clamped = curv.clamped;
    out.curvature_fitted = true;
  } else {
    out.params.W = Mat::Zero(n, n);
    out.W_raw = Mat::Zero(n, n);
  }
  return out;
}

}  // namespace qnac
