#pragma once

// Outer actor-critic loop: rollouts, critic fit, actor ingredients, update,
// one RunRecord per iteration.

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qnac/actor.hpp"
#include "qnac/critic.hpp"
#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/lstd.hpp"
#include "qnac/mdp.hpp"

namespace qnac {

struct TrainConfig {
  EnvSpec env;
  std::shared_ptr<const DiffPolicy> policy;
  FeatureMap features;
  Vec theta0;
  Method method = Method::QuasiNewton;
  std::size_t episodes = 500;
  std::size_t horizon = 50;
  std::size_t max_iters = 60;
  double sigma = 0.1;
  double alpha = 0.25;
  double mu_min = 1e-8;
  double tol_theta = 1e-6;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  LstdOptions lstd;
  std::optional<Vec> theta_star;  // enables dist_to_opt
  std::size_t dump_episodes = 5;  // episodes kept from the first and last batch

  void validate() const {
    env.validate();
    if (!policy) throw ContractError("train: no policy");
    if (policy->state_dim() != env.state_dim || policy->action_dim() != env.action_dim) {
      throw ContractError("train: policy and environment dimensions differ");
    }
    if (theta0.size() != policy->param_dim()) {
      throw ContractError("train: theta0 has " + std::to_string(theta0.size()) +
                          " entries, policy expects " + std::to_string(policy->param_dim()));
    }
    if (!theta0.allFinite()) throw ContractError("train: theta0 is not finite");
    if (features.dim <= 0 || !features.map) throw ContractError("train: no feature map");
    if (episodes < 1 || horizon < 1) throw ContractError("train: episodes and horizon must be >= 1");
    if (!(sigma >= 0.0)) throw ContractError("train: sigma must be >= 0");
    if (!(alpha > 0.0)) throw ContractError("train: step size must be positive");
    if (theta_star && theta_star->size() != theta0.size()) {
      throw ContractError("train: theta_star has the wrong dimension");
    }
  }
};

struct RunRecord {
  std::size_t iter = 0;  // 1-based
  Vec theta;             // parameters the batch was collected with
  double grad_norm = 0.0;
  double J_hat = 0.0;        // batch mean of the discounted return
  double penalty_hat = 0.0;  // batch mean of the discounted soft-constraint penalty
  double dist_to_opt = std::numeric_limits<double>::quiet_NaN();
  double cond_Av = 0.0;
  double cond_Ag = 0.0;
  double cond_AW = std::numeric_limits<double>::quiet_NaN();
  int clamped_eigs = 0;
  double mu_used = 0.0;
  Method method = Method::QuasiNewton;
  std::uint64_t seed = 0;
  double g_norm = 0.0;
  double W_fro = 0.0;
  bool curvature_fitted = false;
  double step_norm = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;  // seconds, not written to CSV
};

enum class RunStatus { Ok, Diverged, Unstable };

[[nodiscard]] inline const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Unstable: return "unstable";
  }
  return "?";
}

struct TrainResult {
  std::vector<RunRecord> records;
  Vec theta;  // final parameters
  RunStatus status = RunStatus::Ok;
  std::string message;
  bool converged = false;
  std::vector<Trajectory> first_batch;
  std::vector<Trajectory> last_batch;
};

/// True iff the last (up to) three step norms of the history are below tol.
[[nodiscard]] inline bool check_converged(std::span<const Vec> history, double tol) {
  if (history.size() < 2) throw ContractError("check_converged: need at least two iterates");
  const std::size_t steps = std::min<std::size_t>(3, history.size() - 1);
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t hi = history.size() - 1 - j;
    if (!((history[hi] - history[hi - 1]).norm() < tol)) return false;
  }
  return true;
}

namespace detail {

inline std::vector<Trajectory> head(const std::vector<Trajectory>& batch, std::size_t n) {
  return {batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(std::min(n, batch.size()))};
}

}  // namespace detail

[[nodiscard]] inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const double gamma = cfg.env.gamma;
  const bool qn = cfg.method == Method::QuasiNewton;
  const DiffPolicy& policy = *cfg.policy;

  TrainResult out;
  out.theta = cfg.theta0;
  std::vector<Vec> history{cfg.theta0};

  for (std::size_t i = 1; i <= cfg.max_iters; ++i) {
    const auto t0 = clock::now();
    RunRecord rec;
    rec.iter = i;
    rec.theta = out.theta;
    rec.method = cfg.method;
    rec.seed = cfg.seed;
    if (cfg.theta_star) rec.dist_to_opt = (out.theta - *cfg.theta_star).norm();

    std::vector<Trajectory> batch;
    try {
      batch = rollout_batch(cfg.env, policy, out.theta, cfg.horizon, cfg.sigma, cfg.episodes,
                            cfg.seed, i, cfg.threads);
    } catch (const RolloutError& e) {
      out.status = RunStatus::Unstable;
      out.message = "iteration " + std::to_string(i) + ": " + e.what();
      break;
    }

    double j_sum = 0.0;
    double pen_sum = 0.0;
    for (const Trajectory& tr : batch) {
      j_sum += discounted_return(tr, gamma);
      pen_sum += discounted_return(tr, gamma, true);
    }
    rec.J_hat = j_sum / static_cast<double>(batch.size());
    rec.penalty_hat = pen_sum / static_cast<double>(batch.size());
    if (i == 1) out.first_batch = detail::head(batch, cfg.dump_episodes);
    out.last_batch = detail::head(batch, cfg.dump_episodes);

    bool failed = false;
    try {
      const CriticFit fit = fit_critic(batch, policy, out.theta, cfg.features, gamma, qn, cfg.lstd);
      rec.cond_Av = fit.cond_Av;
      rec.cond_Ag = fit.cond_Ag;
      rec.cond_AW = fit.cond_AW;
      rec.clamped_eigs = fit.clamped;
      rec.curvature_fitted = fit.curvature_fitted;
      rec.g_norm = fit.params.g.norm();
      rec.W_fro = fit.params.W.norm();

      const Vec grad = estimate_grad(batch, policy, out.theta, fit.params.g, gamma);
      rec.grad_norm = grad.norm();
      Vec next;
      if (qn) {
        const Mat hess = estimate_hess(batch, policy, out.theta, fit.params.W, gamma);
        const QnUpdate up = qn_update(out.theta, grad, hess, cfg.alpha, cfg.mu_min, i);
        rec.mu_used = up.mu;
        next = up.theta;
      } else {
        next = fo_update(out.theta, grad, cfg.alpha, i);
      }
      rec.step_norm = (next - out.theta).norm();
      out.theta = std::move(next);
    } catch (const DivergedError& e) {
      out.status = RunStatus::Diverged;
      out.message = e.what() + std::string(" (iteration ") + std::to_string(e.iteration()) + ")";
      failed = true;
    } catch (const NumericError& e) {
      out.status = RunStatus::Diverged;
      out.message = "iteration " + std::to_string(i) + ": " + e.what();
      failed = true;
    }
    rec.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    out.records.push_back(std::move(rec));
    if (failed) break;

    history.push_back(out.theta);
    if (history.size() >= 4 && check_converged(history, cfg.tol_theta)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// One header row, then one row per record. Wall time is left out so reruns
/// are byte-identical.
inline void write_run_csv(std::ostream& out, std::span<const RunRecord> records,
                          Index param_dim) {
  out << "iter";
  for (Index j = 0; j < param_dim; ++j) out << ",theta_" << j;
  out << ",grad_norm,J_hat,dist_to_opt,cond_Av,cond_Ag,cond_AW,clamped_eigs,mu_used,method,seed"
         ",g_norm,W_fro,penalty_hat,step_norm,curvature_fitted\n";
  const auto old_precision = out.precision(17);
  for (const RunRecord& r : records) {
    out << r.iter;
    for (Index j = 0; j < param_dim; ++j) out << ',' << r.theta(j);
    out << ',' << r.grad_norm << ',' << r.J_hat << ',' << r.dist_to_opt << ',' << r.cond_Av
        << ',' << r.cond_Ag << ',' << r.cond_AW << ',' << r.clamped_eigs << ',' << r.mu_used
        << ',' << method_name(r.method) << ',' << r.seed << ',' << r.g_norm << ',' << r.W_fro
        << ',' << r.penalty_hat << ',' << r.step_norm << ',' << (r.curvature_fitted ? 1 : 0)
        << '\n';
  }
  out.precision(old_precision);
}

}  // namespace qnac
