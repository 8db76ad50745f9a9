#pragma once

// Environment and policy abstractions, trajectory storage and the seeded
// exploratory rollout engine.

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"

namespace qnac {

/// Seeded Gaussian noise stream. One instance per episode; never shared
/// between threads.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  /// Independent substream keyed by (seed, iteration, episode). The key is
  /// hashed through seed_seq so neighbouring keys give unrelated streams.
  static NoiseSource substream(std::uint64_t seed, std::uint64_t iteration,
                               std::uint64_t episode) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(iteration),
                      static_cast<std::uint32_t>(iteration >> 32),
                      static_cast<std::uint32_t>(episode),
                      static_cast<std::uint32_t>(episode >> 32), 0x51a3c0deu};
    return NoiseSource(seq);
  }

  double normal() { return normal_(engine_); }

  Vec normal(Index n, double stddev = 1.0) {
    Vec out(n);
    for (Index i = 0; i < n; ++i) out(i) = stddev * normal_(engine_);
    return out;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  explicit NoiseSource(std::seed_seq& seq) : engine_(seq) {}

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// An MDP with continuous states and actions and a stage cost to minimize.
struct EnvSpec {
  std::string name;
  Index state_dim = 0;
  Index action_dim = 0;
  double gamma = 1.0;
  std::function<double(const Vec& s, const Vec& a)> stage_cost;
  std::function<Vec(const Vec& s, const Vec& a, NoiseSource& noise)> step;
  std::function<Vec(NoiseSource& noise)> initial_state;
  /// Optional: the soft-constraint part of stage_cost, logged separately.
  std::function<double(const Vec& s, const Vec& a)> penalty;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
      throw ContractError("env '" + name + "': gamma must lie in (0,1], got " +
                          std::to_string(gamma));
    }
    if (state_dim <= 0 || action_dim <= 0) {
      throw ContractError("env '" + name + "': state and action dimensions must be positive");
    }
    if (!stage_cost || !step || !initial_state) {
      throw ContractError("env '" + name + "': stage_cost, step and initial_state are required");
    }
  }
};

/// Differentiable deterministic policy a = pi_theta(s).
///
/// jacobian() returns d pi / d theta with shape param_dim x action_dim, so
/// that jacobian * grad_a Q is a parameter-space vector.
class DiffPolicy {
 public:
  virtual ~DiffPolicy() = default;

  [[nodiscard]] virtual Index param_dim() const = 0;
  [[nodiscard]] virtual Index state_dim() const = 0;
  [[nodiscard]] virtual Index action_dim() const = 0;
  [[nodiscard]] virtual Vec act(const Vec& theta, const Vec& s) const = 0;
  [[nodiscard]] virtual Mat jacobian(const Vec& theta, const Vec& s) const = 0;
};

struct Transition {
  Vec state;
  Vec action;
  double cost = 0.0;
  Vec next_state;
  std::size_t k = 1;  // 1-based time index
  double penalty = 0.0;
};

struct Trajectory {
  std::size_t episode = 0;
  std::vector<Transition> transitions;
};

/// sum_k gamma^{k-1} values_k, with values indexed from k = 1.
[[nodiscard]] inline double discounted_sum(std::span<const double> values, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (double v : values) {
    total += weight * v;
    weight *= gamma;
  }
  return total;
}

/// Discounted return of one trajectory, optionally of the penalty term only.
[[nodiscard]] inline double discounted_return(const Trajectory& traj, double gamma,
                                              bool penalty_only = false) {
  double total = 0.0;
  double weight = 1.0;
  for (const Transition& tr : traj.transitions) {
    total += weight * (penalty_only ? tr.penalty : tr.cost);
    weight *= gamma;
  }
  return total;
}

/// One exploratory episode: a_k = pi(s_k) + eps_k with eps_k ~ N(0, sigma^2 I).
///
/// Noise is consumed in a fixed order: initial state, then per step the
/// exploration draw followed by whatever env.step draws.
[[nodiscard]] inline Trajectory rollout(const EnvSpec& env, const DiffPolicy& policy,
                                        const Vec& theta, std::size_t horizon, double sigma,
                                        NoiseSource& noise, std::size_t episode = 0) {
  if (horizon < 1) throw ContractError("rollout: horizon must be at least 1");
  if (!(sigma >= 0.0)) throw ContractError("rollout: exploration scale must be >= 0");
  if (theta.size() != policy.param_dim()) {
    throw ContractError("rollout: theta has " + std::to_string(theta.size()) +
                        " entries, policy expects " + std::to_string(policy.param_dim()));
  }

  Trajectory traj;
  traj.episode = episode;
  traj.transitions.reserve(horizon);

  Vec s = env.initial_state(noise);
  if (s.size() != env.state_dim) throw ContractError("rollout: initial state has wrong dimension");
  if (!s.allFinite()) throw RolloutError("non-finite initial state", episode, 0);

  for (std::size_t k = 1; k <= horizon; ++k) {
    Vec a = policy.act(theta, s) + noise.normal(env.action_dim, sigma);
    if (!a.allFinite()) throw RolloutError("non-finite action", episode, k);
    const double cost = env.stage_cost(s, a);
    const double pen = env.penalty ? env.penalty(s, a) : 0.0;
    Vec next;
    try {
      next = env.step(s, a, noise);
    } catch (const NumericError& e) {
      throw RolloutError(e.what(), episode, k);
    }
    if (!next.allFinite() || !std::isfinite(cost)) {
      throw RolloutError("non-finite state or cost", episode, k);
    }
    traj.transitions.push_back(Transition{s, a, cost, next, k, pen});
    s = std::move(next);
  }
  return traj;
}

/// E episodes at a fixed theta. Episode e draws from substream (seed,
/// iteration, e), so the result does not depend on `threads`.
[[nodiscard]] inline std::vector<Trajectory> rollout_batch(
    const EnvSpec& env, const DiffPolicy& policy, const Vec& theta, std::size_t horizon,
    double sigma, std::size_t episodes, std::uint64_t seed, std::uint64_t iteration,
    unsigned threads = 1) {
  std::vector<Trajectory> batch(episodes);
  std::vector<std::exception_ptr> errors(episodes);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t e = begin; e < episodes; e += stride) {
      try {
        NoiseSource noise = NoiseSource::substream(seed, iteration, e);
        batch[e] = rollout(env, policy, theta, horizon, sigma, noise, e);
      } catch (...) {
        errors[e] = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, episodes));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return batch;
}

/// Largest relative deviation between policy.jacobian and central finite
/// differences of policy.act at (theta, s).
[[nodiscard]] inline double jacobian_fd_error(const DiffPolicy& policy, const Vec& theta,
                                              const Vec& s, double h = 1e-6) {
  const Mat jac = policy.jacobian(theta, s);
  Mat fd(policy.param_dim(), policy.action_dim());
  for (Index i = 0; i < theta.size(); ++i) {
    Vec tp = theta;
    Vec tm = theta;
    tp(i) += h;
    tm(i) -= h;
    fd.row(i) = ((policy.act(tp, s) - policy.act(tm, s)) / (2.0 * h)).transpose();
  }
  const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
  return (jac - fd).cwiseAbs().maxCoeff() / scale;
}

/// CSV with columns episode,k,s_0..,a_0..,cost,s_next_0..
inline void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> batch) {
  if (batch.empty() || batch.front().transitions.empty()) {
    out << "episode,k,cost\n";
    return;
  }
  const Transition& first = batch.front().transitions.front();
  out << "episode,k";
  for (Index i = 0; i < first.state.size(); ++i) out << ",s_" << i;
  for (Index i = 0; i < first.action.size(); ++i) out << ",a_" << i;
  out << ",cost";
  for (Index i = 0; i < first.next_state.size(); ++i) out << ",s_next_" << i;
  out << '\n';

  const auto old_precision = out.precision(17);
  for (const Trajectory& traj : batch) {
    for (const Transition& tr : traj.transitions) {
      out << traj.episode << ',' << tr.k;
      for (Index i = 0; i < tr.state.size(); ++i) out << ',' << tr.state(i);
      for (Index i = 0; i < tr.action.size(); ++i) out << ',' << tr.action(i);
      out << ',' << tr.cost;
      for (Index i = 0; i < tr.next_state.size(); ++i) out << ',' << tr.next_state(i);
      out << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace qnac
