#pragma once

// Concrete environments: a stochastic discounted LQR task and an
// RK4-discretized cart-pendulum with a soft velocity constraint.

#include <cmath>
#include <limits>

#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/mdp.hpp"

namespace qnac {

// --------------------------------------------------------------------------
// LQR: s+ = A s + B a + w, w ~ N(0, noise_var I), cost s'Qs + a'Ra.
// --------------------------------------------------------------------------

struct LqrParams {
  Mat A;
  Mat B;
  Mat Q;
  Mat R;
  Vec initial_mean;
  double initial_var = 0.0;  // s_1 ~ N(initial_mean, initial_var I)
  double noise_var = 0.0;    // w_k ~ N(0, noise_var I)
  double gamma = 1.0;

  /// The 3-state, 2-input benchmark system with its published weights.
  static LqrParams benchmark() {
    LqrParams p;
    p.A.resize(3, 3);
    p.A << 0.95, 0.20, 0.0,  //
        -0.10, 1.20, 0.30,   //
        0.0, -0.10, 1.10;
    p.B.resize(3, 2);
    p.B << 0.20, 0.50,  //
        0.10, -0.50,    //
        -0.30, -0.60;
    p.Q = Mat::Identity(3, 3);
    p.R = 10.0 * Mat::Identity(2, 2);
    p.initial_mean = Vec::Constant(3, 5.0);
    p.initial_var = 1e-2;
    p.noise_var = 1e-6;
    p.gamma = 0.999;
    return p;
  }

  [[nodiscard]] Index state_dim() const { return A.rows(); }
  [[nodiscard]] Index action_dim() const { return B.cols(); }

  void validate() const {
    const Index n = A.rows();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
        R.rows() != B.cols() || R.cols() != B.cols() || initial_mean.size() != n) {
      throw ContractError("lqr: inconsistent dimensions among A, B, Q, R and initial mean");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
      throw ContractError("lqr: gamma must lie in (0,1]");
    }
    if (initial_var < 0.0 || noise_var < 0.0) {
      throw ContractError("lqr: variances must be non-negative");
    }
  }
};

[[nodiscard]] inline double lqr_cost(const LqrParams& p, const Vec& s, const Vec& a) {
  return s.dot(p.Q * s) + a.dot(p.R * a);
}

/// One transition. Always draws state_dim normals so the stream position does
/// not depend on noise_var.
[[nodiscard]] inline Vec lqr_step(const LqrParams& p, const Vec& s, const Vec& a,
                                  NoiseSource& noise) {
  if (s.size() != p.state_dim() || a.size() != p.action_dim()) {
    throw ContractError("lqr_step: state/action dimension mismatch");
  }
  return p.A * s + p.B * a + noise.normal(p.state_dim(), std::sqrt(p.noise_var));
}

[[nodiscard]] inline EnvSpec make_lqr_env(const LqrParams& p) {
  p.validate();
  EnvSpec env;
  env.name = "lqr";
  env.state_dim = p.state_dim();
  env.action_dim = p.action_dim();
  env.gamma = p.gamma;
  env.stage_cost = [p](const Vec& s, const Vec& a) { return lqr_cost(p, s, a); };
  env.step = [p](const Vec& s, const Vec& a, NoiseSource& noise) {
    return lqr_step(p, s, a, noise);
  };
  env.initial_state = [p](NoiseSource& noise) -> Vec {
    return p.initial_mean + noise.normal(p.state_dim(), std::sqrt(p.initial_var));
  };
  return env;
}

// --------------------------------------------------------------------------
// Cart-pendulum. State ordering s = (x_dot, x, phi_dot, phi), action u.
//
//   (M+m) x'' + (1/2) m l phi'' cos(phi) = (1/2) m l phi'^2 sin(phi) + u
//   (1/3) m l^2 phi'' + (1/2) m l x'' cos(phi) = -(1/2) m g l sin(phi)
// --------------------------------------------------------------------------

struct CartPendParams {
  double cart_mass = 1.0;  // M [kg]
  double pole_mass = 0.1;  // m [kg]
  double length = 0.5;     // l [m]
  double gravity = 9.81;   // g [m/s^2]
  double dt = 0.1;         // sampling time [s]
  double noise_var = 1e-6; // xi ~ N(0, noise_var I_4)
  double gamma = 0.95;
  double penalty_weight = 100.0;  // weight on max(-x_dot, 0)
  double action_weight = 0.01;
  Vec initial_state = (Vec(4) << 0.2, 0.5, 0.5, 0.2).finished();
  double initial_var = 0.0;

  void validate() const {
    if (!(cart_mass > 0.0 && pole_mass > 0.0 && length > 0.0 && dt > 0.0)) {
      throw ContractError("cartpend: masses, length and dt must be positive");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("cartpend: gamma must lie in (0,1]");
    if (noise_var < 0.0 || initial_var < 0.0) {
      throw ContractError("cartpend: variances must be non-negative");
    }
    if (initial_state.size() != 4) throw ContractError("cartpend: initial state must have 4 entries");
  }
};

/// Time derivative (x_ddot, x_dot, phi_ddot, phi_dot) from the exact solution
/// of the 2x2 mass-matrix system.
[[nodiscard]] inline Vec cartpend_derivs(const CartPendParams& p, const Vec& s, double u) {
  if (s.size() != 4) throw ContractError("cartpend_derivs: state must have 4 entries");
  if (!s.allFinite() || !std::isfinite(u)) return Vec::Constant(4, std::numeric_limits<double>::quiet_NaN());
  const double x_dot = s(0);
  const double phi_dot = s(2);
  const double phi = s(3);
  const double c = std::cos(phi);
  const double sn = std::sin(phi);
  const double ml2 = 0.5 * p.pole_mass * p.length;

  const double a11 = p.cart_mass + p.pole_mass;
  const double a12 = ml2 * c;
  const double a22 = p.pole_mass * p.length * p.length / 3.0;
  const double r1 = ml2 * phi_dot * phi_dot * sn + u;
  const double r2 = -ml2 * p.gravity * sn;

  const double det = a11 * a22 - a12 * a12;
  if (!(std::abs(det) > 1e-12 * a11 * a22)) {
    throw NumericError("cartpend_derivs: singular mass matrix");
  }
  const double x_ddot = (r1 * a22 - a12 * r2) / det;
  const double phi_ddot = (a11 * r2 - a12 * r1) / det;
  return (Vec(4) << x_ddot, x_dot, phi_ddot, phi_dot).finished();
}

/// Kinetic plus potential energy of the unforced model (conserved when u = 0).
[[nodiscard]] inline double cartpend_energy(const CartPendParams& p, const Vec& s) {
  const double x_dot = s(0);
  const double phi_dot = s(2);
  const double phi = s(3);
  const double m = p.pole_mass;
  const double l = p.length;
  const double kinetic = 0.5 * (p.cart_mass + m) * x_dot * x_dot +
                         0.5 * m * l * x_dot * phi_dot * std::cos(phi) +
                         m * l * l * phi_dot * phi_dot / 6.0;
  const double potential = -0.5 * m * p.gravity * l * std::cos(phi);
  return kinetic + potential;
}

/// Classical RK4 over one interval with u held constant (no noise).
[[nodiscard]] inline Vec rk4_integrate(const CartPendParams& p, const Vec& s, double u,
                                       double dt) {
  const Vec k1 = cartpend_derivs(p, s, u);
  const Vec k2 = cartpend_derivs(p, s + 0.5 * dt * k1, u);
  const Vec k3 = cartpend_derivs(p, s + 0.5 * dt * k2, u);
  const Vec k4 = cartpend_derivs(p, s + dt * k3, u);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// s+ = f(s, u) + xi: one RK4 interval, then additive Gaussian noise.
[[nodiscard]] inline Vec rk4_step(const CartPendParams& p, const Vec& s, double u, double dt,
                                  NoiseSource& noise) {
  if (!(dt > 0.0)) throw ContractError("rk4_step: dt must be positive");
  return rk4_integrate(p, s, u, dt) + noise.normal(4, std::sqrt(p.noise_var));
}

[[nodiscard]] inline double cartpend_penalty(const CartPendParams& p, const Vec& s) {
  return p.penalty_weight * std::max(-s(0), 0.0);
}

[[nodiscard]] inline double cartpend_cost(const CartPendParams& p, const Vec& s, const Vec& a) {
  return s.squaredNorm() + p.action_weight * a.squaredNorm() + cartpend_penalty(p, s);
}

[[nodiscard]] inline EnvSpec make_cartpend_env(const CartPendParams& p) {
  p.validate();
  EnvSpec env;
  env.name = "cartpend";
  env.state_dim = 4;
  env.action_dim = 1;
  env.gamma = p.gamma;
  env.stage_cost = [p](const Vec& s, const Vec& a) { return cartpend_cost(p, s, a); };
  env.penalty = [p](const Vec& s, const Vec&) { return cartpend_penalty(p, s); };
  env.step = [p](const Vec& s, const Vec& a, NoiseSource& noise) {
    if (a.size() != 1) throw ContractError("cartpend: action must be scalar");
    return rk4_step(p, s, a(0), p.dt, noise);
  };
  env.initial_state = [p](NoiseSource& noise) -> Vec {
    return p.initial_state + noise.normal(4, std::sqrt(p.initial_var));
  };
  return env;
}

}  // namespace qnac
