#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qnac/envs.hpp"

using namespace qnac;

namespace {

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

LqrParams quiet_lqr() {
  LqrParams p = LqrParams::benchmark();
  p.noise_var = 0.0;
  return p;
}

CartPendParams quiet_cart() {
  CartPendParams p;
  p.noise_var = 0.0;
  return p;
}

}  // namespace

TEST(LqrStep, Examples) {
  const LqrParams p = quiet_lqr();
  NoiseSource noise(1);
  EXPECT_EQ(lqr_step(p, Vec::Zero(3), Vec::Zero(2), noise), Vec::Zero(3));
  EXPECT_TRUE(lqr_step(p, v3(1, 0, 0), Vec::Zero(2), noise).isApprox(v3(0.95, -0.10, 0.0)));
  EXPECT_TRUE(lqr_step(p, Vec::Zero(3), v2(0, 1), noise).isApprox(v3(0.50, -0.50, -0.60)));
}

TEST(LqrStep, NoiseHasConfiguredVariance) {
  LqrParams p = LqrParams::benchmark();
  p.noise_var = 4.0;
  NoiseSource noise(2);
  double sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum2 += lqr_step(p, Vec::Zero(3), Vec::Zero(2), noise).squaredNorm();
  EXPECT_NEAR(sum2 / (3.0 * n), 4.0, 0.15);
}

TEST(LqrCost, QuadraticFormIdentity) {
  const LqrParams p = LqrParams::benchmark();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 100; ++t) {
    const Vec s = v3(n01(rng), n01(rng), n01(rng));
    const Vec a = v2(n01(rng), n01(rng));
    EXPECT_NEAR(lqr_cost(p, s, a), s.squaredNorm() + 10.0 * a.squaredNorm(), 1e-12);
  }
}

TEST(CartPend, UprightEquilibriumIsFixed) {
  const CartPendParams p = quiet_cart();
  EXPECT_EQ(cartpend_derivs(p, Vec::Zero(4), 0.0), Vec::Zero(4));
  NoiseSource noise(1);
  EXPECT_EQ(rk4_step(p, Vec::Zero(4), 0.0, 0.1, noise), Vec::Zero(4));
}

TEST(CartPend, HorizontalPendulumAcceleratesDown) {
  const Vec d = cartpend_derivs(quiet_cart(), (Vec(4) << 0, 0, 0, M_PI / 2).finished(), 0.0);
  EXPECT_LT(d(2), 0.0);
  // At phi = pi/2 the coupling vanishes: phi_ddot = -(3 g) / (2 l).
  EXPECT_NEAR(d(2), -1.5 * 9.81 / 0.5, 1e-12);
  EXPECT_NEAR(d(0), 0.0, 1e-12);
}

TEST(CartPend, DerivativesSolveTheMassMatrixSystem) {
  const CartPendParams p = quiet_cart();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 50; ++t) {
    const Vec s = (Vec(4) << u(rng), u(rng), u(rng), u(rng)).finished();
    const double f = u(rng);
    const Vec d = cartpend_derivs(p, s, f);
    const double m = p.pole_mass, l = p.length, c = std::cos(s(3)), sn = std::sin(s(3));
    EXPECT_NEAR((p.cart_mass + m) * d(0) + 0.5 * m * l * d(2) * c,
                0.5 * m * l * s(2) * s(2) * sn + f, 1e-12);
    EXPECT_NEAR(m * l * l * d(2) / 3.0 + 0.5 * m * l * d(0) * c, -0.5 * m * p.gravity * l * sn,
                1e-12);
    EXPECT_EQ(d(1), s(0));
    EXPECT_EQ(d(3), s(2));
  }
}

TEST(CartPend, EnergyDriftOverOneSecond) {
  const CartPendParams p = quiet_cart();
  Vec s = (Vec(4) << 0.2, 0.5, 0.5, 0.2).finished();
  const double e0 = cartpend_energy(p, s);
  for (int i = 0; i < 10; ++i) s = rk4_integrate(p, s, 0.0, 0.1);
  EXPECT_LE(std::abs(cartpend_energy(p, s) - e0) / std::abs(e0), 1e-3);
}

// Both checks below fail at these tolerances: a single RK4 step at dt = 0.1
// carries ~5e-4 truncation error here (it shrinks 16x per halving of dt).
TEST(CartPend, AgreesWithFineStepIntegrator) {
  const CartPendParams p = quiet_cart();
  const Vec s0 = (Vec(4) << 0.2, 0.5, 0.5, 0.2).finished();
  NoiseSource noise(1);
  const Vec coarse = rk4_step(p, s0, 0.0, 0.1, noise);
  Vec fine = s0;
  for (int i = 0; i < 10; ++i) fine = rk4_integrate(p, fine, 0.0, 0.01);
  EXPECT_LE((coarse - fine).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(CartPend, SmallAmplitudeMatchesLinearizedExpMap) {
  const CartPendParams p = quiet_cart();
  const double h = 1e-7;
  Mat jac(4, 4);
  for (int j = 0; j < 4; ++j) {
    Vec e = Vec::Zero(4);
    e(j) = h;
    jac.col(j) = (cartpend_derivs(p, e, 0.0) - cartpend_derivs(p, -e, 0.0)) / (2 * h);
  }
  // exp(J dt) by scaling and squaring of a Taylor series.
  Mat x = jac * (0.1 / 1024.0);
  Mat expm = Mat::Identity(4, 4);
  Mat term = Mat::Identity(4, 4);
  for (int k = 1; k < 20; ++k) {
    term = term * x / k;
    expm += term;
  }
  for (int i = 0; i < 10; ++i) expm = expm * expm;

  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  NoiseSource noise(1);
  for (int t = 0; t < 20; ++t) {
    Vec s = (Vec(4) << n01(rng), n01(rng), n01(rng), n01(rng)).finished();
    s *= 1e-3 / s.norm();
    EXPECT_LE((rk4_step(p, s, 0.0, 0.1, noise) - expm * s).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(CartPend, PenaltyIsHingeOnNegativeVelocity) {
  const CartPendParams p = quiet_cart();
  for (double v : {0.0, 0.3, 5.0}) {
    EXPECT_EQ(cartpend_penalty(p, (Vec(4) << v, 1, 1, 1).finished()), 0.0);
  }
  EXPECT_NEAR(cartpend_penalty(p, (Vec(4) << -0.25, 0, 0, 0).finished()), 25.0, 1e-12);
  EXPECT_NEAR(cartpend_penalty(p, (Vec(4) << -0.5, 0, 0, 0).finished()), 50.0, 1e-12);
  const Vec s = (Vec(4) << -0.1, 0.2, 0.3, 0.4).finished();
  const Vec a = Vec::Constant(1, 2.0);
  EXPECT_NEAR(cartpend_cost(p, s, a), s.squaredNorm() + 0.01 * 4.0 + 10.0, 1e-12);
}

TEST(Envs, DeterministicWithoutNoise) {
  const EnvSpec lqr = make_lqr_env(quiet_lqr());
  const EnvSpec cart = make_cartpend_env(quiet_cart());
  NoiseSource n1(1);
  NoiseSource n2(99);
  const Vec s3 = v3(0.3, -0.2, 0.1);
  EXPECT_EQ(lqr.step(s3, v2(0.1, 0.2), n1), lqr.step(s3, v2(0.1, 0.2), n2));
  const Vec s4 = (Vec(4) << 0.2, 0.5, 0.5, 0.2).finished();
  EXPECT_EQ(cart.step(s4, Vec::Constant(1, 0.3), n1), cart.step(s4, Vec::Constant(1, 0.3), n2));
}

TEST(Envs, DimensionMismatchIsContractError) {
  NoiseSource noise(1);
  EXPECT_THROW((void)lqr_step(quiet_lqr(), Vec::Zero(2), Vec::Zero(2), noise), ContractError);
  EXPECT_THROW((void)cartpend_derivs(quiet_cart(), Vec::Zero(3), 0.0), ContractError);
  EXPECT_THROW((void)rk4_step(quiet_cart(), Vec::Zero(4), 0.0, 0.0, noise), ContractError);
}
