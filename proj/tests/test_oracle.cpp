#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qnac/envs.hpp"
#include "qnac/oracle.hpp"
#include "qnac/policies.hpp"

using namespace qnac;

namespace {

Mat scalar(double x) { return Mat::Constant(1, 1, x); }

Mat printed_gain() {
  return unvec((Vec(6) << 0.1, 0.1, 0.1, -0.5, -0.2, -0.5).finished(), 2, 3);
}

Vec randn(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> n01;
  Vec v(n);
  for (auto& x : v) x = n01(rng);
  return v;
}

}  // namespace

TEST(Riccati, NoDynamics) {
  const LqrSolution sol = solve_discounted_riccati(scalar(0), scalar(1), scalar(1), scalar(1), 1.0);
  EXPECT_NEAR(sol.P(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(sol.K_star(0, 0), 0.0, 1e-12);
}

TEST(Riccati, GoldenRatio) {
  const LqrSolution sol = solve_discounted_riccati(scalar(1), scalar(1), scalar(1), scalar(1), 1.0);
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  EXPECT_NEAR(sol.P(0, 0), phi, 1e-11);
  EXPECT_NEAR(sol.K_star(0, 0), phi / (1.0 + phi), 1e-11);
}

TEST(Riccati, BenchmarkSelfConsistent) {
  const LqrParams p = LqrParams::benchmark();
  const LqrSolution sol = solve_lqr(p);
  EXPECT_LT(closed_loop_radius(p.A, p.B, sol.K_star, p.gamma), 1.0);
  EXPECT_LT(bellman_residual(p.A, p.B, p.Q, p.R, p.gamma, sol.K_star, sol.P), 1e-9);
  EXPECT_LE((sol.P - sol.P.transpose()).norm(), 0.0);
  EXPECT_GE(min_sym_eigenvalue(sol.P), 0.0);
  EXPECT_NEAR(sol.J_star, closed_form_J(sol.K_star, p), 1e-9);
}

TEST(Riccati, Contracts) {
  EXPECT_THROW((void)solve_discounted_riccati(scalar(1), scalar(1), scalar(1), scalar(0), 1.0),
               ContractError);
  EXPECT_THROW((void)solve_discounted_riccati(scalar(1), scalar(1), scalar(1), scalar(1), 1.5),
               ContractError);
  // Uncontrollable unstable mode: no finite fixed point.
  EXPECT_THROW((void)solve_discounted_riccati(scalar(2), scalar(0), scalar(1), scalar(1), 1.0),
               NumericError);
}

TEST(ClosedFormJ, OptimumBeatsPerturbations) {
  const LqrParams p = LqrParams::benchmark();
  const LqrSolution sol = solve_lqr(p);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Mat delta = 1e-3 * unvec(randn(rng, 6), 2, 3);
    EXPECT_LE(sol.J_star, closed_form_J(sol.K_star + delta, p));
  }
}

TEST(ClosedFormJ, ZeroWithoutExcitation) {
  LqrParams p = LqrParams::benchmark();
  p.noise_var = 0.0;
  p.initial_var = 0.0;
  p.initial_mean.setZero();
  EXPECT_EQ(closed_form_J(printed_gain(), p), 0.0);
  EXPECT_EQ(closed_form_J(solve_lqr(p).K_star, p), 0.0);
}

TEST(ClosedFormJ, UnstableGainIsDomainError) {
  const LqrParams p = LqrParams::benchmark();
  EXPECT_THROW((void)closed_form_J(Mat::Zero(2, 3), p), DomainError);
}

TEST(ClosedFormJ, MatchesMonteCarlo) {
  const LqrParams p = LqrParams::benchmark();
  const EnvSpec env = make_lqr_env(p);
  const Vec theta = vec_mat(printed_gain());
  const auto batch = rollout_batch(env, LinearPolicy(3, 2), theta, 5000, 0.0, 200, 3, 1, 4);
  double mean = 0.0;
  for (const auto& tr : batch) mean += discounted_return(tr, p.gamma);
  mean /= 200.0;
  const double exact = closed_form_J(printed_gain(), p);
  EXPECT_LE(std::abs(mean - exact) / exact, 0.01) << mean << " vs " << exact;
}

TEST(ClosedFormJ, IndependentOfLyapunovStart) {
  const LqrParams p = LqrParams::benchmark();
  for (const Mat& K : {printed_gain(), Mat(solve_lqr(p).K_star)}) {
    const double a = closed_form_J(K, p);
    const double b = closed_form_J(K, p, Mat::Zero(3, 3));
    const double c = closed_form_J(K, p, Mat(p.Q));
    EXPECT_LT(std::abs(a - b), 1e-10) << a << " vs " << b;
    EXPECT_LT(std::abs(a - c), 1e-10) << a << " vs " << c;
  }
}

TEST(ActionDerivatives, MatchFiniteDifferencesOfQ) {
  const LqrParams p = LqrParams::benchmark();
  const Mat K = printed_gain();
  const Mat P = policy_value_matrix(K, p);
  auto q = [&](const Vec& s, const Vec& a) {
    const Vec next = p.A * s + p.B * a;
    return lqr_cost(p, s, a) + p.gamma * next.dot(P * next);
  };
  std::mt19937_64 rng(2);
  const double h = 1e-4;
  for (int t = 0; t < 20; ++t) {
    const Vec s = randn(rng, 3);
    const Vec a = randn(rng, 2);
    Vec fd(2);
    for (int i = 0; i < 2; ++i) {
      const Vec e = h * Vec::Unit(2, i);
      fd(i) = (q(s, a + e) - q(s, a - e)) / (2 * h);
    }
    const Vec exact = lqr_action_grad_q(p, P, s, a);
    EXPECT_LE((fd - exact).norm(), 1e-6 * exact.norm());
  }
  Mat fdh(2, 2);
  const Vec s = randn(rng, 3);
  const Vec a = randn(rng, 2);
  for (int i = 0; i < 2; ++i) {
    const Vec e = h * Vec::Unit(2, i);
    fdh.col(i) = (lqr_action_grad_q(p, P, s, a + e) - lqr_action_grad_q(p, P, s, a - e)) / (2 * h);
  }
  EXPECT_LE((fdh - lqr_action_hess_q(p, P)).norm(), 1e-8 * fdh.norm());
}

TEST(FiniteDifferences, Quadratic) {
  std::mt19937_64 rng(3);
  Mat M(4, 4);
  for (Index j = 0; j < 4; ++j) M.col(j) = randn(rng, 4);
  const ScalarFn f = [M](const Vec& x) { return x.dot(M * x); };
  const Vec theta = randn(rng, 4);
  EXPECT_LE((fd_grad_J(f, theta) - (M + M.transpose()) * theta).norm(), 1e-8);
  EXPECT_LE((fd_grad_J(f, theta, kFdStep, 2) - (M + M.transpose()) * theta).norm(), 1e-8);
  EXPECT_LE((fd_hess_J(f, theta) - (M + M.transpose())).norm(), 1e-5);
}

TEST(FiniteDifferences, Constant) {
  const ScalarFn f = [](const Vec&) { return 4.2; };
  const Vec theta = Vec::LinSpaced(3, -1, 5);
  EXPECT_EQ(fd_grad_J(f, theta), Vec::Zero(3));
  EXPECT_EQ(fd_hess_J(f, theta), Mat::Zero(3, 3));
}

TEST(FiniteDifferences, NonFiniteIsNumericError) {
  const ScalarFn f = [](const Vec& x) { return x(0) > 0.5 ? std::nan("") : x(0); };
  EXPECT_THROW((void)fd_grad_J(f, Vec::Constant(1, 0.5)), NumericError);
  EXPECT_THROW((void)fd_hess_J(f, Vec::Constant(1, 0.5)), NumericError);
  EXPECT_THROW((void)fd_grad_J(f, Vec::Zero(1), 0.0), ContractError);
}

TEST(FiniteDifferences, HessianOfJIsSymmetric) {
  const LqrParams p = LqrParams::benchmark();
  const Mat H = fd_hess_J(lqr_objective(p), vec_mat(printed_gain()));
  EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(H.norm(), 0.0);
}

TEST(FiniteDifferences, GradientVanishesAtOptimum) {
  const LqrParams p = LqrParams::benchmark();
  const Vec theta_star = vec_mat(solve_lqr(p).K_star);
  EXPECT_LT(fd_grad_J(lqr_objective(p), theta_star).norm(), 1e-6);
}
