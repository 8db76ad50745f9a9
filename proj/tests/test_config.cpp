#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qnac/config.hpp"

using namespace qnac;

namespace {

std::string message_of(const std::string& text) {
  try {
    (void)parse_config(text, "t.cfg");
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, DefaultsWhenEmpty) {
  const ExperimentConfig cfg = parse_config("# nothing\n\n");
  EXPECT_EQ(cfg.env, "lqr");
  EXPECT_EQ(cfg.methods.size(), 2u);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.episodes, 500u);
  EXPECT_EQ(cfg.horizon, 50u);
  EXPECT_EQ(cfg.iterations, 60u);
  EXPECT_DOUBLE_EQ(cfg.discount(), 0.999);
  EXPECT_EQ(initial_theta(cfg), Vec::Zero(6));
}

TEST(ParseConfig, AllForms) {
  const ExperimentConfig cfg = parse_config(
      "env = lqr   # trailing comment\n"
      "method = quasi-newton\n"
      "episodes = 20\n"
      "gamma = 0.9\n"
      "seeds = [4, 5]\n"
      "plot = off\n"
      "K0 = [[0.1, 0.1, -0.2], [0.1, -0.5, -0.5]]\n"
      "env.R = [[2, 0], [0, 3]]\n"
      "env.mean0 = 1, 2, 3\n");
  EXPECT_EQ(cfg.methods, std::vector<Method>{Method::QuasiNewton});
  EXPECT_EQ(cfg.episodes, 20u);
  EXPECT_DOUBLE_EQ(cfg.discount(), 0.9);
  EXPECT_DOUBLE_EQ(resolved_lqr(cfg).gamma, 0.9);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_FALSE(cfg.plot);
  EXPECT_EQ(initial_theta(cfg), (Vec(6) << 0.1, 0.1, 0.1, -0.5, -0.2, -0.5).finished());
  EXPECT_EQ(cfg.lqr.R(1, 1), 3.0);
  EXPECT_EQ(cfg.lqr.initial_mean, (Vec(3) << 1, 2, 3).finished());
}

TEST(ParseConfig, GammaOutOfRangeNamesFieldAndRange) {
  const std::string msg = message_of("episodes = 3\ngamma = 1.5\n");
  EXPECT_NE(msg.find("t.cfg:2:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'gamma'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("(0,1]"), std::string::npos) << msg;
  EXPECT_NE(message_of("gamma = 0\n").find("(0,1]"), std::string::npos);
  EXPECT_EQ(message_of("gamma = 1\n"), "");
}

TEST(ParseConfig, LinePreciseErrors) {
  EXPECT_NE(message_of("episodes = 3\nbogus = 1\n").find("t.cfg:2: field 'bogus': unknown key"),
            std::string::npos);
  EXPECT_NE(message_of("episodes = 3\nepisodes = 4\n").find("already set on line 1"),
            std::string::npos);
  EXPECT_NE(message_of("sigma 0.1\n").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(message_of("episodes = 2.5\n").find("non-negative integer"), std::string::npos);
  EXPECT_NE(message_of("method = newton\n").find("quasi-newton, first-order or both"),
            std::string::npos);
  EXPECT_NE(message_of("env.A = [[1, 2], [3]]\n").find("row 2 has 1"), std::string::npos);
  EXPECT_NE(message_of("K0 = [[1, 2], [3, 4]]\n").find("must be 2x3"), std::string::npos);
  EXPECT_NE(message_of("theta0 = 1, 2\n").find("must have 6 entries"), std::string::npos);
  EXPECT_NE(message_of("env.R = [[1, 0], [0, -1]]\n").find("positive definite"),
            std::string::npos);
  EXPECT_NE(message_of("seeds = []\n").find("at least one seed"), std::string::npos);
  EXPECT_NE(message_of("sigma = nan\n").find("'sigma'"), std::string::npos);
}

TEST(ParseConfig, CartPendDimensions) {
  const ExperimentConfig cfg = parse_config("env = cartpend\ntheta0 = 1, 1, 0, 0\nenv.dt = 0.05\n");
  EXPECT_EQ(cfg.state_dim(), 4);
  EXPECT_EQ(cfg.action_dim(), 1);
  EXPECT_DOUBLE_EQ(cfg.discount(), 0.95);
  EXPECT_DOUBLE_EQ(resolved_cartpend(cfg).dt, 0.05);
  EXPECT_FALSE(optimal_theta(cfg).has_value());
  EXPECT_NE(message_of("env = cartpend\ntheta0 = 1, 1\n").find("must have 4 entries"),
            std::string::npos);
}

TEST(EchoConfig, RoundTrips) {
  const ExperimentConfig a = parse_config(
      "method = first-order\nsigma = 0.05\ntheta0 = 0.1, 0.1, 0.1, -0.5, -0.2, -0.5\n"
      "env.noise_var = 0\nseeds = 7\n");
  const std::string echo = echo_config(a);
  const ExperimentConfig b = parse_config(echo, "echo");
  EXPECT_EQ(echo_config(b), echo);
  EXPECT_EQ(initial_theta(b), initial_theta(a));
  EXPECT_EQ(b.lqr.A, a.lqr.A);
  EXPECT_NE(echo.find("theta0 = 0.10000000000000001"), std::string::npos);
}

TEST(LoadConfig, MissingFileNamesPath) {
  try {
    (void)load_config("/nonexistent/x.cfg");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.cfg"), std::string::npos);
  }
}

TEST(LoadConfig, ShippedConfigsAreValid) {
  for (const char* name : {"lqr_paper.cfg", "cartpend.cfg", "scalar_toy.cfg"}) {
    const ExperimentConfig cfg = load_config(std::string(QNAC_CONFIG_DIR) + "/" + name);
    validate_config(cfg);
  }
  const ExperimentConfig paper = load_config(std::string(QNAC_CONFIG_DIR) + "/lqr_paper.cfg");
  EXPECT_EQ(paper.episodes, 500u);
  EXPECT_EQ(paper.horizon, 50u);
  EXPECT_EQ(paper.iterations, 60u);
  EXPECT_EQ(paper.seeds.size(), 3u);
  EXPECT_EQ(paper.methods.size(), 2u);
  EXPECT_EQ(initial_theta(paper), (Vec(6) << 0.1, 0.1, 0.1, -0.5, -0.2, -0.5).finished());
}

TEST(MakeTrainConfig, PicksStepSizePerMethod) {
  const ExperimentConfig cfg = parse_config("alpha_qn = 0.3\nalpha_fo = 2e-5\nridge = 1e-9\n");
  const auto theta_star = optimal_theta(cfg);
  ASSERT_TRUE(theta_star.has_value());
  const TrainConfig qn = make_train_config(cfg, Method::QuasiNewton, 2, theta_star);
  const TrainConfig fo = make_train_config(cfg, Method::FirstOrder, 2, theta_star);
  EXPECT_EQ(qn.alpha, 0.3);
  EXPECT_EQ(fo.alpha, 2e-5);
  EXPECT_EQ(qn.seed, 2u);
  EXPECT_EQ(qn.lstd.ridge, 1e-9);
  EXPECT_EQ(qn.features.dim, 10);
  qn.validate();
}
