// qnac: run experiments, print the LQR oracle, regenerate plots.
//
//   qnac run <config> [--jobs N] [--validate-only]
//   qnac oracle <config>
//   qnac plot <csv dir>
//
// Relative output directories are resolved against $QNAC_OUTPUT_ROOT when set.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qnac/qnac.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kRunFailed = 1, kBadInput = 2, kUnsupported = 3 };

fs::path output_dir(const qnac::ExperimentConfig& cfg) {
  fs::path out(cfg.output);
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("QNAC_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return fs::path(root) / out;
  }
  return out;
}

void write_file(const fs::path& p, const std::string& what,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw qnac::InputError("cannot write " + what + " '" + p.string() + "'");
  body(out);
}

struct Job {
  qnac::Method method;
  std::uint64_t seed;
};

int run_cmd(const std::string& path, unsigned jobs, bool validate_only) {
  const qnac::ExperimentConfig cfg = qnac::load_config(path);
  if (validate_only) {
    std::cout << "# " << path << ": valid\n" << qnac::echo_config(cfg);
    return kOk;
  }

  const fs::path dir = output_dir(cfg);
  fs::create_directories(dir / "trajectories");
  const std::optional<qnac::Vec> theta_star = qnac::optimal_theta(cfg);
  const qnac::Index n_theta = cfg.state_dim() * cfg.action_dim();

  std::vector<Job> todo;
  for (qnac::Method m : cfg.methods) {
    for (std::uint64_t s : cfg.seeds) todo.push_back({m, s});
  }

  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> any_failed{false};
  auto worker = [&]() {
    for (std::size_t j = next++; j < todo.size(); j = next++) {
      const Job job = todo[j];
      const std::string stem = std::string(qnac::method_name(job.method)) + "_" +
                               std::to_string(job.seed);
      qnac::TrainResult res;
      std::string error;
      try {
        res = qnac::train(qnac::make_train_config(cfg, job.method, job.seed, theta_star));
        write_file(dir / (stem + ".csv"), "run log", [&](std::ostream& o) {
          qnac::write_run_csv(o, res.records, n_theta);
        });
        write_file(dir / "trajectories" / (stem + "_first.csv"), "trajectory dump",
                   [&](std::ostream& o) { qnac::write_trajectories_csv(o, res.first_batch); });
        write_file(dir / "trajectories" / (stem + "_last.csv"), "trajectory dump",
                   [&](std::ostream& o) { qnac::write_trajectories_csv(o, res.last_batch); });
      } catch (const std::exception& e) {
        error = e.what();
      }
      const bool failed = !error.empty() || res.status != qnac::RunStatus::Ok;
      if (failed) any_failed = true;
      std::lock_guard lock(io);
      std::cout << stem << ": ";
      if (!error.empty()) {
        std::cout << "error: " << error << '\n';
        continue;
      }
      std::cout << qnac::status_name(res.status) << ", " << res.records.size() << " iterations";
      if (res.converged) std::cout << " (converged)";
      if (!res.records.empty()) {
        const qnac::RunRecord& last = res.records.back();
        std::cout << std::setprecision(6) << ", ||grad J|| " << last.grad_norm << ", J_hat "
                  << last.J_hat;
        if (theta_star) std::cout << ", ||theta - theta*|| " << (res.theta - *theta_star).norm();
      }
      if (!res.message.empty()) std::cout << "; " << res.message;
      std::cout << '\n';
    }
  };

  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, todo.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }

  if (cfg.plot) {
    for (const fs::path& p : qnac::plot_run_dir(dir)) std::cout << "wrote " << p.string() << '\n';
  }
  return any_failed ? kRunFailed : kOk;
}

void print_matrix(std::ostream& os, const char* name, const qnac::Mat& m) {
  os << name << " =\n";
  const Eigen::IOFormat fmt(10, 0, "  ", "\n", "  ", "");
  os << m.format(fmt) << '\n';
}

int oracle_cmd(const std::string& path) {
  const qnac::ExperimentConfig cfg = qnac::load_config(path);
  if (cfg.env != "lqr") {
    std::cerr << "oracle: unsupported for env '" << cfg.env
              << "': no closed-form optimum exists for this environment\n";
    return kUnsupported;
  }
  const qnac::LqrParams p = qnac::resolved_lqr(cfg);
  const qnac::LqrSolution sol = qnac::solve_lqr(p);
  const double residual = qnac::bellman_residual(p.A, p.B, p.Q, p.R, p.gamma, sol.K_star, sol.P);
  const double radius = qnac::closed_loop_radius(p.A, p.B, sol.K_star, p.gamma);

  std::cout << std::setprecision(10);
  print_matrix(std::cout, "K*", sol.K_star);
  print_matrix(std::cout, "P", sol.P);
  std::cout << "J* = " << sol.J_star << '\n';
  std::cout << "theta* = vec(K*) = " << qnac::cfgparse::format_vector(qnac::vec_mat(sol.K_star))
            << '\n';
  std::cout << "Bellman residual = " << residual << (residual < 1e-9 ? " (< 1e-9)" : "") << '\n';
  std::cout << "spectral radius of sqrt(gamma)(A - B K*) = " << radius << '\n';
  std::cout << "Riccati iterations = " << sol.iterations << '\n';

  const fs::path dir = output_dir(cfg);
  fs::create_directories(dir);
  write_file(dir / "oracle.csv", "oracle table", [&](std::ostream& o) {
    o << "name,row,col,value\n" << std::setprecision(17);
    for (qnac::Index i = 0; i < sol.K_star.rows(); ++i)
      for (qnac::Index j = 0; j < sol.K_star.cols(); ++j)
        o << "K_star," << i << ',' << j << ',' << sol.K_star(i, j) << '\n';
    for (qnac::Index i = 0; i < sol.P.rows(); ++i)
      for (qnac::Index j = 0; j < sol.P.cols(); ++j)
        o << "P," << i << ',' << j << ',' << sol.P(i, j) << '\n';
    o << "J_star,0,0," << sol.J_star << '\n';
    o << "bellman_residual,0,0," << residual << '\n';
  });
  std::cout << "wrote " << (dir / "oracle.csv").string() << '\n';
  return kOk;
}

int plot_cmd(const std::string& dir) {
  for (const fs::path& p : qnac::plot_run_dir(dir)) std::cout << "wrote " << p.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-Newton actor-critic experiments"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned jobs = 1;
  bool validate_only = false;
  auto* run = app.add_subcommand("run", "train on a config, write CSV logs and plots");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--jobs,-j", jobs, "concurrent (method, seed) runs")->check(CLI::PositiveNumber);
  run->add_flag("--validate-only", validate_only, "check and echo the config, write nothing");

  std::string oracle_path;
  auto* oracle = app.add_subcommand("oracle", "print the LQR optimum for a config");
  oracle->add_option("config", oracle_path, "experiment config file")->required();

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "regenerate plots from a directory of run CSVs");
  plot->add_option("dir", plot_dir, "directory holding <method>_<seed>.csv files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_cmd(config_path, jobs, validate_only);
    if (*oracle) return oracle_cmd(oracle_path);
    if (*plot) return plot_cmd(plot_dir);
  } catch (const qnac::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const qnac::ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailed;
  }
  return kOk;
}
