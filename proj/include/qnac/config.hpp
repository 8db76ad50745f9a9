#pragma once

// Experiment configuration: a flat `key = value` file.
//
//   # comment
//   env = lqr
//   env.A = [[0.95, 0.2, 0], [-0.1, 1.2, 0.3], [0, -0.1, 1.1]]
//   seeds = 1, 2, 3
//
// Keys under `env.` override parameters of the selected environment. Every
// error names the file, the line and the field.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qnac/actor.hpp"
#include "qnac/critic.hpp"
#include "qnac/envs.hpp"
#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/oracle.hpp"
#include "qnac/policies.hpp"
#include "qnac/trainer.hpp"

namespace qnac {

struct ExperimentConfig {
  std::string source = "<config>";
  std::string env = "lqr";
  LqrParams lqr = LqrParams::benchmark();
  CartPendParams cartpend;
  std::vector<Method> methods{Method::QuasiNewton, Method::FirstOrder};
  std::size_t episodes = 500;
  std::size_t horizon = 50;
  std::size_t iterations = 60;
  std::optional<double> gamma;  // overrides the environment's discount
  double sigma = 0.1;
  double alpha_qn = 0.25;
  double alpha_fo = 1e-5;
  double tol_theta = 1e-6;
  double mu_min = 1e-8;
  double ridge = 0.0;
  Index max_param_dim = 40;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output = "runs";
  bool plot = true;
  std::optional<Mat> K0;      // action_dim x state_dim, rows as written
  std::optional<Vec> theta0;  // vec(K0), column-major
  unsigned threads = 1;
  std::size_t dump_episodes = 5;

  [[nodiscard]] Index state_dim() const { return env == "lqr" ? lqr.state_dim() : 4; }
  [[nodiscard]] Index action_dim() const { return env == "lqr" ? lqr.action_dim() : 1; }
  [[nodiscard]] double discount() const {
    return gamma.value_or(env == "lqr" ? lqr.gamma : cartpend.gamma);
  }
};

namespace cfgparse {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Field {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Error raised while reading one field; the caller adds the location.
struct FieldError {
  std::string message;
};

inline double number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw FieldError{"expected a number, got nothing"};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw FieldError{"expected a number, got '" + t + "'"};
  }
  if (used != t.size()) throw FieldError{"expected a number, got '" + t + "'"};
  if (!std::isfinite(v)) throw FieldError{"value must be finite"};
  return v;
}

inline std::size_t count(const std::string& text) {
  const double v = number(text);
  if (v < 0.0 || v != std::floor(v) || v > 1e12) {
    throw FieldError{"expected a non-negative integer, got '" + trim(text) + "'"};
  }
  return static_cast<std::size_t>(v);
}

inline bool boolean(const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw FieldError{"expected true or false, got '" + trim(text) + "'"};
}

/// "1, 2, 3" or "[1, 2, 3]".
inline std::vector<double> list(const std::string& text) {
  std::string t = trim(text);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw FieldError{"unbalanced brackets in list"};
    t = trim(std::string_view(t).substr(1, t.size() - 2));
  }
  if (t.find_first_of("[]") != std::string::npos) {
    throw FieldError{"expected a flat list of numbers"};
  }
  std::vector<double> out;
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(number(item));
  if (t.back() == ',') throw FieldError{"trailing comma in list"};
  return out;
}

inline Vec vector(const std::string& text) {
  const std::vector<double> v = list(text);
  if (v.empty()) throw FieldError{"expected at least one number"};
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

/// "[[a, b], [c, d]]", one inner list per row.
inline Mat matrix(const std::string& text) {
  const std::string t = trim(text);
  if (t.size() < 4 || t.front() != '[' || t.back() != ']') {
    throw FieldError{"expected a nested list such as [[1, 0], [0, 1]]"};
  }
  const std::string body = trim(std::string_view(t).substr(1, t.size() - 2));
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t open = body.find('[', pos);
    if (open == std::string::npos) {
      if (!trim(std::string_view(body).substr(pos)).empty()) {
        throw FieldError{"stray text after the last row"};
      }
      break;
    }
    const std::string between = trim(std::string_view(body).substr(pos, open - pos));
    if (!(between.empty() || (between == "," && !rows.empty()))) {
      throw FieldError{"rows must be separated by commas"};
    }
    const std::size_t close = body.find(']', open);
    if (close == std::string::npos) throw FieldError{"unbalanced brackets in matrix"};
    rows.push_back(list(body.substr(open, close - open + 1)));
    pos = close + 1;
  }
  if (rows.empty() || rows.front().empty()) throw FieldError{"matrix has no entries"};
  const std::size_t cols = rows.front().size();
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw FieldError{"row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                       " entries, row 1 has " + std::to_string(cols)};
    }
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

inline std::vector<Method> methods(const std::string& text) {
  const std::string t = trim(text);
  if (t == "quasi-newton") return {Method::QuasiNewton};
  if (t == "first-order") return {Method::FirstOrder};
  if (t == "both") return {Method::QuasiNewton, Method::FirstOrder};
  throw FieldError{"expected quasi-newton, first-order or both, got '" + t + "'"};
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string format_vector(const Vec& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_number(v(i));
  return out;
}

inline std::string format_matrix(const Mat& m) {
  std::string out = "[";
  for (Index i = 0; i < m.rows(); ++i) {
    out += (i ? ", [" : "[") + format_vector(m.row(i).transpose()) + "]";
  }
  return out + "]";
}

}  // namespace cfgparse

namespace detail {

inline void apply_field(ExperimentConfig& cfg, const cfgparse::Field& f) {
  using namespace cfgparse;
  const std::string& k = f.key;
  const std::string& v = f.value;
  if (k == "env") {
    const std::string name = trim(v);
    if (name != "lqr" && name != "cartpend") {
      throw FieldError{"expected lqr or cartpend, got '" + name + "'"};
    }
    cfg.env = name;
  } else if (k == "method") {
    cfg.methods = methods(v);
  } else if (k == "episodes") {
    cfg.episodes = count(v);
  } else if (k == "horizon") {
    cfg.horizon = count(v);
  } else if (k == "iterations") {
    cfg.iterations = count(v);
  } else if (k == "gamma") {
    cfg.gamma = number(v);
  } else if (k == "sigma") {
    cfg.sigma = number(v);
  } else if (k == "alpha_qn") {
    cfg.alpha_qn = number(v);
  } else if (k == "alpha_fo") {
    cfg.alpha_fo = number(v);
  } else if (k == "tol_theta") {
    cfg.tol_theta = number(v);
  } else if (k == "mu_min") {
    cfg.mu_min = number(v);
  } else if (k == "ridge") {
    cfg.ridge = number(v);
  } else if (k == "max_param_dim") {
    cfg.max_param_dim = static_cast<Index>(count(v));
  } else if (k == "seeds") {
    cfg.seeds.clear();
    for (double s : list(v)) {
      if (s < 0.0 || s != std::floor(s)) throw FieldError{"seeds must be non-negative integers"};
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  } else if (k == "output") {
    cfg.output = trim(v);
  } else if (k == "plot") {
    cfg.plot = boolean(v);
  } else if (k == "K0") {
    cfg.K0 = matrix(v);
  } else if (k == "theta0") {
    cfg.theta0 = vector(v);
  } else if (k == "threads") {
    cfg.threads = static_cast<unsigned>(std::max<std::size_t>(1, count(v)));
  } else if (k == "dump_episodes") {
    cfg.dump_episodes = count(v);
  } else if (k == "env.A") {
    cfg.lqr.A = matrix(v);
  } else if (k == "env.B") {
    cfg.lqr.B = matrix(v);
  } else if (k == "env.Q") {
    cfg.lqr.Q = matrix(v);
  } else if (k == "env.R") {
    cfg.lqr.R = matrix(v);
  } else if (k == "env.mean0") {
    cfg.lqr.initial_mean = vector(v);
  } else if (k == "env.init_var") {
    cfg.lqr.initial_var = number(v);
    cfg.cartpend.initial_var = cfg.lqr.initial_var;
  } else if (k == "env.noise_var") {
    cfg.lqr.noise_var = number(v);
    cfg.cartpend.noise_var = cfg.lqr.noise_var;
  } else if (k == "env.cart_mass") {
    cfg.cartpend.cart_mass = number(v);
  } else if (k == "env.pole_mass") {
    cfg.cartpend.pole_mass = number(v);
  } else if (k == "env.length") {
    cfg.cartpend.length = number(v);
  } else if (k == "env.gravity") {
    cfg.cartpend.gravity = number(v);
  } else if (k == "env.dt") {
    cfg.cartpend.dt = number(v);
  } else if (k == "env.penalty_weight") {
    cfg.cartpend.penalty_weight = number(v);
  } else if (k == "env.action_weight") {
    cfg.cartpend.action_weight = number(v);
  } else if (k == "env.s0") {
    cfg.cartpend.initial_state = vector(v);
  } else {
    throw FieldError{"unknown key"};
  }
}

}  // namespace detail

/// Semantic checks; `where(key)` gives the location prefix of a key.
template <class Where>
inline void validate_config(const ExperimentConfig& cfg, Where where) {
  auto fail = [&](const std::string& key, const std::string& msg) {
    throw InputError(where(key) + "field '" + key + "': " + msg);
  };
  const double gamma = cfg.discount();
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    fail("gamma", "gamma = " + cfgparse::format_number(gamma) + " is outside the valid range (0,1]");
  }
  if (cfg.episodes < 1) fail("episodes", "must be at least 1");
  if (cfg.horizon < 1) fail("horizon", "must be at least 1");
  if (!(cfg.sigma >= 0.0)) fail("sigma", "must be >= 0");
  if (!(cfg.alpha_qn > 0.0)) fail("alpha_qn", "must be > 0");
  if (!(cfg.alpha_fo > 0.0)) fail("alpha_fo", "must be > 0");
  if (!(cfg.tol_theta >= 0.0)) fail("tol_theta", "must be >= 0");
  if (!(cfg.mu_min > 0.0)) fail("mu_min", "must be > 0");
  if (!(cfg.ridge >= 0.0)) fail("ridge", "must be >= 0");
  if (cfg.seeds.empty()) fail("seeds", "at least one seed is required");
  if (cfg.output.empty()) fail("output", "must not be empty");

  if (cfg.env == "lqr") {
    const LqrParams& p = cfg.lqr;
    const Index n = p.A.rows();
    if (p.A.cols() != n) fail("env.A", "must be square");
    if (p.B.rows() != n) fail("env.B", "must have as many rows as env.A");
    if (p.Q.rows() != n || p.Q.cols() != n) fail("env.Q", "must match the shape of env.A");
    if (p.R.rows() != p.B.cols() || p.R.cols() != p.B.cols()) {
      fail("env.R", "must be square with one row per column of env.B");
    }
    if (p.initial_mean.size() != n) fail("env.mean0", "must have one entry per state");
    if (!(p.initial_var >= 0.0)) fail("env.init_var", "must be >= 0");
    if (!(p.noise_var >= 0.0)) fail("env.noise_var", "must be >= 0");
    if (min_sym_eigenvalue(p.R) <= 0.0) fail("env.R", "must be positive definite");
    if (min_sym_eigenvalue(p.Q) < -1e-12) fail("env.Q", "must be positive semidefinite");
  } else {
    const CartPendParams& p = cfg.cartpend;
    if (!(p.cart_mass > 0.0)) fail("env.cart_mass", "must be > 0");
    if (!(p.pole_mass > 0.0)) fail("env.pole_mass", "must be > 0");
    if (!(p.length > 0.0)) fail("env.length", "must be > 0");
    if (!(p.dt > 0.0)) fail("env.dt", "must be > 0");
    if (!(p.noise_var >= 0.0)) fail("env.noise_var", "must be >= 0");
    if (!(p.initial_var >= 0.0)) fail("env.init_var", "must be >= 0");
    if (p.initial_state.size() != 4) fail("env.s0", "must have 4 entries (x_dot, x, phi_dot, phi)");
  }

  const Index ns = cfg.state_dim();
  const Index na = cfg.action_dim();
  if (cfg.K0 && cfg.theta0) fail("theta0", "give either K0 or theta0, not both");
  if (cfg.K0 && (cfg.K0->rows() != na || cfg.K0->cols() != ns)) {
    fail("K0", "must be " + std::to_string(na) + "x" + std::to_string(ns) + ", got " +
                   std::to_string(cfg.K0->rows()) + "x" + std::to_string(cfg.K0->cols()));
  }
  if (cfg.theta0 && cfg.theta0->size() != na * ns) {
    fail("theta0", "must have " + std::to_string(na * ns) + " entries, got " +
                       std::to_string(cfg.theta0->size()));
  }
}

inline void validate_config(const ExperimentConfig& cfg) {
  validate_config(cfg, [&](const std::string&) { return cfg.source + ": "; });
}

[[nodiscard]] inline ExperimentConfig parse_config(const std::string& text,
                                                   const std::string& source = "<config>") {
  ExperimentConfig cfg;
  cfg.source = source;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    const std::string line = cfgparse::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string loc = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw InputError(loc + "expected 'key = value', got '" + line + "'");
    cfgparse::Field f{cfgparse::trim(line.substr(0, eq)), cfgparse::trim(line.substr(eq + 1)),
                      line_no};
    if (f.key.empty()) throw InputError(loc + "missing key before '='");
    if (seen.count(f.key)) {
      throw InputError(loc + "field '" + f.key + "': already set on line " +
                       std::to_string(seen[f.key]));
    }
    seen[f.key] = line_no;
    try {
      detail::apply_field(cfg, f);
    } catch (const cfgparse::FieldError& e) {
      throw InputError(loc + "field '" + f.key + "': " + e.message);
    }
  }
  validate_config(cfg, [&](const std::string& key) {
    const auto it = seen.find(key);
    return it == seen.end() ? source + ": " : source + ":" + std::to_string(it->second) + ": ";
  });
  return cfg;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

/// The resolved configuration in the same grammar, every key spelled out.
[[nodiscard]] inline std::string echo_config(const ExperimentConfig& cfg) {
  using cfgparse::format_matrix;
  using cfgparse::format_number;
  using cfgparse::format_vector;
  std::ostringstream os;
  os << "env = " << cfg.env << '\n';
  os << "method = "
     << (cfg.methods.size() == 2 ? "both" : method_name(cfg.methods.front())) << '\n';
  os << "episodes = " << cfg.episodes << '\n';
  os << "horizon = " << cfg.horizon << '\n';
  os << "iterations = " << cfg.iterations << '\n';
  os << "gamma = " << format_number(cfg.discount()) << '\n';
  os << "sigma = " << format_number(cfg.sigma) << '\n';
  os << "alpha_qn = " << format_number(cfg.alpha_qn) << '\n';
  os << "alpha_fo = " << format_number(cfg.alpha_fo) << '\n';
  os << "tol_theta = " << format_number(cfg.tol_theta) << '\n';
  os << "mu_min = " << format_number(cfg.mu_min) << '\n';
  os << "ridge = " << format_number(cfg.ridge) << '\n';
  os << "max_param_dim = " << cfg.max_param_dim << '\n';
  os << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? ", " : "") << cfg.seeds[i];
  os << '\n';
  os << "output = " << cfg.output << '\n';
  os << "plot = " << (cfg.plot ? "true" : "false") << '\n';
  if (cfg.K0) os << "K0 = " << format_matrix(*cfg.K0) << '\n';
  if (cfg.theta0) os << "theta0 = " << format_vector(*cfg.theta0) << '\n';
  os << "threads = " << cfg.threads << '\n';
  os << "dump_episodes = " << cfg.dump_episodes << '\n';
  if (cfg.env == "lqr") {
    os << "env.A = " << format_matrix(cfg.lqr.A) << '\n';
    os << "env.B = " << format_matrix(cfg.lqr.B) << '\n';
    os << "env.Q = " << format_matrix(cfg.lqr.Q) << '\n';
    os << "env.R = " << format_matrix(cfg.lqr.R) << '\n';
    os << "env.mean0 = " << format_vector(cfg.lqr.initial_mean) << '\n';
    os << "env.init_var = " << format_number(cfg.lqr.initial_var) << '\n';
    os << "env.noise_var = " << format_number(cfg.lqr.noise_var) << '\n';
  } else {
    const CartPendParams& p = cfg.cartpend;
    os << "env.cart_mass = " << format_number(p.cart_mass) << '\n';
    os << "env.pole_mass = " << format_number(p.pole_mass) << '\n';
    os << "env.length = " << format_number(p.length) << '\n';
    os << "env.gravity = " << format_number(p.gravity) << '\n';
    os << "env.dt = " << format_number(p.dt) << '\n';
    os << "env.noise_var = " << format_number(p.noise_var) << '\n';
    os << "env.init_var = " << format_number(p.initial_var) << '\n';
    os << "env.penalty_weight = " << format_number(p.penalty_weight) << '\n';
    os << "env.action_weight = " << format_number(p.action_weight) << '\n';
    os << "env.s0 = " << format_vector(p.initial_state) << '\n';
  }
  return os.str();
}

[[nodiscard]] inline LqrParams resolved_lqr(const ExperimentConfig& cfg) {
  LqrParams p = cfg.lqr;
  p.gamma = cfg.discount();
  return p;
}

[[nodiscard]] inline CartPendParams resolved_cartpend(const ExperimentConfig& cfg) {
  CartPendParams p = cfg.cartpend;
  p.gamma = cfg.discount();
  return p;
}

/// The initial parameters: theta0, else vec(K0), else zeros.
[[nodiscard]] inline Vec initial_theta(const ExperimentConfig& cfg) {
  if (cfg.theta0) return *cfg.theta0;
  if (cfg.K0) return vec_mat(*cfg.K0);
  return Vec::Zero(cfg.state_dim() * cfg.action_dim());
}

/// Optimal parameters when a closed form exists (LQR), else nothing.
[[nodiscard]] inline std::optional<Vec> optimal_theta(const ExperimentConfig& cfg) {
  if (cfg.env != "lqr") return std::nullopt;
  try {
    return vec_mat(solve_discounted_riccati(cfg.lqr.A, cfg.lqr.B, cfg.lqr.Q, cfg.lqr.R,
                                            cfg.discount())
                       .K_star);
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

[[nodiscard]] inline TrainConfig make_train_config(const ExperimentConfig& cfg, Method method,
                                                   std::uint64_t seed,
                                                   const std::optional<Vec>& theta_star) {
  TrainConfig tc;
  tc.env = cfg.env == "lqr" ? make_lqr_env(resolved_lqr(cfg))
                            : make_cartpend_env(resolved_cartpend(cfg));
  tc.policy = std::make_shared<LinearPolicy>(cfg.state_dim(), cfg.action_dim());
  tc.features = quad_feature_map(cfg.state_dim());
  tc.theta0 = initial_theta(cfg);
  tc.method = method;
  tc.episodes = cfg.episodes;
  tc.horizon = cfg.horizon;
  tc.max_iters = cfg.iterations;
  tc.sigma = cfg.sigma;
  tc.alpha = method == Method::QuasiNewton ? cfg.alpha_qn : cfg.alpha_fo;
  tc.mu_min = cfg.mu_min;
  tc.tol_theta = cfg.tol_theta;
  tc.seed = seed;
  tc.threads = cfg.threads;
  tc.lstd.ridge = cfg.ridge;
  tc.lstd.max_param_dim = cfg.max_param_dim;
  tc.theta_star = theta_star;
  tc.dump_episodes = cfg.dump_episodes;
  return tc;
}

}  // namespace qnac
