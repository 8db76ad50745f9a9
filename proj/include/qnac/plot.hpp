#pragma once

// Static SVG line charts built from the run CSVs. Output depends only on the
// CSV contents, so regenerating from retained logs is byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qnac/errors.hpp"

namespace qnac {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::ptrdiff_t find(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  }

  [[nodiscard]] std::vector<double> column(const std::string& name) const {
    const std::ptrdiff_t c = find(name);
    if (c < 0) throw InputError("csv: no column '" + name + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
      const std::string& cell = row.at(static_cast<std::size_t>(c));
      out.push_back(cell == "nan" || cell == "-nan" ? std::numeric_limits<double>::quiet_NaN()
                                                    : std::stod(cell));
    }
    return out;
  }
};

[[nodiscard]] inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw InputError("'" + path.string() + "' is empty");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw InputError("'" + path.string() + "': row with " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  int color = 0;  // palette index
};

struct ChartSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_y = false;
};

namespace svg {

inline const char* color(int i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return palette[((i % 8) + 8) % 8];
}

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// One chart as an SVG group at (ox, oy) of size w x h.
inline std::string chart(const ChartSpec& spec, std::span<const Series> series, double ox,
                         double oy, double w, double h) {
  const double left = 70.0;
  const double right = 150.0;
  const double top = 30.0;
  const double bottom = 45.0;
  const double pw = w - left - right;
  const double ph = h - top - bottom;

  auto usable = [&](double y) { return std::isfinite(y) && (!spec.log_y || y > 0.0); };
  auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !usable(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return ox + left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return oy + top + (ymax - ty(y)) / (ymax - ymin) * ph; };

  std::ostringstream os;
  os << "<g>\n";
  os << "<text x=\"" << fmt("%.2f", ox + left + pw / 2) << "\" y=\"" << fmt("%.2f", oy + 18)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title) << "</text>\n";
  os << "<rect x=\"" << fmt("%.2f", ox + left) << "\" y=\"" << fmt("%.2f", oy + top)
     << "\" width=\"" << fmt("%.2f", pw) << "\" height=\"" << fmt("%.2f", ph)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double xv = xmin + (xmax - xmin) * t / ticks;
    const double xp = px(xv);
    os << "<line x1=\"" << fmt("%.2f", xp) << "\" y1=\"" << fmt("%.2f", oy + top + ph)
       << "\" x2=\"" << fmt("%.2f", xp) << "\" y2=\"" << fmt("%.2f", oy + top + ph + 4)
       << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << fmt("%.2f", xp) << "\" y=\"" << fmt("%.2f", oy + top + ph + 16)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt("%.4g", xv) << "</text>\n";
    const double yt = ymin + (ymax - ymin) * t / ticks;
    const double yp = oy + top + (ymax - yt) / (ymax - ymin) * ph;
    const double label = spec.log_y ? std::pow(10.0, yt) : yt;
    os << "<line x1=\"" << fmt("%.2f", ox + left - 4) << "\" y1=\"" << fmt("%.2f", yp)
       << "\" x2=\"" << fmt("%.2f", ox + left + pw) << "\" y2=\"" << fmt("%.2f", yp)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << fmt("%.2f", ox + left - 6) << "\" y=\"" << fmt("%.2f", yp + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << fmt("%.3g", label) << "</text>\n";
  }
  os << "<text x=\"" << fmt("%.2f", ox + left + pw / 2) << "\" y=\"" << fmt("%.2f", oy + h - 8)
     << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(spec.xlabel) << "</text>\n";
  os << "<text x=\"" << fmt("%.2f", ox + 14) << "\" y=\"" << fmt("%.2f", oy + top + ph / 2)
     << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 "
     << fmt("%.2f", ox + 14) << ' ' << fmt("%.2f", oy + top + ph / 2) << ")\">"
     << escape(spec.ylabel + (spec.log_y ? " (log)" : "")) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    std::string points;
    auto flush = [&]() {
      if (points.empty()) return;
      os << "<polyline fill=\"none\" stroke=\"" << color(s.color) << "\" stroke-width=\"1.5\""
         << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"" << points << "\"/>\n";
      points.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !usable(s.y[i])) {
        flush();
        continue;
      }
      points += (points.empty() ? "" : " ") + fmt("%.2f", px(s.x[i])) + "," +
                fmt("%.2f", py(s.y[i]));
    }
    flush();
    const double ly = oy + top + 12 + 16 * static_cast<double>(k);
    const double lx = ox + left + pw + 10;
    os << "<line x1=\"" << fmt("%.2f", lx) << "\" y1=\"" << fmt("%.2f", ly) << "\" x2=\""
       << fmt("%.2f", lx + 20) << "\" y2=\"" << fmt("%.2f", ly) << "\" stroke=\""
       << color(s.color) << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    os << "<text x=\"" << fmt("%.2f", lx + 24) << "\" y=\"" << fmt("%.2f", ly + 3)
       << "\" font-size=\"10\">" << escape(s.label) << "</text>\n";
  }
  os << "</g>\n";
  return os.str();
}

inline std::string document(double w, double h, const std::string& body) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", w) << "\" height=\""
     << fmt("%.0f", h) << "\" viewBox=\"0 0 " << fmt("%.0f", w) << ' ' << fmt("%.0f", h)
     << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << body << "</svg>\n";
  return os.str();
}

}  // namespace svg

[[nodiscard]] inline std::string svg_line_chart(const ChartSpec& spec,
                                                std::span<const Series> series) {
  return svg::document(720, 420, svg::chart(spec, series, 0, 0, 720, 420));
}

/// Panels stacked vertically, one chart each.
[[nodiscard]] inline std::string svg_panels(std::span<const ChartSpec> specs,
                                            std::span<const std::vector<Series>> panels) {
  const double w = 720;
  const double h = 260;
  std::string body;
  for (std::size_t i = 0; i < specs.size() && i < panels.size(); ++i) {
    body += svg::chart(specs[i], panels[i], 0, h * static_cast<double>(i), w, h);
  }
  return svg::document(w, h * static_cast<double>(std::max<std::size_t>(1, specs.size())), body);
}

struct RunFile {
  std::string method;
  std::string seed;
  std::filesystem::path path;
};

/// `<method>_<seed>.csv` files of a run directory, sorted by name.
[[nodiscard]] inline std::vector<RunFile> list_run_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
  std::vector<RunFile> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    for (const char* m : {"quasi-newton", "first-order"}) {
      const std::string prefix = std::string(m) + "_";
      if (stem.rfind(prefix, 0) == 0 && stem.size() > prefix.size()) {
        out.push_back(RunFile{m, stem.substr(prefix.size()), entry.path()});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const RunFile& a, const RunFile& b) { return a.path < b.path; });
  return out;
}

namespace detail {

inline int method_color(const std::string& method, std::size_t nth) {
  return (method == "quasi-newton" ? 0 : 1) + 2 * static_cast<int>(nth % 4);
}

}  // namespace detail

/// Writes grad_norm.svg, theta_dist.svg, performance.svg and trajectories.svg
/// into `dir`; returns the paths written.
inline std::vector<std::filesystem::path> plot_run_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const std::vector<RunFile> runs = list_run_files(dir);
  if (runs.empty()) throw InputError("no run CSV files in '" + dir.string() + "'");

  std::vector<Series> grad;
  std::vector<Series> dist;
  std::vector<Series> perf;
  std::map<std::string, std::size_t> per_method;
  for (const RunFile& r : runs) {
    const CsvTable t = read_csv(r.path);
    const std::vector<double> it = t.column("iter");
    const int c = detail::method_color(r.method, per_method[r.method]++);
    const std::string label = r.method + " seed " + r.seed;
    grad.push_back(Series{label, it, t.column("grad_norm"), r.method == "first-order", c});
    dist.push_back(Series{label, it, t.column("dist_to_opt"), r.method == "first-order", c});
    perf.push_back(Series{label, it, t.column("J_hat"), r.method == "first-order", c});
  }

  std::vector<fs::path> written;
  auto save = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write '" + p.string() + "'");
    out << text;
    written.push_back(p);
  };
  save("grad_norm.svg",
       svg_line_chart({"Policy-gradient norm", "policy update", "||grad J||", true}, grad));
  save("theta_dist.svg",
       svg_line_chart({"Distance to optimal parameters", "policy update", "||theta - theta*||",
                       true},
                      dist));
  save("performance.svg",
       svg_line_chart({"Performance (batch discounted return)", "policy update", "J", false},
                      perf));

  // First and last batch, episode 0, of the first seed of each method.
  std::vector<ChartSpec> specs;
  std::vector<std::vector<Series>> panels;
  std::map<std::string, bool> done;
  for (const RunFile& r : runs) {
    if (done[r.method]) continue;
    done[r.method] = true;
    for (const char* when : {"first", "last"}) {
      const fs::path p = dir / "trajectories" /
                         (r.method + "_" + r.seed + "_" + when + ".csv");
      if (!fs::exists(p)) continue;
      const CsvTable t = read_csv(p);
      const std::vector<double> ep = t.column("episode");
      const std::vector<double> k = t.column("k");
      for (std::size_t col = 0; col < t.header.size(); ++col) {
        const std::string& name = t.header[col];
        if (name.rfind("s_", 0) != 0 || name.rfind("s_next", 0) == 0) continue;
        const std::vector<double> v = t.column(name);
        Series s{r.method + " " + when, {}, {}, std::string(when) == "first",
                 r.method == "quasi-newton" ? 0 : 1};
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (ep[i] != ep.front()) continue;
          s.x.push_back(k[i]);
          s.y.push_back(v[i]);
        }
        const std::size_t idx = static_cast<std::size_t>(std::stoul(name.substr(2)));
        if (panels.size() <= idx) {
          panels.resize(idx + 1);
          specs.resize(idx + 1);
        }
        specs[idx] = ChartSpec{"State " + name + " (first vs last batch)", "time step k", name,
                               false};
        panels[idx].push_back(std::move(s));
      }
    }
  }
  save("trajectories.svg", svg_panels(specs, panels));
  return written;
}

}  // namespace qnac
