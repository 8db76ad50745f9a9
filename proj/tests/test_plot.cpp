#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qnac/plot.hpp"
#include "qnac/trainer.hpp"

using namespace qnac;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("qnac_plot_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_run(const fs::path& file, Method m, double scale) {
  std::vector<RunRecord> recs;
  for (std::size_t i = 1; i <= 5; ++i) {
    RunRecord r;
    r.iter = i;
    r.theta = Vec::Constant(2, scale / static_cast<double>(i));
    r.grad_norm = scale * std::pow(0.5, static_cast<double>(i));
    r.J_hat = 10.0 - static_cast<double>(i);
    r.dist_to_opt = 1.0 / static_cast<double>(i);
    r.method = m;
    recs.push_back(r);
  }
  std::ofstream out(file);
  write_run_csv(out, recs, 2);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ReadCsv, ColumnsAndNan) {
  const fs::path d = scratch_dir("read");
  write_run(d / "quasi-newton_1.csv", Method::QuasiNewton, 1.0);
  const CsvTable t = read_csv(d / "quasi-newton_1.csv");
  EXPECT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.column("iter"), (std::vector<double>{1, 2, 3, 4, 5}));
  EXPECT_TRUE(std::isnan(t.column("cond_AW")[0]));
  EXPECT_THROW((void)t.column("nope"), InputError);
}

TEST(ListRunFiles, MatchesMethodSeedNames) {
  const fs::path d = scratch_dir("list");
  write_run(d / "quasi-newton_2.csv", Method::QuasiNewton, 1.0);
  write_run(d / "first-order_10.csv", Method::FirstOrder, 1.0);
  std::ofstream(d / "oracle.csv") << "name,row,col,value\n";
  const auto runs = list_run_files(d);
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0].method, "first-order");
  EXPECT_EQ(runs[0].seed, "10");
  EXPECT_EQ(runs[1].method, "quasi-newton");
  EXPECT_THROW((void)list_run_files(d / "missing"), InputError);
}

TEST(PlotRunDir, WritesFourChartsDeterministically) {
  const fs::path d = scratch_dir("plot");
  write_run(d / "quasi-newton_1.csv", Method::QuasiNewton, 1.0);
  write_run(d / "first-order_1.csv", Method::FirstOrder, 3.0);
  const auto written = plot_run_dir(d);
  ASSERT_EQ(written.size(), 4u);
  std::vector<std::string> first;
  for (const auto& p : written) {
    const std::string text = slurp(p);
    EXPECT_EQ(text.rfind("<svg", 0) == 0 || text.rfind("<?xml", 0) == 0, true) << p;
    EXPECT_NE(text.find("</svg>"), std::string::npos);
    first.push_back(text);
  }
  EXPECT_NE(first[0].find("quasi-newton seed 1"), std::string::npos);
  const auto again = plot_run_dir(d);
  for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(slurp(again[i]), first[i]);
}

TEST(PlotRunDir, EmptyDirectoryIsInputError) {
  EXPECT_THROW((void)plot_run_dir(scratch_dir("empty")), InputError);
}

TEST(SvgLineChart, EscapesLabelsAndSkipsNonFinite) {
  Series s{"a<b & c", {1, 2, 3}, {1.0, std::nan(""), 4.0}, false, 0};
  const std::string svg = svg_line_chart({"t", "x", "y", true}, std::vector<Series>{s});
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
}
