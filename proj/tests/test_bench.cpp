#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "perfpeel/bench.hpp"
#include "perfpeel/errors.hpp"

using namespace perfpeel;
namespace fs = std::filesystem;

namespace {

ExperimentGrid tiny_grid(const std::string& name) {
  ExperimentGrid g = default_grid(name);
  if (name == "exp_hard") g.ns = {16, 32};
  if (name == "poisson") {
    g.ns = {64};
    g.ks = {2};
    g.betas = {0.5};
  }
  if (name == "kernel") {
    g.ns = {64};
    g.ks = {2};
  }
  if (name == "recovery") {
    g.ns = {32};
    g.ks = {2};
  }
  return g;
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  write_results_csv(out, r);
  return out.str();
}

}  // namespace

TEST(Presets, MatchTableFormulas) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Index k = 1 + Index(rng.uniform_index(12));
    const double beta = 0.05 + 0.95 * rng.uniform();
    const Index sR = Index(std::ceil(double(k) / beta));
    const Index sL = Index(std::ceil(double(k) / (beta * beta)));
    const Index t = Index(std::ceil(1.0 / beta));
    const PeelConfig gn1 = preset_config(Preset::GN1, k, beta);
    EXPECT_EQ(gn1.variant, Variant::generalized_nystrom);
    EXPECT_EQ(std::tuple(gn1.s_R, gn1.t_R, gn1.s_L, gn1.t_L), std::tuple(sR, Index(1), sL, Index(1)));
    const PeelConfig gn2 = preset_config(Preset::GN2, k, beta);
    EXPECT_EQ(std::tuple(gn2.s_R, gn2.t_R, gn2.s_L, gn2.t_L), std::tuple(sR, t, sL, Index(1)));
    const PeelConfig r1 = preset_config(Preset::RSVD1, k, beta);
    EXPECT_EQ(r1.variant, Variant::rsvd);
    EXPECT_EQ(std::tuple(r1.s_R, r1.t_R, r1.t_L), std::tuple(sR, Index(1), Index(1)));
    const PeelConfig r2 = preset_config(Preset::RSVD2, k, beta);
    EXPECT_EQ(std::tuple(r2.s_R, r2.t_R, r2.t_L), std::tuple(sR, t, t));
    EXPECT_EQ(*r2.beta, beta);
  }
}

TEST(Presets, CeilingIgnoresRepresentationError) {
  EXPECT_EQ(ceil_param(8.0 / 0.125), 64);
  EXPECT_EQ(ceil_param(1.0 / 0.1), 10);
  EXPECT_EQ(ceil_param(2.5), 3);
  EXPECT_EQ(preset_config(Preset::GN1, 8, 0.125).s_L, 512);
  EXPECT_EQ(parse_preset("RSVD2"), Preset::RSVD2);
  EXPECT_THROW(parse_preset("GN3"), ConfigError);
}

TEST(RelativeError, Examples) {
  EXPECT_EQ(relative_error(3.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(4.0, 2.0), 1.0);
  EXPECT_NEAR(relative_error(std::sqrt(8.0), std::sqrt(4.0)), std::sqrt(2.0) - 1.0, 1e-15);
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_TRUE(std::isinf(relative_error(1.0, 0.0)));
}

TEST(Csv, EmptyResultIsHeaderOnly) {
  const std::string text = csv_of({});
  EXPECT_EQ(text,
            "experiment,preset,n,k,beta,trial,relative_error,absolute_error,forward_queries,"
            "transpose_queries,seed\n");
  std::istringstream in(text);
  EXPECT_TRUE(read_results_csv(in).empty());
}

TEST(Csv, RowRoundTripsLosslessly) {
  ResultRow r;
  r.experiment = "poisson";
  r.preset = "GN2";
  r.n = 1024;
  r.k = 8;
  r.beta = 1.0 / 3.0;
  r.trial = 7;
  r.relative_error = 0.1 + 0.2;
  r.absolute_error = 1e-300 / 3.0;
  r.forward_queries = 123456789012;
  r.transpose_queries = 42;
  r.seed = 18446744073709551615ull;
  ExperimentResult res;
  res.rows = {r};
  std::istringstream in(csv_of(res));
  const auto back = read_results_csv(in);
  ASSERT_EQ(back.size(), 1u);
  const ResultRow& b = back[0];
  EXPECT_EQ(b.experiment, r.experiment);
  EXPECT_EQ(b.preset, r.preset);
  EXPECT_EQ(b.n, r.n);
  EXPECT_EQ(b.k, r.k);
  EXPECT_EQ(b.beta, r.beta);
  EXPECT_EQ(b.trial, r.trial);
  EXPECT_EQ(b.relative_error, r.relative_error);
  EXPECT_EQ(b.absolute_error, r.absolute_error);
  EXPECT_EQ(b.forward_queries, r.forward_queries);
  EXPECT_EQ(b.transpose_queries, r.transpose_queries);
  EXPECT_EQ(b.seed, r.seed);
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_results_csv(bad_header), FormatError);
  std::istringstream short_row(
      "experiment,preset,n,k,beta,trial,relative_error,absolute_error,forward_queries,"
      "transpose_queries,seed\npoisson,GN1,16\n");
  EXPECT_THROW(read_results_csv(short_row), FormatError);
}

TEST(Experiments, QueryCountsMatchClosedForm) {
  for (const std::string name : {"exp_hard", "hard_block", "recovery", "poisson", "kernel"}) {
    const ExperimentResult r = run_experiment(name, tiny_grid(name), 2, 5);
    ASSERT_FALSE(r.rows.empty()) << name;
    for (const ResultRow& row : r.rows) {
      const QueryCounts c = expected_counts(preset_config(parse_preset(row.preset), row.k, row.beta), row.n);
      EXPECT_EQ(row.forward_queries, c.forward) << name << " " << row.preset;
      EXPECT_EQ(row.transpose_queries, c.transpose) << name << " " << row.preset;
      EXPECT_GE(row.absolute_error, 0.0);
      EXPECT_GE(row.relative_error, -1e-9) << name;
    }
  }
}

TEST(Experiments, OneRowPerCellAndTrial) {
  const ExperimentGrid g = tiny_grid("exp_hard");
  const ExperimentResult r = run_experiment("exp_hard", g, 3, 1);
  EXPECT_EQ(r.rows.size(), g.presets.size() * g.ns.size() * g.ks.size() * g.betas.size() * 3);
  std::map<std::uint64_t, int> seeds;
  for (const auto& row : r.rows) ++seeds[row.seed];
  EXPECT_EQ(seeds.size(), r.rows.size());
}

TEST(Experiments, DeterministicBytes) {
  const ExperimentGrid g = tiny_grid("kernel");
  EXPECT_EQ(csv_of(run_experiment("kernel", g, 2, 9)), csv_of(run_experiment("kernel", g, 2, 9)));
  EXPECT_NE(csv_of(run_experiment("kernel", g, 2, 9)), csv_of(run_experiment("kernel", g, 2, 10)));
}

TEST(Experiments, RecoveryIsExact) {
  const ExperimentResult r = run_experiment("recovery", tiny_grid("recovery"), 2, 3);
  for (const auto& row : r.rows) EXPECT_LE(row.relative_error, 1e-8) << row.preset;
}

TEST(Experiments, GuardsAndUnknownNames) {
  ExperimentGrid g = tiny_grid("exp_hard");
  g.ns = {24};
  EXPECT_THROW(run_experiment("exp_hard", g, 1, 0), ConfigError);
  g.ns = {8192};
  EXPECT_THROW(run_experiment("exp_hard", g, 1, 0), ConfigError);
  EXPECT_THROW(run_experiment("nope", g, 1, 0), ConfigError);
  EXPECT_THROW(default_grid("nope"), ConfigError);
}

TEST(Experiments, BoundChecksReportRows) {
  const ExperimentResult r = run_experiment("bound_checks", {}, 1, 2);
  ASSERT_EQ(r.checks.size(), 3u);
  EXPECT_EQ(r.rows.size(), r.checks.size());
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Emit, CsvAndPlotdata) {
  const fs::path dir = fs::temp_directory_path() / "perfpeel_emit_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ExperimentResult r = run_experiment("exp_hard", tiny_grid("exp_hard"), 2, 4);
  emit(r, (dir / "out.csv").string(), OutputFormat::csv);
  std::ifstream in(dir / "out.csv");
  EXPECT_EQ(read_results_csv(in).size(), r.rows.size());

  emit(r, (dir / "plot").string(), OutputFormat::plotdata);
  std::ifstream series(dir / "plot" / "exp_hard_RSVD1_k1.dat");
  ASSERT_TRUE(series.good());
  std::string header, line;
  std::getline(series, header);
  EXPECT_EQ(header.front(), '#');
  int lines = 0;
  while (std::getline(series, line)) ++lines;
  EXPECT_EQ(lines, 2);  // n = 16, 32
  EXPECT_EQ(parse_format("plotdata"), OutputFormat::plotdata);
  EXPECT_THROW(parse_format("xml"), ConfigError);
  EXPECT_THROW(emit(r, (dir / "missing" / "x.csv").string(), OutputFormat::csv), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Experiments, KernelErrorImprovesWithRank) {
  // Trial-averaged absolute error at k is at most the one at k - 2,
  // within two standard errors.
  ExperimentGrid g = default_grid("kernel");
  g.ns = {256};
  g.betas = {0.25};
  g.ks = {2, 4, 6, 8};
  g.presets = {"GN1"};
  const ExperimentResult r = run_experiment("kernel", g, 5, 17);
  std::map<Index, std::vector<double>> by_k;
  for (const auto& row : r.rows) by_k[row.k].push_back(row.absolute_error);
  const auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / double(v.size() - 1) / double(v.size()))};
  };
  for (Index k : {4, 8}) {
    const auto [m, se] = stats(by_k[k]);
    const auto [m2, se2] = stats(by_k[k - 2]);
    EXPECT_LE(m, m2 + 2.0 * std::hypot(se, se2)) << "k = " << k;
  }
}
