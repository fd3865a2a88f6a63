#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perfpeel/bench.hpp"
#include "perfpeel/csv.hpp"
#include "perfpeel/errors.hpp"
#include "perfpeel/hodlr.hpp"
#include "perfpeel/linops.hpp"
#include "perfpeel/peel.hpp"
#include "perfpeel/rng.hpp"

namespace fs = std::filesystem;
using namespace perfpeel;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct OperatorArgs {
  std::string kind = "poisson";
  std::string input;
  Index n = 1024;
  double eta = 1e8;
  std::uint64_t matrix_seed = 0;
};

struct Source {
  LinearOperator op;
  std::optional<MatrixXd> dense;
};

Index perfect_square_root(Index n) {
  const auto t = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (t * t != n) throw ConfigError("poisson needs n = t^2, got n = " + std::to_string(n));
  return t;
}

int log2_exact(Index n) {
  int levels = 0;
  while ((Index{1} << levels) < n) ++levels;
  if ((Index{1} << levels) != n) throw ConfigError("exp_hard needs a power-of-two n");
  return levels;
}

Source load_source(const OperatorArgs& a, Index k) {
  const auto with_dense = [](MatrixXd M, const std::string& name) {
    LinearOperator op = make_dense_operator(M, name);
    return Source{op, std::move(M)};
  };
  if (a.kind == "poisson") {
    LinearOperator op = make_poisson_operator(perfect_square_root(a.n));
    if (a.n > kMaxBenchSize) return Source{op, std::nullopt};
    MatrixXd A = materialize(op);
    op.reset_counter();
    return Source{op, std::move(A)};
  }
  if (a.kind == "kernel") {
    const PointCloud cloud = helix_points(a.n, a.matrix_seed);
    LinearOperator op = make_kernel_operator(cloud);
    if (a.n > kMaxBenchSize) return Source{op, std::nullopt};
    return Source{op, kernel_matrix(cloud)};
  }
  if (a.kind == "points") {
    if (a.input.empty()) throw ConfigError("--operator points needs --input");
    const PointCloud cloud = read_points_csv(a.input);
    LinearOperator op = make_kernel_operator(cloud);
    if (cloud.size() > kMaxBenchSize) return Source{op, std::nullopt};
    return Source{op, kernel_matrix(cloud)};
  }
  if (a.kind == "dense") {
    if (a.input.empty()) throw ConfigError("--operator dense needs --input");
    MatrixXd A = read_matrix_csv(a.input);
    if (A.rows() != A.cols()) throw DimensionError("dense input must be square");
    return with_dense(std::move(A), "dense");
  }
  if (a.kind == "hodlr") {
    if (a.input.empty()) throw ConfigError("--operator hodlr needs --input");
    HodlrMatrix H = load_hodlr(a.input);
    if (H.size() > kMaxBenchSize) return Source{as_operator(H), std::nullopt};
    return with_dense(to_dense(H), "hodlr");
  }
  if (a.kind == "hard_block") return with_dense(hard_block_matrix(k, a.eta), "hard_block");
  if (a.kind == "exp_hard") return with_dense(exp_hard_matrix(log2_exact(a.n), a.eta), "exp_hard");
  throw ConfigError("unknown operator '" + a.kind + "'");
}

void add_operator_options(CLI::App* cmd, OperatorArgs& a) {
  cmd->add_option("--operator", a.kind, "Operator source")
      ->check(CLI::IsMember({"poisson", "kernel", "points", "dense", "hodlr", "hard_block", "exp_hard"}))
      ->capture_default_str();
  cmd->add_option("--input", a.input, "CSV (points or dense matrix) or HODLR file")->capture_default_str();
  cmd->add_option("--n", a.n, "Operator size (poisson: t^2, exp_hard: power of two)")
      ->capture_default_str();
  cmd->add_option("--eta", a.eta, "Scale of the hard instances")->capture_default_str();
  cmd->add_option("--matrix-seed", a.matrix_seed, "Seed of the kernel point cloud")
      ->capture_default_str();
}

// Resolved configuration next to an output file, so runs can be repeated.
// The stamp is a valid --config file for the same subcommand.
void stamp_config(const CLI::App& cmd, const fs::path& out) {
  const fs::path meta = fs::is_directory(out) ? out / "run.meta.ini" : fs::path(out.string() + ".meta.ini");
  std::ofstream f(meta);
  if (!f) throw std::runtime_error("cannot write " + meta.string());
  f << '[' << cmd.get_name() << "]\n" << cmd.config_to_str(true, false);
}

void write_report(std::ostream& out, const PeelConfig& cfg, const PeelReport& r, Index n) {
  out << "variant," << variant_name(cfg.variant) << '\n'
      << "n," << n << '\n'
      << "k," << cfg.k << '\n'
      << "s_R," << cfg.s_R << '\n'
      << "t_R," << cfg.t_R << '\n'
      << "s_L," << cfg.s_L << '\n'
      << "t_L," << cfg.t_L << '\n'
      << "seed," << cfg.seed << '\n'
      << "truncate," << (cfg.truncate ? 1 : 0) << '\n'
      << "forward_queries," << r.counts.forward << '\n'
      << "transpose_queries," << r.counts.transpose << '\n'
      << "expected_forward," << r.expected.forward << '\n'
      << "expected_transpose," << r.expected.transpose << '\n'
      << "probe_forward," << r.probe_forward << '\n';
  if (r.error) out << "absolute_error," << format_double(*r.error) << '\n';
  if (r.opt) out << "opt," << format_double(*r.opt) << '\n';
  if (r.error && r.opt) out << "relative_error," << format_double(relative_error(*r.error, *r.opt)) << '\n';
  for (const auto& v : r.violations) out << "violation,\"" << v << "\"\n";
}

struct ApproxArgs {
  OperatorArgs source;
  Index k = 8;
  double beta = 0.0;  // 0: unset
  std::string preset;
  std::string variant = "generalized_nystrom";
  Index s_R = 0, t_R = 0, s_L = 0, t_L = 0;
  std::uint64_t seed = 0;
  std::string out = "approx.hodlr";
  std::string report;
  bool no_truncate = false;
  bool allow_invalid = false;
};

PeelConfig resolve_config(const ApproxArgs& a) {
  PeelConfig cfg;
  if (!a.preset.empty()) {
    cfg = preset_config(parse_preset(a.preset), a.k, a.beta > 0.0 ? a.beta : 0.5);
  } else if (a.beta > 0.0 && a.beta < 1.0) {
    cfg = params_for_beta(a.k, a.beta, parse_variant(a.variant));
  } else {
    cfg.k = a.k;
    cfg.variant = parse_variant(a.variant);
    if (a.beta > 0.0) cfg.beta = a.beta;
    cfg.s_R = a.k + 2;
    cfg.s_L = 2 * cfg.s_R;
  }
  if (a.s_R > 0) cfg.s_R = a.s_R;
  if (a.t_R > 0) cfg.t_R = a.t_R;
  if (a.s_L > 0) cfg.s_L = a.s_L;
  if (a.t_L > 0) cfg.t_L = a.t_L;
  if (cfg.variant == Variant::rsvd && a.s_L == 0) cfg.s_L = cfg.s_R;
  cfg.seed = a.seed;
  cfg.truncate = !a.no_truncate;
  cfg.validation = a.allow_invalid ? Validation::advisory : Validation::strict;
  return cfg;
}

int run_approx(const CLI::App& cmd, const ApproxArgs& a) {
  const PeelConfig cfg = resolve_config(a);
  Source src = load_source(a.source, cfg.k);
  PeelOptions opts;
  if (src.dense) {
    opts.dense_reference = &*src.dense;
    opts.opt = (*src.dense - to_dense(best_hodlr(*src.dense, cfg.k))).norm();
  }
  const PeelResult result = peel(src.op, cfg, opts);
  save_hodlr(a.out, result.hodlr);
  stamp_config(cmd, a.out);
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw std::runtime_error("cannot write " + a.report);
    write_report(f, cfg, result.report, src.op.size());
  }
  write_report(std::cout, cfg, result.report, src.op.size());
  std::cout << "seconds," << format_double(result.report.seconds) << '\n';
  return 0;
}

struct RecoverArgs {
  OperatorArgs source;
  Index k = 2;
  std::uint64_t seed = 0;
  std::string out = "recovered.hodlr";
};

int run_recover(const CLI::App& cmd, const RecoverArgs& a) {
  Source src = load_source(a.source, a.k);
  PeelReport report;
  HodlrMatrix H = [&] {
    try {
      return exact_recover(src.op, a.k, a.seed, &report);
    } catch (const StructureViolation& e) {
      std::cerr << "structure violation: " << e.what() << '\n';
      throw;
    }
  }();
  save_hodlr(a.out, H);
  stamp_config(cmd, a.out);
  std::cout << "forward_queries," << report.counts.forward << '\n'
            << "transpose_queries," << report.counts.transpose << '\n'
            << "probe_forward," << report.probe_forward << '\n';
  if (src.dense) {
    const double rel = (*src.dense - to_dense(H)).norm() / std::max(src.dense->norm(), 1e-300);
    std::cout << "relative_error," << format_double(rel) << '\n';
  }
  return 0;
}

struct BenchArgs {
  std::string experiment;
  std::vector<Index> ks;
  std::vector<double> betas;
  std::vector<std::string> presets;
  std::vector<Index> ns;
  int trials = 20;
  std::uint64_t seed = 0;
  std::string out = "results.csv";
  std::string format = "csv";
  double eta = 1e8;
  bool no_truncate = false;
  bool allow_invalid = false;
};

// Records grid defaults as if they had been given, so the stamp is complete.
template <typename T, typename Format>
void fill_results(CLI::App& cmd, const std::string& name, const std::vector<T>& values, Format fmt) {
  CLI::Option* opt = cmd.get_option(name);
  if (opt->count() > 0) return;
  for (const T& v : values) opt->add_result(fmt(v));
}

int run_bench(CLI::App& cmd, const BenchArgs& a) {
  ExperimentGrid grid = default_grid(a.experiment);
  if (!a.ks.empty()) grid.ks = a.ks;
  if (!a.betas.empty()) grid.betas = a.betas;
  if (!a.presets.empty()) grid.presets = a.presets;
  if (!a.ns.empty()) grid.ns = a.ns;
  const auto to_text = [](auto v) { return std::to_string(v); };
  fill_results(cmd, "--k", grid.ks, to_text);
  fill_results(cmd, "--beta", grid.betas, [](double v) { return format_double(v); });
  fill_results(cmd, "--preset", grid.presets, [](const std::string& v) { return v; });
  fill_results(cmd, "--n", grid.ns, to_text);
  grid.eta = a.eta;
  grid.truncate = !a.no_truncate;
  grid.validation = a.allow_invalid ? Validation::off : Validation::advisory;
  const ExperimentResult result = run_experiment(a.experiment, grid, a.trials, a.seed);
  emit(result, a.out, parse_format(a.format));
  stamp_config(cmd, a.out);
  std::cout << result.rows.size() << " rows written to " << a.out << '\n';
  bool ok = true;
  for (const auto& c : result.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : kExitCheckFailed;
}

struct CheckArgs {
  std::uint64_t seed = 0;
  std::string out;
};

int run_check_bounds(const CLI::App& cmd, const CheckArgs& a) {
  const std::vector<CheckOutcome> checks = run_bound_checks(a.seed);
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write " + a.out);
    f << "name,passed,observed,limit\n";
    for (const auto& c : checks) {
      f << c.name << ',' << (c.passed ? 1 : 0) << ',' << format_double(c.observed) << ','
        << format_double(c.limit) << '\n';
    }
    stamp_config(cmd, a.out);
  }
  return ok ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-free HODLR(k) approximation by peeling"};
  app.set_config("--config", "", "INI file with one section per subcommand");
  app.require_subcommand(1);

  ApproxArgs approx;
  CLI::App* cmd_approx = app.add_subcommand("approx", "Approximate one operator and write a HODLR file");
  add_operator_options(cmd_approx, approx.source);
  cmd_approx->add_option("--k", approx.k, "Rank parameter")->capture_default_str();
  cmd_approx->add_option("--beta", approx.beta, "Oversampling parameter in (0, 1]; 0 leaves it unset")
      ->capture_default_str();
  cmd_approx->add_option("--preset", approx.preset, "GN1, GN2, RSVD1 or RSVD2")
      ->check(CLI::IsMember({"GN1", "GN2", "RSVD1", "RSVD2"}));
  cmd_approx->add_option("--variant", approx.variant, "generalized_nystrom or rsvd")
      ->check(CLI::IsMember({"generalized_nystrom", "gn", "rsvd"}))
      ->capture_default_str();
  cmd_approx->add_option("--s-R", approx.s_R, "Right sketch size (0: derived)")->capture_default_str();
  cmd_approx->add_option("--t-R", approx.t_R, "Right perforation width (0: derived)")->capture_default_str();
  cmd_approx->add_option("--s-L", approx.s_L, "Left sketch size (0: derived)")->capture_default_str();
  cmd_approx->add_option("--t-L", approx.t_L, "Left perforation width (0: derived)")->capture_default_str();
  cmd_approx->add_option("--seed", approx.seed)->capture_default_str();
  cmd_approx->add_option("--out", approx.out, "HODLR output file")->capture_default_str();
  cmd_approx->add_option("--report", approx.report, "Report CSV (key,value)")->capture_default_str();
  cmd_approx->add_flag("--no-truncate", approx.no_truncate, "Keep full-rank factors");
  cmd_approx->add_flag("--allow-invalid-config", approx.allow_invalid,
                       "Run even when the sketch sizes violate the validity conditions for beta");

  RecoverArgs recover;
  CLI::App* cmd_recover = app.add_subcommand("recover", "Exact recovery of a HODLR(k) operator");
  add_operator_options(cmd_recover, recover.source);
  cmd_recover->add_option("--k", recover.k)->capture_default_str();
  cmd_recover->add_option("--seed", recover.seed)->capture_default_str();
  cmd_recover->add_option("--out", recover.out)->capture_default_str();

  BenchArgs bench;
  CLI::App* cmd_bench = app.add_subcommand("bench", "Run an experiment grid");
  cmd_bench->add_option("experiment", bench.experiment)
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  cmd_bench->add_option("--k", bench.ks, "Rank parameters");
  cmd_bench->add_option("--beta", bench.betas, "Oversampling parameters");
  cmd_bench->add_option("--preset", bench.presets, "Presets")
      ->check(CLI::IsMember({"GN1", "GN2", "RSVD1", "RSVD2"}));
  cmd_bench->add_option("--n", bench.ns, "Operator sizes");
  cmd_bench->add_option("--trials", bench.trials)->capture_default_str();
  cmd_bench->add_option("--seed", bench.seed)->capture_default_str();
  cmd_bench->add_option("--out", bench.out, "CSV file, or directory for plotdata")
      ->capture_default_str();
  cmd_bench->add_option("--format", bench.format)
      ->check(CLI::IsMember({"csv", "plotdata"}))
      ->capture_default_str();
  cmd_bench->add_option("--eta", bench.eta, "Scale of the hard instances")->capture_default_str();
  cmd_bench->add_flag("--no-truncate", bench.no_truncate);
  cmd_bench->add_flag("--allow-invalid-config", bench.allow_invalid,
                      "Skip the validity check instead of recording violations");

  CheckArgs check;
  CLI::App* cmd_check = app.add_subcommand("check-bounds", "Run the perturbation and expectation checks");
  cmd_check->add_option("--seed", check.seed)->capture_default_str();
  cmd_check->add_option("--out", check.out, "CSV of check outcomes")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_approx) return run_approx(*cmd_approx, approx);
    if (*cmd_recover) return run_recover(*cmd_recover, recover);
    if (*cmd_bench) return run_bench(*cmd_bench, bench);
    if (*cmd_check) return run_check_bounds(*cmd_check, check);
  } catch (const StructureViolation&) {
    return kExitCheckFailed;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}
