#include "perfpeel/bench.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "perfpeel/csv.hpp"
#include "perfpeel/errors.hpp"
#include "perfpeel/lowrank.hpp"
#include "perfpeel/sketch.hpp"

namespace perfpeel {

namespace {

// Stream label for matrices drawn at random (helix points, HODLR sources).
constexpr std::uint64_t kMatrixStream = 0x6d61747269780000ULL;
// Stream label for the bound-check suites.
constexpr std::uint64_t kBoundStream = 0x626f756e64730000ULL;

const char* const kCsvHeader =
    "experiment,preset,n,k,beta,trial,relative_error,absolute_error,forward_queries,"
    "transpose_queries,seed";

struct TestMatrix {
  LinearOperator op;
  MatrixXd dense;
};

void check_bench_size(Index n) {
  if (n > kMaxBenchSize) {
    throw ConfigError("n = " + std::to_string(n) + " exceeds the dense-optimum limit of " +
                      std::to_string(kMaxBenchSize));
  }
}

int exact_log2(Index n) {
  if (n < 1 || (n & (n - 1)) != 0) throw ConfigError(std::to_string(n) + " is not a power of two");
  return std::countr_zero(static_cast<std::uint64_t>(n));
}

TestMatrix build_matrix(const std::string& experiment, Index n, Index k, double eta,
                        std::uint64_t seed) {
  if (experiment == "poisson") {
    const auto t = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (t * t != n) throw ConfigError("poisson needs n = t^2, got n = " + std::to_string(n));
    check_bench_size(n);
    LinearOperator op = make_poisson_operator(t);
    MatrixXd A = materialize(op);
    op.reset_counter();
    return {op, std::move(A)};
  }
  if (experiment == "kernel") {
    check_bench_size(n);
    const PointCloud cloud = helix_points(n, derive_seed(seed, {kMatrixStream, static_cast<std::uint64_t>(n)}));
    return {make_kernel_operator(cloud), kernel_matrix(cloud)};
  }
  if (experiment == "hard_block") {
    MatrixXd A = hard_block_matrix(k, eta);
    return {make_dense_operator(A, "hard_block"), A};
  }
  if (experiment == "exp_hard") {
    check_bench_size(n);
    MatrixXd A = exp_hard_matrix(exact_log2(n), eta);
    return {make_dense_operator(A, "exp_hard"), A};
  }
  if (experiment == "recovery") {
    check_bench_size(n);
    const HodlrMatrix H = random_hodlr(
        n, k, derive_seed(seed, {kMatrixStream, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k)}));
    MatrixXd A = to_dense(H);
    return {make_dense_operator(A, "recovery"), A};
  }
  throw ConfigError("unknown experiment '" + experiment + "'");
}

// Matrices depend on k only for hard_block (n = 8k) and recovery.
bool matrix_depends_on_k(const std::string& experiment) {
  return experiment == "hard_block" || experiment == "recovery";
}

struct Moments {
  int count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  void push(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
  double mean() const { return count ? sum / count : 0.0; }
  double standard_error() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - count * m * m) / (count - 1));
    return std::sqrt(var / count);
  }
};

}  // namespace

std::string preset_name(Preset p) {
  switch (p) {
    case Preset::GN1: return "GN1";
    case Preset::GN2: return "GN2";
    case Preset::RSVD1: return "RSVD1";
    case Preset::RSVD2: return "RSVD2";
  }
  return "?";
}

Preset parse_preset(const std::string& name) {
  for (Preset p : {Preset::GN1, Preset::GN2, Preset::RSVD1, Preset::RSVD2})
    if (preset_name(p) == name) return p;
  throw ConfigError("unknown preset '" + name + "' (expected GN1, GN2, RSVD1 or RSVD2)");
}

Index ceil_param(double x) {
  return static_cast<Index>(std::ceil(x * (1.0 - 1e-12)));
}

PeelConfig preset_config(Preset p, Index k, double beta) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  PeelConfig cfg;
  cfg.k = k;
  cfg.beta = beta;
  cfg.validation = Validation::advisory;
  cfg.s_R = ceil_param(static_cast<double>(k) / beta);
  cfg.t_R = 1;
  cfg.t_L = 1;
  switch (p) {
    case Preset::GN2:
      cfg.t_R = ceil_param(1.0 / beta);
      [[fallthrough]];
    case Preset::GN1:
      cfg.variant = Variant::generalized_nystrom;
      cfg.s_L = ceil_param(static_cast<double>(k) / (beta * beta));
      break;
    case Preset::RSVD2:
      cfg.t_R = ceil_param(1.0 / beta);
      cfg.t_L = ceil_param(1.0 / beta);
      [[fallthrough]];
    case Preset::RSVD1:
      cfg.variant = Variant::rsvd;
      cfg.s_L = cfg.s_R;
      break;
  }
  return cfg;
}

double relative_error(double err, double opt) {
  if (err < 0.0 || opt < 0.0) throw ConfigError("errors must be nonnegative");
  if (opt == 0.0) return err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return err / opt - 1.0;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"poisson",  "kernel",   "hard_block",
                                                 "exp_hard", "recovery", "bound_checks"};
  return names;
}

ExperimentGrid default_grid(const std::string& experiment) {
  ExperimentGrid g;
  if (experiment == "poisson") {
    g.presets = {"GN1", "RSVD1"};
    g.ks = {8};
    g.betas = {1.0, 0.5, 0.25, 0.125};
    g.ns = {1024};
  } else if (experiment == "kernel") {
    g.presets = {"GN1"};
    g.ks = {2, 4, 6, 8};
    g.betas = {0.25};
    g.ns = {256};
  } else if (experiment == "hard_block") {
    g.presets = {"GN1", "GN2", "RSVD1", "RSVD2"};
    g.ks = {1};
    g.betas = {0.5};
    g.ns = {8};
  } else if (experiment == "exp_hard") {
    g.presets = {"GN2", "RSVD1", "RSVD2"};
    g.ks = {1};
    g.betas = {0.5};
    g.ns = {16, 32, 64, 128, 256, 512, 1024};
  } else if (experiment == "recovery") {
    g.presets = {"GN1", "GN2", "RSVD1", "RSVD2"};
    g.ks = {2, 4};
    g.betas = {0.5};
    g.ns = {128, 256};
  } else if (experiment == "bound_checks") {
    // The suites have fixed sizes.
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return g;
}

std::vector<CheckOutcome> run_bound_checks(std::uint64_t seed) {
  std::vector<CheckOutcome> out;

  {
    const PointwiseBoundCheck r = check_perturbation_pointwise(200, derive_seed(seed, {kBoundStream, 1}));
    CheckOutcome c;
    c.name = "perturbation_pointwise";
    c.passed = r.satisfied == r.instances;
    c.observed = r.satisfied;
    c.limit = r.instances;
    c.detail = std::to_string(r.satisfied) + "/" + std::to_string(r.instances) +
               " instances satisfy lhs <= rhs + 1e-10, worst slack " + format_double(r.worst_slack);
    out.push_back(c);
  }
  {
    Rng rng = Rng::stream(seed, {kBoundStream, 2, 0});
    const MatrixXd X = rng.gaussian(3, 6);
    const PinvMomentCheck r = check_gaussian_pinv_moment(X, 2, 8, 20000, derive_seed(seed, {kBoundStream, 2, 1}));
    CheckOutcome c;
    c.name = "pinv_moment";
    c.passed = r.relative_deviation <= 0.05;
    c.observed = r.sample_mean;
    c.limit = r.expected;
    c.detail = "mean " + format_double(r.sample_mean) + " vs expected " + format_double(r.expected) +
               " (relative deviation " + format_double(r.relative_deviation) + ", tolerance 0.05)";
    out.push_back(c);
  }
  {
    Rng rng = Rng::stream(seed, {kBoundStream, 3, 0});
    const Index m = 20;
    const MatrixXd U = orth(rng.gaussian(m, m));
    const MatrixXd V = orth(rng.gaussian(m, m));
    VectorXd sigma(m);
    for (Index i = 0; i < m; ++i) sigma(i) = std::pow(0.7, static_cast<double>(i));
    const MatrixXd B = U * sigma.asDiagonal() * V.transpose();
    const MatrixXd M = 0.05 * rng.gaussian(m, m);
    const MatrixXd N = 0.05 * rng.gaussian(m, m);
    const ExpectationBoundCheck r = check_gn_expectation(B, M, N, 2, 8, 24, 1000, derive_seed(seed, {kBoundStream, 3, 1}));
    CheckOutcome c;
    c.name = "gn_expectation";
    c.passed = r.passed;
    c.observed = r.mean_squared_error;
    c.limit = r.bound;
    c.detail = "mean squared error " + format_double(r.mean_squared_error) + " (standard error " +
               format_double(r.standard_error) + ") vs bound " + format_double(r.bound);
    out.push_back(c);
  }
  return out;
}

ExperimentResult run_experiment(const std::string& name, const ExperimentGrid& grid, int trials,
                                std::uint64_t seed) {
  ExperimentResult result;
  if (name == "bound_checks") {
    result.checks = run_bound_checks(seed);
    for (const auto& c : result.checks) {
      ResultRow row;
      row.experiment = name;
      row.preset = c.name;
      row.relative_error = c.limit > 0.0 ? c.observed / c.limit - 1.0 : 0.0;
      row.absolute_error = c.observed;
      row.seed = seed;
      result.rows.push_back(row);
    }
    return result;
  }
  if (trials < 1) throw ConfigError("trials must be at least 1");

  std::vector<Preset> presets;
  for (const auto& p : grid.presets) presets.push_back(parse_preset(p));
  std::vector<Index> ns = grid.ns;
  if (name == "hard_block") ns = {0};  // n = 8k, set per k below

  for (Index n_grid : ns) {
    std::optional<TestMatrix> shared;
    if (!matrix_depends_on_k(name)) shared = build_matrix(name, n_grid, 0, grid.eta, seed);
    for (Index k : grid.ks) {
      const TestMatrix tm = shared ? *shared : build_matrix(name, n_grid, k, grid.eta, seed);
      const Index n = tm.dense.rows();
      const HodlrMatrix best = best_hodlr(tm.dense, k);
      const double opt = (tm.dense - to_dense(best)).norm();
      const double scale = tm.dense.norm();

      for (Preset p : presets) {
        for (double beta : grid.betas) {
          PeelConfig cfg = preset_config(p, k, beta);
          cfg.truncate = grid.truncate;
          cfg.validation = grid.validation;
          for (int trial = 0; trial < trials; ++trial) {
            cfg.seed = derive_seed(seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k),
                                          std::bit_cast<std::uint64_t>(beta),
                                          static_cast<std::uint64_t>(n),
                                          static_cast<std::uint64_t>(trial)});
            const PeelResult r = peel(tm.op, cfg);
            const double err = (tm.dense - to_dense(r.hodlr)).norm();
            ResultRow row;
            row.experiment = name;
            row.preset = preset_name(p);
            row.n = n;
            row.k = k;
            row.beta = beta;
            row.trial = trial;
            row.absolute_error = err;
            row.relative_error = name == "recovery" ? (scale > 0.0 ? err / scale : 0.0)
                                                    : relative_error(err, opt);
            row.forward_queries = r.report.counts.forward;
            row.transpose_queries = r.report.counts.transpose;
            row.seed = cfg.seed;
            result.rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return result;
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "plotdata") return OutputFormat::plotdata;
  throw ConfigError("unknown format '" + name + "' (expected csv or plotdata)");
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
  out << kCsvHeader << '\n';
  for (const auto& r : result.rows) {
    out << r.experiment << ',' << r.preset << ',' << r.n << ',' << r.k << ',' << format_double(r.beta)
        << ',' << r.trial << ',' << format_double(r.relative_error) << ','
        << format_double(r.absolute_error) << ',' << r.forward_queries << ',' << r.transpose_queries
        << ',' << r.seed << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("missing or unexpected results header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw FormatError("results row has " + std::to_string(f.size()) + " fields");
    try {
      ResultRow r;
      r.experiment = f[0];
      r.preset = f[1];
      r.n = std::stoll(f[2]);
      r.k = std::stoll(f[3]);
      r.beta = std::stod(f[4]);
      r.trial = std::stoi(f[5]);
      r.relative_error = std::stod(f[6]);
      r.absolute_error = std::stod(f[7]);
      r.forward_queries = std::stoll(f[8]);
      r.transpose_queries = std::stoll(f[9]);
      r.seed = std::stoull(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("malformed results row: " + line);
    }
  }
  return rows;
}

void emit(const ExperimentResult& result, const std::string& path, OutputFormat format) {
  namespace fs = std::filesystem;
  if (format == OutputFormat::csv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_results_csv(out, result);
    if (!out) throw std::runtime_error("failed writing " + path);
    return;
  }

  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw std::runtime_error("cannot create directory " + path);

  struct Cell {
    Moments rel, abs;
    std::int64_t forward = 0, transpose = 0;
  };
  using CurveKey = std::tuple<std::string, std::string, Index>;
  std::map<CurveKey, std::map<std::pair<Index, double>, Cell>> curves;
  for (const auto& r : result.rows) {
    Cell& c = curves[{r.experiment, r.preset, r.k}][{r.n, r.beta}];
    c.rel.push(r.relative_error);
    c.abs.push(r.absolute_error);
    c.forward = r.forward_queries;
    c.transpose = r.transpose_queries;
  }
  for (const auto& [key, points] : curves) {
    const auto& [experiment, preset, k] = key;
    const fs::path file = fs::path(path) / (experiment + "_" + preset + "_k" + std::to_string(k) + ".dat");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    out << "# n beta mean_relative_error stderr_relative_error mean_absolute_error "
           "stderr_absolute_error forward_queries transpose_queries trials\n";
    for (const auto& [x, c] : points) {
      out << x.first << ' ' << format_double(x.second) << ' ' << format_double(c.rel.mean()) << ' '
          << format_double(c.rel.standard_error()) << ' ' << format_double(c.abs.mean()) << ' '
          << format_double(c.abs.standard_error()) << ' ' << c.forward << ' ' << c.transpose << ' '
          << c.rel.count << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + file.string());
  }
}

}  // namespace perfpeel
