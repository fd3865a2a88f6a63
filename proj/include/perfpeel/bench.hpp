#pragma once

// Experiment harness: parameter presets, error metrics, experiment grids
// and result output.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "perfpeel/peel.hpp"

namespace perfpeel {

enum class Preset { GN1, GN2, RSVD1, RSVD2 };

std::string preset_name(Preset p);
Preset parse_preset(const std::string& name);

/// ceil(x) that ignores a relative excess of 1e-12 above an integer, so
/// k / beta with beta = 1/8 does not round up because of representation
/// error.
Index ceil_param(double x);

/// Preset parameters for rank k and oversampling beta:
///   GN1   s_R = ceil(k/beta), t_R = 1,            s_L = ceil(k/beta^2), t_L = 1
///   GN2   s_R = ceil(k/beta), t_R = ceil(1/beta), s_L = ceil(k/beta^2), t_L = 1
///   RSVD1 s_R = ceil(k/beta), t_R = 1,            t_L = 1
///   RSVD2 s_R = ceil(k/beta), t_R = ceil(1/beta), t_L = ceil(1/beta)
/// The returned config carries beta, uses advisory validation, and has
/// s_L = s_R for the RSVD presets (where it is unused).
PeelConfig preset_config(Preset p, Index k, double beta);

/// err / opt - 1. opt = 0 gives 0 when err = 0 and +inf otherwise.
double relative_error(double err, double opt);

struct ResultRow {
  std::string experiment;
  std::string preset;
  Index n = 0;
  Index k = 0;
  double beta = 0.0;
  int trial = 0;
  double relative_error = 0.0;
  double absolute_error = 0.0;
  std::int64_t forward_queries = 0;
  std::int64_t transpose_queries = 0;
  std::uint64_t seed = 0;
};

/// Outcome of a bound or property check run by the bound_checks experiment.
struct CheckOutcome {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CheckOutcome> checks;
};

struct ExperimentGrid {
  std::vector<std::string> presets;
  std::vector<Index> ks;
  std::vector<double> betas;
  std::vector<Index> ns;
  double eta = 1e8;
  bool truncate = true;
  Validation validation = Validation::advisory;
};

const std::vector<std::string>& experiment_names();

/// Grid used when the command line does not override it.
ExperimentGrid default_grid(const std::string& experiment);

/// Largest n for which the dense optimum is computed.
inline constexpr Index kMaxBenchSize = 4096;

/// Runs every (preset, k, beta, n) cell of the grid for the given number of
/// trials. Each trial's seed is derived from the run seed and the cell, and
/// the optimal HODLR error is computed once per (matrix, k). For the
/// recovery experiment (optimum zero) the relative error column holds
/// |A - approx|_F / |A|_F instead. bound_checks ignores the grid and
/// reports its suites as checks (and as rows with relative_error =
/// observed / limit - 1).
ExperimentResult run_experiment(const std::string& name, const ExperimentGrid& grid, int trials,
                                std::uint64_t seed);

/// The perturbation, pseudoinverse-moment and Nystrom expectation suites at
/// their standard sizes.
std::vector<CheckOutcome> run_bound_checks(std::uint64_t seed);

enum class OutputFormat { csv, plotdata };
OutputFormat parse_format(const std::string& name);

/// Header plus one line per row, doubles with 17 significant digits.
void write_results_csv(std::ostream& out, const ExperimentResult& result);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// csv: a single file at path. plotdata: path is a directory receiving one
/// whitespace-separated series file per (experiment, preset, k), with one
/// line per (n, beta) holding trial means and standard errors.
void emit(const ExperimentResult& result, const std::string& path, OutputFormat format);

}  // namespace perfpeel
