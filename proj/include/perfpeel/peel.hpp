#pragma once

// Peeling algorithms that recover a HODLR(k) approximation of an operator
// from forward and transpose queries only.
//
// Level l uses two operator calls: one forward call on the right sketches
// [Omega+ Omega-] and one transpose call on the left sketches. Products of
// the levels recovered so far are subtracted explicitly, so every block of
// the residual outside the current level's territory is (ideally) zero.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perfpeel/hodlr.hpp"
#include "perfpeel/linops.hpp"

namespace perfpeel {

enum class Variant { generalized_nystrom, rsvd };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// What to do when a target beta is set and the sketch sizes violate the
/// validity inequalities for the variant.
enum class Validation {
  strict,    // throw ConfigError
  advisory,  // run anyway, record the violations in the report
  off,       // do not evaluate the inequalities
};

struct PeelConfig {
  Index k = 1;
  Index s_R = 1;
  Index t_R = 1;
  Index s_L = 1;  // unused by the rsvd variant
  Index t_L = 1;
  Variant variant = Variant::generalized_nystrom;
  std::uint64_t seed = 0;
  std::optional<double> beta;
  bool truncate = true;  // false keeps full-rank factors (not a HODLR(k) certificate)
  Validation validation = Validation::strict;
  /// Refuse runs whose sketch matrices would exceed this many entries.
  std::int64_t max_sketch_entries = std::int64_t{1} << 28;
};

/// Violated validity inequalities for cfg.beta (empty when beta is unset
/// or every inequality holds). Generalized Nystrom:
///   k/(s_R-k-1) <= beta/30,  k/(s_R-k-1)/t_R <= beta^2/900,
///   s_R/(s_L-s_R-1) <= beta^2/900.
/// RSVD:
///   k/(s_R-k-1) <= beta/10,  k/(s_R-k-1)/t_R <= beta^2/100,  1/t_L <= beta^2/100.
std::vector<std::string> validity_violations(const PeelConfig& cfg);

/// Throws ConfigError on structural problems (k < 1, s_R < k, t < 1,
/// s_L < s_R for generalized Nystrom, beta outside (0, 1)) and, in strict
/// mode, on any validity violation.
void validate(const PeelConfig& cfg);

enum class ParamProfile {
  perforated,    // s_R = O(k/beta), t_R = O(1/beta), s_L = O(k/beta^3), t_L = 1
  unperforated,  // t_R = 1, s_R = O(k/beta^2) (generalized Nystrom only)
};

/// Smallest integers satisfying the validity inequalities for beta in (0, 1).
/// s_R is chosen first, then t_R, then s_L (or t_L for rsvd).
PeelConfig params_for_beta(Index k, double beta, Variant variant,
                           ParamProfile profile = ParamProfile::perforated);

struct QueryCounts {
  std::int64_t forward = 0;
  std::int64_t transpose = 0;
  bool operator==(const QueryCounts&) const = default;
};

/// Closed-form query counts for an n x n operator:
///   generalized Nystrom: 2L s_R t_R forward, (2L+1) s_L t_L transpose;
///   rsvd: 2L s_R t_R forward, 2L s_R t_L + n_base t_L transpose.
QueryCounts expected_counts(const PeelConfig& cfg, Index n);

struct LevelStats {
  int level = 0;  // L + 1 denotes the leaf diagonal recovery
  std::int64_t forward = 0;
  std::int64_t transpose = 0;
  double seconds = 0.0;
  /// Frobenius error of this level's blocks (dense reference only).
  std::optional<double> error;
  /// Largest relative deviation between the measured right-sketch noise and
  /// its expansion over the other blocks of the residual (dense reference
  /// and check_noise_structure only).
  std::optional<double> noise_deviation;
};

struct PeelReport {
  std::vector<LevelStats> levels;
  QueryCounts counts;
  QueryCounts expected;
  std::int64_t probe_forward = 0;  // verification queries outside the budget
  double seconds = 0.0;
  std::vector<std::string> violations;
  std::optional<double> error;                 // |A - approx|_F
  std::optional<double> opt;                   // |A - A*|_F
  std::optional<double> approximation_factor;  // error / opt
};

struct PeelOptions {
  /// Dense copy of the operator for per-level diagnostics and final error.
  const MatrixXd* dense_reference = nullptr;
  bool check_noise_structure = false;
  /// Optimal HODLR(k) error, used for the approximation factor.
  std::optional<double> opt;
};

struct PeelResult {
  HodlrMatrix hodlr;
  PeelReport report;
};

/// A X - (sum of recovered levels) X, or the transpose version. The operator
/// is queried exactly once.
MatrixXd residual_sketch(const LinearOperator& op, const std::vector<LevelFactors>& recovered,
                         const MatrixXd& Omega, Side side);

/// Generalized Nystrom peeling with randomly perforated Gaussian sketches.
PeelResult gn_peel(const LinearOperator& op, const PeelConfig& cfg, const PeelOptions& opts = {});

/// Randomized SVD peeling; left sketches are perforated copies of the
/// level's range bases, leaf blocks come from a stacked-identity sketch.
PeelResult rsvd_peel(const LinearOperator& op, const PeelConfig& cfg, const PeelOptions& opts = {});

/// Dispatches on cfg.variant.
PeelResult peel(const LinearOperator& op, const PeelConfig& cfg, const PeelOptions& opts = {});

/// Exact recovery of an operator promised to be HODLR(k): peeling with the
/// minimal sketches s_R = k, t_R = t_L = 1, followed by one forward probe
/// with a Gaussian vector. Throws StructureViolation when the probe
/// residual exceeds 1e-6 times |A w|.
///
/// The rsvd variant is used: with square k x k regressions, generalized
/// Nystrom amplifies rounding errors of earlier levels by the condition
/// number of a k x k Gaussian matrix at every level, while the rsvd
/// projection does not.
HodlrMatrix exact_recover(const LinearOperator& op, Index k, std::uint64_t seed = 0,
                          PeelReport* report = nullptr);

inline constexpr double kStructureTolerance = 1e-6;

}  // namespace perfpeel
