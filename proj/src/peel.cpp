#include "perfpeel/peel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <utility>

#include "perfpeel/errors.hpp"
#include "perfpeel/rng.hpp"
#include "perfpeel/sketch.hpp"

namespace perfpeel {

namespace {

using Clock = std::chrono::steady_clock;

// Stream labels under the run seed: {level, role}.
constexpr std::uint64_t kRightRole = 0;
constexpr std::uint64_t kLeftRole = 1;
constexpr std::uint64_t kProbeStream = ~std::uint64_t{0};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

MatrixXd hcat(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

HodlrStructure prepare(const LinearOperator& op, const PeelConfig& cfg, PeelReport& report) {
  validate(cfg);
  if (cfg.validation == Validation::advisory) report.violations = validity_violations(cfg);
  const HodlrStructure s = hodlr_structure(op.size(), cfg.k);
  if (s.L < 1) {
    throw ConfigError("peeling needs n > k (n = " + std::to_string(s.n) + ", k = " +
                      std::to_string(s.k) + ")");
  }
  const std::int64_t n = s.n;
  std::int64_t widest = 2 * cfg.s_R * cfg.t_R;
  if (cfg.variant == Variant::generalized_nystrom) {
    widest = std::max(widest, 2 * cfg.s_L * cfg.t_L);
  } else {
    widest = std::max({widest, 2 * cfg.s_R * cfg.t_L, s.n_base * cfg.t_L});
  }
  if (n * widest > cfg.max_sketch_entries) {
    throw ConfigError("sketch matrices would hold " + std::to_string(n * widest) +
                      " entries, above the limit of " + std::to_string(cfg.max_sketch_entries));
  }
  report.expected = expected_counts(cfg, s.n);
  return s;
}

struct CounterSnapshot {
  std::int64_t forward;
  std::int64_t transpose;
};
CounterSnapshot snapshot(const LinearOperator& op) {
  return {op.counter().forward(), op.counter().transpose()};
}
void record_counts(LevelStats& stats, const LinearOperator& op, CounterSnapshot before) {
  stats.forward = op.counter().forward() - before.forward;
  stats.transpose = op.counter().transpose() - before.transpose;
}

// A minus the dense expansion of the recovered levels.
MatrixXd dense_residual(const MatrixXd& A, const std::vector<LevelFactors>& recovered) {
  MatrixXd R = A;
  MatrixXd I = MatrixXd::Identity(A.rows(), A.cols());
  MatrixXd sum = MatrixXd::Zero(A.rows(), A.cols());
  apply_levels(recovered, I, Side::forward, sum);
  R -= sum;
  return R;
}

double level_error(const MatrixXd& A, const LevelFactors& blocks, Index m) {
  double err2 = 0.0;
  for (std::size_t jj = 0; jj < blocks.size(); ++jj) {
    const Index col = static_cast<Index>(jj);
    err2 += (A.block((col ^ 1) * m, col * m, m, m) - blocks[jj].dense()).squaredNorm();
  }
  return std::sqrt(err2);
}

// Compares Y_j - A_{row,j} Omega_j with the sum over the other block
// columns that share the selector column of block j.
double noise_deviation(const MatrixXd& residual, const SketchFamily& right, const MatrixXd& AY) {
  const Index d = right.d;
  const Index m = right.block_rows();
  const Index s = right.s;
  const Index width = s * right.t;
  double worst = 0.0;
  for (Index jj = 0; jj < d; ++jj) {
    const Index row = jj ^ 1;
    const bool plus = jj % 2 == 0;
    const BlockSelector& sel = plus ? right.selector_plus : right.selector_minus;
    const Index rho = sel.nonzero_column(jj);
    const MatrixXd Y = AY.block(row * m, (plus ? 0 : width) + rho * s, m, s);
    const MatrixXd measured =
        Y - residual.block(row * m, jj * m, m, m) * right.gaussian_blocks[static_cast<std::size_t>(jj)];
    MatrixXd expected = MatrixXd::Zero(m, s);
    for (Index i = 0; i < d; ++i) {
      if (i == jj || sel.nonzero_column(i) != rho) continue;
      expected += residual.block(row * m, i * m, m, m) * right.gaussian_blocks[static_cast<std::size_t>(i)];
    }
    const double scale = std::max(Y.norm(), 1e-300);
    worst = std::max(worst, (measured - expected).norm() / scale);
  }
  return worst;
}

void finish_report(PeelReport& report, const LinearOperator& op, CounterSnapshot start,
                   Clock::time_point t0, const HodlrMatrix& H, const PeelOptions& opts) {
  report.counts.forward = op.counter().forward() - start.forward;
  report.counts.transpose = op.counter().transpose() - start.transpose;
  report.seconds = seconds_since(t0);
  if (opts.dense_reference) report.error = (*opts.dense_reference - to_dense(H)).norm();
  report.opt = opts.opt;
  if (report.error && report.opt && *report.opt > 0.0) {
    report.approximation_factor = *report.error / *report.opt;
  }
}

void check_reference(const PeelOptions& opts, Index n) {
  if (opts.dense_reference &&
      (opts.dense_reference->rows() != n || opts.dense_reference->cols() != n)) {
    throw DimensionError("dense reference does not match the operator dimension");
  }
}

}  // namespace

MatrixXd residual_sketch(const LinearOperator& op, const std::vector<LevelFactors>& recovered,
                         const MatrixXd& Omega, Side side) {
  MatrixXd Y = op.apply(Omega, side);
  MatrixXd H = MatrixXd::Zero(Y.rows(), Y.cols());
  apply_levels(recovered, Omega, side, H);
  Y -= H;
  return Y;
}

PeelResult gn_peel(const LinearOperator& op, const PeelConfig& cfg, const PeelOptions& opts) {
  PeelReport report;
  const HodlrStructure s = prepare(op, cfg, report);
  check_reference(opts, s.n);
  const auto t0 = Clock::now();
  const CounterSnapshot start = snapshot(op);
  const Index n = s.n;
  const Index rank_cap = cfg.truncate ? cfg.k : -1;

  std::vector<LevelFactors> recovered;
  for (int level = 1; level <= s.L; ++level) {
    const auto tl = Clock::now();
    const CounterSnapshot before = snapshot(op);
    const Index d = s.block_count(level);
    const Index m = s.block_size(level);
    const auto lvl = static_cast<std::uint64_t>(level);

    const SketchFamily right =
        sample_rand_perf_gaussian(n, d, cfg.s_R, cfg.t_R, derive_seed(cfg.seed, {lvl, kRightRole}));
    const SketchFamily left =
        sample_rand_perf_gaussian(n, d, cfg.s_L, cfg.t_L, derive_seed(cfg.seed, {lvl, kLeftRole}));
    const MatrixXd AY =
        residual_sketch(op, recovered, hcat(right.assembled_plus, right.assembled_minus), Side::forward);
    const MatrixXd AZ =
        residual_sketch(op, recovered, hcat(left.assembled_plus, left.assembled_minus), Side::transpose);

    const Index right_width = cfg.s_R * cfg.t_R;
    const Index left_width = cfg.s_L * cfg.t_L;
    LevelFactors blocks;
    blocks.reserve(static_cast<std::size_t>(d));
    for (Index jj = 0; jj < d; ++jj) {
      const Index row = jj ^ 1;
      // Block column jj has the "+" parity when jj is even; its target row
      // block has the opposite parity and is read through the other left sketch.
      const bool plus = jj % 2 == 0;
      const Index rho = (plus ? right.selector_plus : right.selector_minus).nonzero_column(jj);
      const Index sigma = (plus ? left.selector_minus : left.selector_plus).nonzero_column(row);
      const MatrixXd Y = AY.block(row * m, (plus ? 0 : right_width) + rho * cfg.s_R, m, cfg.s_R);
      const MatrixXd Z =
          AZ.block(jj * m, (plus ? left_width : 0) + sigma * cfg.s_L, m, cfg.s_L).transpose();
      blocks.push_back(
          gn_from_sketches(Y, Z, left.gaussian_blocks[static_cast<std::size_t>(row)], rank_cap));
    }

    LevelStats stats;
    stats.level = level;
    record_counts(stats, op, before);
    if (opts.dense_reference) {
      stats.error = level_error(*opts.dense_reference, blocks, m);
      if (opts.check_noise_structure) {
        stats.noise_deviation = noise_deviation(dense_residual(*opts.dense_reference, recovered), right, AY);
      }
    }
    recovered.push_back(std::move(blocks));
    stats.seconds = seconds_since(tl);
    report.levels.push_back(stats);
  }

  // Leaf diagonal blocks from one transpose call on Psi^ = Psi^+ + Psi^-.
  const auto tl = Clock::now();
  const CounterSnapshot before = snapshot(op);
  const Index d = s.block_count(s.L);
  const Index nb = s.n_base;
  const SketchFamily fam = sample_rand_perf_gaussian(
      n, d, cfg.s_L, cfg.t_L, derive_seed(cfg.seed, {static_cast<std::uint64_t>(s.L + 1), kLeftRole}));
  const BlockSelector zeta = fam.selector_plus + fam.selector_minus;
  const MatrixXd AZ = residual_sketch(op, recovered, fam.assembled_plus + fam.assembled_minus, Side::transpose);
  std::vector<MatrixXd> leaves;
  leaves.reserve(static_cast<std::size_t>(d));
  for (Index jj = 0; jj < d; ++jj) {
    const Index sigma = zeta.nonzero_column(jj);
    const MatrixXd Z = AZ.block(jj * nb, sigma * cfg.s_L, nb, cfg.s_L).transpose();
    leaves.push_back(pinv_solve(fam.gaussian_blocks[static_cast<std::size_t>(jj)].transpose(), Z));
  }
  LevelStats leaf_stats;
  leaf_stats.level = s.L + 1;
  record_counts(leaf_stats, op, before);
  if (opts.dense_reference) {
    double err2 = 0.0;
    for (Index jj = 0; jj < d; ++jj) {
      err2 += (opts.dense_reference->block(jj * nb, jj * nb, nb, nb) -
               leaves[static_cast<std::size_t>(jj)])
                  .squaredNorm();
    }
    leaf_stats.error = std::sqrt(err2);
  }
  leaf_stats.seconds = seconds_since(tl);
  report.levels.push_back(leaf_stats);

  HodlrMatrix H(s, std::move(recovered), std::move(leaves),
                cfg.truncate ? RankPolicy::strict : RankPolicy::relaxed);
  finish_report(report, op, start, t0, H, opts);
  return {std::move(H), std::move(report)};
}

PeelResult rsvd_peel(const LinearOperator& op, const PeelConfig& cfg, const PeelOptions& opts) {
  PeelReport report;
  const HodlrStructure s = prepare(op, cfg, report);
  check_reference(opts, s.n);
  const auto t0 = Clock::now();
  const CounterSnapshot start = snapshot(op);
  const Index n = s.n;
  const Index rank_cap = cfg.truncate ? cfg.k : -1;

  std::vector<LevelFactors> recovered;
  for (int level = 1; level <= s.L; ++level) {
    const auto tl = Clock::now();
    const CounterSnapshot before = snapshot(op);
    const Index d = s.block_count(level);
    const Index m = s.block_size(level);
    const auto lvl = static_cast<std::uint64_t>(level);

    const SketchFamily right =
        sample_rand_perf_gaussian(n, d, cfg.s_R, cfg.t_R, derive_seed(cfg.seed, {lvl, kRightRole}));
    const MatrixXd AY =
        residual_sketch(op, recovered, hcat(right.assembled_plus, right.assembled_minus), Side::forward);
    const Index right_width = cfg.s_R * cfg.t_R;

    // Range bases, stacked by target row block and padded to s_R columns.
    std::vector<MatrixXd> bases(static_cast<std::size_t>(d));
    MatrixXd Qstack = MatrixXd::Zero(n, cfg.s_R);
    for (Index jj = 0; jj < d; ++jj) {
      const Index row = jj ^ 1;
      const bool plus = jj % 2 == 0;
      const Index rho = (plus ? right.selector_plus : right.selector_minus).nonzero_column(jj);
      auto& Q = bases[static_cast<std::size_t>(jj)];
      Q = orth(AY.block(row * m, (plus ? 0 : right_width) + rho * cfg.s_R, m, cfg.s_R));
      Qstack.block(row * m, 0, m, Q.cols()) = Q;
    }

    Rng zeta_rng = Rng::stream(cfg.seed, {lvl, kLeftRole});
    const auto [zeta_plus, zeta_minus] = sample_perf_countsketch(d, cfg.t_L, zeta_rng);
    const MatrixXd AX = residual_sketch(
        op, recovered, hcat(bullet(zeta_plus.dense(), Qstack), bullet(zeta_minus.dense(), Qstack)),
        Side::transpose);
    const Index left_width = cfg.s_R * cfg.t_L;

    LevelFactors blocks;
    blocks.reserve(static_cast<std::size_t>(d));
    for (Index jj = 0; jj < d; ++jj) {
      const Index row = jj ^ 1;
      const bool plus = jj % 2 == 0;
      const Index sigma = (plus ? zeta_minus : zeta_plus).nonzero_column(row);
      const auto& Q = bases[static_cast<std::size_t>(jj)];
      if (Q.cols() == 0) {
        blocks.push_back(LowRankFactors::zero(m, m));
        continue;
      }
      const MatrixXd X =
          AX.block(jj * m, (plus ? left_width : 0) + sigma * cfg.s_R, m, Q.cols()).transpose();
      blocks.push_back(rank_cap < 0 ? LowRankFactors{Q, X} : truncate_in_basis(Q, X, rank_cap));
    }

    LevelStats stats;
    stats.level = level;
    record_counts(stats, op, before);
    if (opts.dense_reference) {
      stats.error = level_error(*opts.dense_reference, blocks, m);
      if (opts.check_noise_structure) {
        stats.noise_deviation = noise_deviation(dense_residual(*opts.dense_reference, recovered), right, AY);
      }
    }
    recovered.push_back(std::move(blocks));
    stats.seconds = seconds_since(tl);
    report.levels.push_back(stats);
  }

  // Leaf diagonal blocks from the stacked-identity sketch zeta^ • (1 ⊗ I).
  const auto tl = Clock::now();
  const CounterSnapshot before = snapshot(op);
  const Index d = s.block_count(s.L);
  const Index nb = s.n_base;
  Rng zeta_rng = Rng::stream(cfg.seed, {static_cast<std::uint64_t>(s.L + 1), kLeftRole});
  const BlockSelector zeta = sample_countsketch(d, cfg.t_L, zeta_rng);
  MatrixXd identities(n, nb);
  for (Index i = 0; i < d; ++i) identities.middleRows(i * nb, nb).setIdentity();
  const MatrixXd AX = residual_sketch(op, recovered, bullet(zeta.dense(), identities), Side::transpose);
  std::vector<MatrixXd> leaves;
  leaves.reserve(static_cast<std::size_t>(d));
  for (Index jj = 0; jj < d; ++jj) {
    leaves.push_back(AX.block(jj * nb, zeta.nonzero_column(jj) * nb, nb, nb).transpose());
  }
  LevelStats leaf_stats;
  leaf_stats.level = s.L + 1;
  record_counts(leaf_stats, op, before);
  if (opts.dense_reference) {
    double err2 = 0.0;
    for (Index jj = 0; jj < d; ++jj) {
      err2 += (opts.dense_reference->block(jj * nb, jj * nb, nb, nb) -
               leaves[static_cast<std::size_t>(jj)])
                  .squaredNorm();
    }
    leaf_stats.error = std::sqrt(err2);
  }
  leaf_stats.seconds = seconds_since(tl);
  report.levels.push_back(leaf_stats);

  HodlrMatrix H(s, std::move(recovered), std::move(leaves),
                cfg.truncate ? RankPolicy::strict : RankPolicy::relaxed);
  finish_report(report, op, start, t0, H, opts);
  return {std::move(H), std::move(report)};
}

PeelResult peel(const LinearOperator& op, const PeelConfig& cfg, const PeelOptions& opts) {
  return cfg.variant == Variant::generalized_nystrom ? gn_peel(op, cfg, opts) : rsvd_peel(op, cfg, opts);
}

HodlrMatrix exact_recover(const LinearOperator& op, Index k, std::uint64_t seed, PeelReport* report) {
  PeelConfig cfg;
  cfg.k = k;
  cfg.s_R = k;
  cfg.s_L = k;
  cfg.t_R = 1;
  cfg.t_L = 1;
  cfg.seed = seed;
  cfg.variant = Variant::rsvd;
  cfg.validation = Validation::off;
  PeelResult result = rsvd_peel(op, cfg);

  Rng rng = Rng::stream(seed, {kProbeStream});
  const MatrixXd w = rng.gaussian(op.size(), 1);
  const MatrixXd Aw = op.apply(w, Side::forward);
  const double residual = (Aw - hodlr_apply(result.hodlr, w, Side::forward)).norm();
  result.report.probe_forward = 1;
  if (report) *report = result.report;
  if (residual > kStructureTolerance * Aw.norm()) {
    throw StructureViolation("operator is not HODLR(" + std::to_string(k) +
                             "): probe residual " + std::to_string(residual) + " vs |A w| = " +
                             std::to_string(Aw.norm()));
  }
  return std::move(result.hodlr);
}

}  // namespace perfpeel
