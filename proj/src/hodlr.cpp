#include "perfpeel/hodlr.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "perfpeel/errors.hpp"
#include "perfpeel/rng.hpp"

namespace perfpeel {

HodlrStructure hodlr_structure(Index n, Index k) {
  if (k < 1) throw ConfigError("rank parameter k must be at least 1");
  if (n < 1) throw ConfigError("dimension n must be at least 1");
  HodlrStructure s;
  s.n = n;
  s.k = k;
  while (n > (k << s.L)) ++s.L;
  if (n % (Index{1} << s.L) != 0) {
    throw DimensionError("n = " + std::to_string(n) + " is not divisible by 2^L = " +
                         std::to_string(Index{1} << s.L) + " (L = ceil(log2(n/k)) for k = " +
                         std::to_string(k) + ")");
  }
  s.n_base = n >> s.L;
  return s;
}

HodlrMatrix::HodlrMatrix(HodlrStructure structure, std::vector<LevelFactors> levels,
                         std::vector<MatrixXd> leaves, RankPolicy policy)
    : structure_(structure), levels_(std::move(levels)), leaves_(std::move(leaves)) {
  const auto& s = structure_;
  if (static_cast<int>(levels_.size()) != s.L) {
    throw DimensionError("expected " + std::to_string(s.L) + " levels, got " +
                         std::to_string(levels_.size()));
  }
  for (int level = 1; level <= s.L; ++level) {
    const auto& blocks = levels_[static_cast<std::size_t>(level - 1)];
    const Index m = s.block_size(level);
    if (static_cast<Index>(blocks.size()) != s.block_count(level)) {
      throw DimensionError("level " + std::to_string(level) + " needs " +
                           std::to_string(s.block_count(level)) + " blocks");
    }
    for (const auto& f : blocks) {
      if (f.Q.rows() != m || f.X.cols() != m || f.Q.cols() != f.X.rows()) {
        throw DimensionError("factor shape mismatch at level " + std::to_string(level));
      }
      const Index limit = policy == RankPolicy::strict ? s.k : m;
      if (f.rank() > limit) {
        throw ConfigError("factor rank " + std::to_string(f.rank()) + " exceeds " +
                          std::to_string(limit) + " at level " + std::to_string(level));
      }
    }
  }
  if (static_cast<Index>(leaves_.size()) != s.block_count(s.L)) {
    throw DimensionError("expected " + std::to_string(s.block_count(s.L)) + " leaf blocks");
  }
  for (const auto& D : leaves_) {
    if (D.rows() != s.n_base || D.cols() != s.n_base) {
      throw DimensionError("leaf blocks must be " + std::to_string(s.n_base) + " x " +
                           std::to_string(s.n_base));
    }
  }
}

Index HodlrMatrix::max_rank() const {
  Index r = 0;
  for (const auto& level : levels_)
    for (const auto& f : level) r = std::max(r, f.rank());
  return r;
}

HodlrMatrix assemble(const HodlrStructure& structure, const std::vector<LevelContribution>& contribs,
                     std::vector<MatrixXd> leaves, RankPolicy policy) {
  std::vector<LevelFactors> levels(static_cast<std::size_t>(structure.L));
  std::vector<bool> level_seen(static_cast<std::size_t>(structure.L), false);
  for (const auto& c : contribs) {
    if (c.level < 1 || c.level > structure.L) {
      throw DimensionError("contribution for nonexistent level " + std::to_string(c.level));
    }
    const auto li = static_cast<std::size_t>(c.level - 1);
    if (level_seen[li]) throw DimensionError("two contributions for level " + std::to_string(c.level));
    level_seen[li] = true;

    const Index count = structure.block_count(c.level);
    const Index m = structure.block_size(c.level);
    LevelFactors blocks(static_cast<std::size_t>(count));
    std::vector<char> filled(static_cast<std::size_t>(count), 0);
    for (const auto& b : c.blocks) {
      const std::string where = "block (" + std::to_string(b.row) + ", " + std::to_string(b.col) +
                                ") at level " + std::to_string(c.level);
      if (b.row < 0 || b.col < 0 || b.row >= count || b.col >= count) {
        throw DimensionError(where + " is out of range");
      }
      // The parent block must be diagonal, otherwise a coarser level owns it.
      if (b.row == b.col || (b.row >> 1) != (b.col >> 1)) {
        throw DimensionError(where + " overlaps another level");
      }
      auto& slot = filled[static_cast<std::size_t>(b.col)];
      if (slot) throw DimensionError(where + " is given twice");
      slot = 1;
      if (b.factors.rows() != m || b.factors.cols() != m) {
        throw DimensionError(where + " must be " + std::to_string(m) + " x " + std::to_string(m));
      }
      blocks[static_cast<std::size_t>(b.col)] = b.factors;
    }
    for (Index j = 0; j < count; ++j) {
      if (!filled[static_cast<std::size_t>(j)]) {
        throw DimensionError("missing block (" + std::to_string(j ^ 1) + ", " + std::to_string(j) +
                             ") at level " + std::to_string(c.level));
      }
    }
    levels[li] = std::move(blocks);
  }
  for (int level = 1; level <= structure.L; ++level) {
    if (!level_seen[static_cast<std::size_t>(level - 1)]) {
      throw DimensionError("missing contribution for level " + std::to_string(level));
    }
  }
  return HodlrMatrix(structure, std::move(levels), std::move(leaves), policy);
}

std::int64_t apply_levels(const std::vector<LevelFactors>& levels, const MatrixXd& X, Side side,
                          MatrixXd& Y) {
  std::int64_t flops = 0;
  const Index b = X.cols();
  for (const auto& blocks : levels) {
    if (blocks.empty()) continue;
    const Index m = blocks.front().rows();
    for (std::size_t jj = 0; jj < blocks.size(); ++jj) {
      const auto& f = blocks[jj];
      if (f.rank() == 0) continue;
      const Index col = static_cast<Index>(jj);
      const Index row = col ^ 1;
      if (side == Side::forward) {
        Y.middleRows(row * m, m).noalias() += f.Q * (f.X * X.middleRows(col * m, m));
      } else {
        Y.middleRows(col * m, m).noalias() +=
            f.X.transpose() * (f.Q.transpose() * X.middleRows(row * m, m));
      }
      flops += 4 * static_cast<std::int64_t>(m) * f.rank() * b;
    }
  }
  return flops;
}

MatrixXd hodlr_apply(const HodlrMatrix& H, const MatrixXd& X, Side side, std::int64_t* flops) {
  const auto& s = H.structure();
  if (X.rows() != s.n) {
    throw DimensionError("hodlr_apply: input has " + std::to_string(X.rows()) + " rows, expected " +
                         std::to_string(s.n));
  }
  MatrixXd Y = MatrixXd::Zero(s.n, X.cols());
  std::int64_t count = apply_levels(H.levels(), X, side, Y);
  const Index nb = s.n_base;
  for (std::size_t i = 0; i < H.leaves().size(); ++i) {
    const auto rows = static_cast<Index>(i) * nb;
    const auto& D = H.leaves()[i];
    if (side == Side::forward) {
      Y.middleRows(rows, nb).noalias() += D * X.middleRows(rows, nb);
    } else {
      Y.middleRows(rows, nb).noalias() += D.transpose() * X.middleRows(rows, nb);
    }
    count += 2 * static_cast<std::int64_t>(nb) * nb * X.cols();
  }
  if (flops) *flops = count;
  return Y;
}

LinearOperator as_operator(const HodlrMatrix& H) {
  return LinearOperator(
      H.size(), [H](const MatrixXd& X, Side side) { return hodlr_apply(H, X, side); }, "hodlr");
}

namespace {
void check_dense_size(Index n) {
  if (n > kMaxDenseSize) {
    throw ConfigError("dense expansion refused for n = " + std::to_string(n) + " > " +
                      std::to_string(kMaxDenseSize));
  }
}
}  // namespace

MatrixXd level_dense(const HodlrMatrix& H, int level) {
  const auto& s = H.structure();
  check_dense_size(s.n);
  if (level < 1 || level > s.L) throw DimensionError("no level " + std::to_string(level));
  MatrixXd A = MatrixXd::Zero(s.n, s.n);
  const Index m = s.block_size(level);
  const auto& blocks = H.levels()[static_cast<std::size_t>(level - 1)];
  for (std::size_t jj = 0; jj < blocks.size(); ++jj) {
    const Index col = static_cast<Index>(jj);
    A.block((col ^ 1) * m, col * m, m, m) = blocks[jj].dense();
  }
  return A;
}

MatrixXd to_dense(const HodlrMatrix& H) {
  const auto& s = H.structure();
  check_dense_size(s.n);
  MatrixXd A = MatrixXd::Zero(s.n, s.n);
  for (int level = 1; level <= s.L; ++level) {
    const Index m = s.block_size(level);
    const auto& blocks = H.levels()[static_cast<std::size_t>(level - 1)];
    for (std::size_t jj = 0; jj < blocks.size(); ++jj) {
      const Index col = static_cast<Index>(jj);
      A.block((col ^ 1) * m, col * m, m, m) = blocks[jj].dense();
    }
  }
  for (std::size_t i = 0; i < H.leaves().size(); ++i) {
    const Index r = static_cast<Index>(i) * s.n_base;
    A.block(r, r, s.n_base, s.n_base) = H.leaves()[i];
  }
  return A;
}

HodlrMatrix best_hodlr(const MatrixXd& A, Index k) {
  if (A.rows() != A.cols()) throw DimensionError("best_hodlr needs a square matrix");
  const HodlrStructure s = hodlr_structure(A.rows(), k);
  std::vector<LevelFactors> levels;
  for (int level = 1; level <= s.L; ++level) {
    const Index m = s.block_size(level);
    LevelFactors blocks;
    for (Index col = 0; col < s.block_count(level); ++col) {
      blocks.push_back(truncated_svd(A.block((col ^ 1) * m, col * m, m, m), k));
    }
    levels.push_back(std::move(blocks));
  }
  std::vector<MatrixXd> leaves;
  for (Index i = 0; i < s.block_count(s.L); ++i) {
    leaves.emplace_back(A.block(i * s.n_base, i * s.n_base, s.n_base, s.n_base));
  }
  return HodlrMatrix(s, std::move(levels), std::move(leaves));
}

HodlrMatrix random_hodlr(Index n, Index k, std::uint64_t seed) {
  const HodlrStructure s = hodlr_structure(n, k);
  std::vector<LevelFactors> levels;
  for (int level = 1; level <= s.L; ++level) {
    const Index m = s.block_size(level);
    const Index r = std::min(k, m);
    LevelFactors blocks;
    for (Index col = 0; col < s.block_count(level); ++col) {
      Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(level), static_cast<std::uint64_t>(col)});
      MatrixXd Q = orth(rng.gaussian(m, r));
      MatrixXd X = rng.gaussian(Q.cols(), m);
      blocks.push_back({std::move(Q), std::move(X)});
    }
    levels.push_back(std::move(blocks));
  }
  std::vector<MatrixXd> leaves;
  for (Index i = 0; i < s.block_count(s.L); ++i) {
    Rng rng = Rng::stream(seed, {0, static_cast<std::uint64_t>(i)});
    leaves.push_back(rng.gaussian(s.n_base, s.n_base));
  }
  return HodlrMatrix(s, std::move(levels), std::move(leaves));
}

}  // namespace perfpeel
