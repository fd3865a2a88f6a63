#pragma once

// HODLR(k) matrices.
//
// At level l (1..L) the matrix is split into 2^l x 2^l blocks of size
// n / 2^l. The off-diagonal blocks stored at level l are those whose parent
// at level l-1 is a diagonal block: with 0-based block indices these are
// (j ^ 1, j) for j = 0..2^l-1. The 2^L diagonal blocks of the finest level
// are stored densely.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perfpeel/linops.hpp"
#include "perfpeel/lowrank.hpp"

namespace perfpeel {

/// Level count and leaf size for an (n, k) pair.
struct HodlrStructure {
  Index n = 0;
  Index k = 0;
  int L = 0;
  Index n_base = 0;

  Index block_size(int level) const { return n >> level; }
  Index block_count(int level) const { return Index{1} << level; }
};

/// L is the smallest integer with n <= k 2^L, i.e. ceil(log2(n/k)); n must
/// be divisible by 2^L, which puts the leaf size n_base in (k/2, k].
/// Throws ConfigError for k < 1 or n < 1 and DimensionError when 2^L does
/// not divide n.
HodlrStructure hodlr_structure(Index n, Index k);

/// Off-diagonal factors produced at one level. blocks[j] approximates block
/// (j ^ 1, j) of the 2^level x 2^level partition.
using LevelFactors = std::vector<LowRankFactors>;

/// One level's output as (row, col, factors) triples, as handed to assemble.
struct BlockFactor {
  Index row = 0;
  Index col = 0;
  LowRankFactors factors;
};
struct LevelContribution {
  int level = 0;
  std::vector<BlockFactor> blocks;
};

enum class RankPolicy {
  strict,   // every off-diagonal factor has rank <= k
  relaxed,  // ranks up to the block size (untruncated peeling output)
};

class HodlrMatrix {
 public:
  HodlrMatrix() = default;
  HodlrMatrix(HodlrStructure structure, std::vector<LevelFactors> levels,
              std::vector<MatrixXd> leaves, RankPolicy policy = RankPolicy::strict);

  const HodlrStructure& structure() const { return structure_; }
  Index size() const { return structure_.n; }
  Index rank_parameter() const { return structure_.k; }
  int level_count() const { return structure_.L; }

  /// levels()[l - 1][j] holds block (j ^ 1, j) of level l.
  const std::vector<LevelFactors>& levels() const { return levels_; }
  const std::vector<MatrixXd>& leaves() const { return leaves_; }

  /// Largest rank among the off-diagonal factors.
  Index max_rank() const;

 private:
  HodlrStructure structure_;
  std::vector<LevelFactors> levels_;
  std::vector<MatrixXd> leaves_;
};

/// Builds a HodlrMatrix from one contribution per level and the leaf
/// diagonal blocks. Rejects missing levels, blocks outside the level's
/// territory (any block whose parent is off-diagonal would overlap a
/// coarser level), duplicate or missing blocks, and wrong shapes.
HodlrMatrix assemble(const HodlrStructure& structure, const std::vector<LevelContribution>& contribs,
                     std::vector<MatrixXd> leaves, RankPolicy policy = RankPolicy::strict);

/// Adds (sum of the given levels) X, or its transpose product, to Y.
/// levels[l - 1] is level l; only the levels present are applied. Returns
/// the number of floating-point operations used.
std::int64_t apply_levels(const std::vector<LevelFactors>& levels, const MatrixXd& X, Side side,
                          MatrixXd& Y);

/// H X or H^T X. If flops is given it receives the operation count.
MatrixXd hodlr_apply(const HodlrMatrix& H, const MatrixXd& X, Side side,
                     std::int64_t* flops = nullptr);

/// Matrix-free view of H (queries are counted like any other operator).
LinearOperator as_operator(const HodlrMatrix& H);

/// Largest n accepted by the dense conversions below.
inline constexpr Index kMaxDenseSize = 8192;

MatrixXd to_dense(const HodlrMatrix& H);

/// Dense matrix holding only the blocks of one level (1..L).
MatrixXd level_dense(const HodlrMatrix& H, int level);

/// Frobenius-optimal HODLR(k) approximation: truncated SVD of every stored
/// off-diagonal block and exact leaf blocks.
HodlrMatrix best_hodlr(const MatrixXd& A, Index k);

/// Random exactly-HODLR(k) matrix: every off-diagonal block has rank
/// exactly min(k, block size) and Gaussian leaves.
HodlrMatrix random_hodlr(Index n, Index k, std::uint64_t seed);

/// Binary container (all integers and floats little-endian):
///   "HODLRPK\0" | u32 version | u64 n | u64 k | u32 L
///   for each level 1..L, for each block j: u64 j | u64 rank r |
///       Q (m x r) row-major f64 | X (r x m) row-major f64
///   for each leaf: n_base x n_base row-major f64
///   u64 FNV-1a hash of all preceding bytes
std::string serialize(const HodlrMatrix& H);
HodlrMatrix deserialize(const std::string& bytes);

void save_hodlr(const std::string& path, const HodlrMatrix& H);
HodlrMatrix load_hodlr(const std::string& path);

inline constexpr std::uint32_t kHodlrFormatVersion = 1;

}  // namespace perfpeel
