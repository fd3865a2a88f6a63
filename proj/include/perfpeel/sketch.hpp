#pragma once

// Randomly perforated Gaussian sketches.
//
// A BlockSelector is a d x t 0/1 matrix with at most one nonzero per row.
// The block row-wise product  X • Y  places x(i,j) * Y_i in block (i, j),
// so  selector • [G_1; ...; G_d]  is an n x (s t) sketch whose block row i
// holds G_i in the block column chosen by the selector (or nothing).

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "perfpeel/rng.hpp"

namespace perfpeel {

using Eigen::Index;
using Eigen::MatrixXd;

struct BlockSelector {
  Index d = 0;
  Index t = 0;
  /// column[i] is the nonzero column of row i, or -1 for an all-zero row.
  std::vector<Index> column;

  Index nonzero_column(Index row) const { return column[static_cast<std::size_t>(row)]; }
  bool row_is_zero(Index row) const { return nonzero_column(row) < 0; }
  MatrixXd dense() const;
};

/// Entrywise sum of two selectors with disjoint nonzero rows.
BlockSelector operator+(const BlockSelector& a, const BlockSelector& b);

/// Block row-wise Kronecker product. X is p x v, Y is (p u) x t; the
/// result is (p u) x (v t).
MatrixXd bullet(const MatrixXd& X, const MatrixXd& Y);

/// Each row gets a single 1 in a uniformly random column.
BlockSelector sample_countsketch(Index d, Index t, Rng& rng);

/// (xi+, xi-): one CountSketch with even (1-based) rows zeroed in xi+ and
/// odd rows zeroed in xi-. Requires even d.
std::pair<BlockSelector, BlockSelector> sample_perf_countsketch(Index d, Index t, Rng& rng);

/// Both perforated sketches of one level, sharing the Gaussian blocks.
struct SketchFamily {
  Index n = 0;
  Index d = 0;
  Index s = 0;
  Index t = 0;
  BlockSelector selector_plus;
  BlockSelector selector_minus;
  std::vector<MatrixXd> gaussian_blocks;  // d blocks, each (n/d) x s
  MatrixXd assembled_plus;                // n x (s t)
  MatrixXd assembled_minus;               // n x (s t)

  Index block_rows() const { return n / d; }
  /// Vertical stack of the Gaussian blocks (n x s).
  MatrixXd stacked_gaussians() const;
};

/// Samples RandPerfGaussian(n, d, s, t). The selectors and each Gaussian
/// block come from their own streams derived from stream_seed, so the
/// family is a pure function of (n, d, s, t, stream_seed).
SketchFamily sample_rand_perf_gaussian(Index n, Index d, Index s, Index t,
                                       std::uint64_t stream_seed);

/// Monte-Carlo estimate of E||X G H^+||_F^2 for G ~ Gaussian(cols(X), q),
/// H ~ Gaussian(p, q), compared with p/(q-p-1) ||X||_F^2.
struct PinvMomentCheck {
  double sample_mean = 0.0;
  double standard_error = 0.0;
  double expected = 0.0;
  double relative_deviation = 0.0;  // |mean - expected| / expected
  int trials = 0;
};
PinvMomentCheck check_gaussian_pinv_moment(const MatrixXd& X, Index p, Index q, int trials,
                                           std::uint64_t seed);

}  // namespace perfpeel
