#include "perfpeel/sketch.hpp"

#include <string>
#include <tuple>

#include "perfpeel/errors.hpp"

namespace perfpeel {

namespace {
// Stream labels under a family seed.
constexpr std::uint64_t kSelectorStream = 0;
constexpr std::uint64_t kGaussianStream = 1;
}  // namespace

MatrixXd BlockSelector::dense() const {
  MatrixXd M = MatrixXd::Zero(d, t);
  for (Index i = 0; i < d; ++i)
    if (!row_is_zero(i)) M(i, nonzero_column(i)) = 1.0;
  return M;
}

BlockSelector operator+(const BlockSelector& a, const BlockSelector& b) {
  if (a.d != b.d || a.t != b.t) throw DimensionError("selector shapes differ");
  BlockSelector sum{a.d, a.t, a.column};
  for (Index i = 0; i < a.d; ++i) {
    if (b.row_is_zero(i)) continue;
    if (!a.row_is_zero(i)) throw DimensionError("selectors overlap in row " + std::to_string(i));
    sum.column[static_cast<std::size_t>(i)] = b.nonzero_column(i);
  }
  return sum;
}

MatrixXd bullet(const MatrixXd& X, const MatrixXd& Y) {
  const Index p = X.rows();
  const Index v = X.cols();
  if (p == 0 || Y.rows() % p != 0) {
    throw DimensionError("bullet: row count of Y (" + std::to_string(Y.rows()) +
                         ") is not a multiple of rows of X (" + std::to_string(p) + ")");
  }
  const Index u = Y.rows() / p;
  const Index t = Y.cols();
  MatrixXd out = MatrixXd::Zero(p * u, v * t);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < v; ++j) {
      if (X(i, j) != 0.0) out.block(i * u, j * t, u, t) = X(i, j) * Y.middleRows(i * u, u);
    }
  }
  return out;
}

BlockSelector sample_countsketch(Index d, Index t, Rng& rng) {
  if (d < 1 || t < 1) throw ConfigError("CountSketch needs d, t >= 1");
  BlockSelector xi{d, t, std::vector<Index>(static_cast<std::size_t>(d))};
  for (auto& c : xi.column) c = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(t)));
  return xi;
}

std::pair<BlockSelector, BlockSelector> sample_perf_countsketch(Index d, Index t, Rng& rng) {
  if (d % 2 != 0) throw ConfigError("PerfCountSketch needs an even number of block rows");
  const BlockSelector xi = sample_countsketch(d, t, rng);
  BlockSelector plus = xi;
  BlockSelector minus = xi;
  // 0-based even rows are the 1-based odd rows.
  for (Index i = 0; i < d; ++i) {
    if (i % 2 == 0) {
      minus.column[static_cast<std::size_t>(i)] = -1;
    } else {
      plus.column[static_cast<std::size_t>(i)] = -1;
    }
  }
  return {std::move(plus), std::move(minus)};
}

MatrixXd SketchFamily::stacked_gaussians() const {
  MatrixXd G(n, s);
  const Index m = block_rows();
  for (Index i = 0; i < d; ++i) G.middleRows(i * m, m) = gaussian_blocks[static_cast<std::size_t>(i)];
  return G;
}

SketchFamily sample_rand_perf_gaussian(Index n, Index d, Index s, Index t,
                                       std::uint64_t stream_seed) {
  if (d < 2 || d % 2 != 0) throw ConfigError("RandPerfGaussian needs an even d >= 2");
  if (s < 1 || t < 1) throw ConfigError("RandPerfGaussian needs s, t >= 1");
  if (n % d != 0) {
    throw DimensionError("RandPerfGaussian: d = " + std::to_string(d) + " does not divide n = " +
                         std::to_string(n));
  }
  SketchFamily fam;
  fam.n = n;
  fam.d = d;
  fam.s = s;
  fam.t = t;

  Rng selector_rng = Rng::stream(stream_seed, {kSelectorStream});
  std::tie(fam.selector_plus, fam.selector_minus) = sample_perf_countsketch(d, t, selector_rng);

  const Index m = n / d;
  fam.gaussian_blocks.reserve(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    Rng block_rng = Rng::stream(stream_seed, {kGaussianStream, static_cast<std::uint64_t>(i)});
    fam.gaussian_blocks.push_back(block_rng.gaussian(m, s));
  }

  // Same layout as bullet(selector.dense(), stacked_gaussians()), written
  // block by block to avoid forming the stacked matrix.
  fam.assembled_plus = MatrixXd::Zero(n, s * t);
  fam.assembled_minus = MatrixXd::Zero(n, s * t);
  for (Index i = 0; i < d; ++i) {
    const auto& G = fam.gaussian_blocks[static_cast<std::size_t>(i)];
    if (!fam.selector_plus.row_is_zero(i))
      fam.assembled_plus.block(i * m, fam.selector_plus.nonzero_column(i) * s, m, s) = G;
    if (!fam.selector_minus.row_is_zero(i))
      fam.assembled_minus.block(i * m, fam.selector_minus.nonzero_column(i) * s, m, s) = G;
  }
  return fam;
}

}  // namespace perfpeel
