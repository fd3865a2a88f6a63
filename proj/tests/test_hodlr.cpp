#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "perfpeel/errors.hpp"
#include "perfpeel/hodlr.hpp"

using namespace perfpeel;

namespace {

// Block-by-block optimum built straight from the definition: walk every
// level, truncate the two off-diagonal children of each diagonal block.
MatrixXd brute_force_best(const MatrixXd& A, Index k, int L) {
  const Index n = A.rows();
  MatrixXd out = MatrixXd::Zero(n, n);
  for (int l = 1; l <= L; ++l) {
    const Index m = n >> l;
    for (Index p = 0; p < (Index{1} << (l - 1)); ++p) {
      const Index r0 = 2 * p * m, r1 = (2 * p + 1) * m;
      for (auto [r, c] : {std::pair{r0, r1}, std::pair{r1, r0}}) {
        Eigen::JacobiSVD<MatrixXd> svd(A.block(r, c, m, m), Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Index kk = std::min(k, m);
        out.block(r, c, m, m) = svd.matrixU().leftCols(kk) *
                                svd.singularValues().head(kk).asDiagonal() *
                                svd.matrixV().leftCols(kk).transpose();
      }
    }
  }
  const Index nb = n >> L;
  for (Index j = 0; j < (Index{1} << L); ++j) out.block(j * nb, j * nb, nb, nb) = A.block(j * nb, j * nb, nb, nb);
  return out;
}

}  // namespace

TEST(Structure, LevelsAndLeafSize) {
  const HodlrStructure s = hodlr_structure(256, 4);
  EXPECT_EQ(s.L, 6);
  EXPECT_EQ(s.n_base, 4);
  EXPECT_EQ(hodlr_structure(96, 4).L, 5);   // 96 / 32 = 3
  EXPECT_EQ(hodlr_structure(96, 4).n_base, 3);
  EXPECT_EQ(hodlr_structure(8, 8).L, 0);
  EXPECT_EQ(hodlr_structure(1024, 1).L, 10);
  EXPECT_EQ(s.block_size(2), 64);
  EXPECT_EQ(s.block_count(3), 8);
}

TEST(Structure, RejectsBadSizes) {
  EXPECT_THROW(hodlr_structure(100, 8), DimensionError);  // 2^4 does not divide 100
  EXPECT_THROW(hodlr_structure(0, 2), ConfigError);
  EXPECT_THROW(hodlr_structure(16, 0), ConfigError);
}

TEST(Hodlr, RandomMatrixHasExactStructure) {
  const HodlrMatrix H = random_hodlr(64, 3, 7);
  EXPECT_EQ(H.level_count(), 5);
  EXPECT_EQ(H.max_rank(), 3);
  const MatrixXd A = to_dense(H);
  for (int l = 1; l <= H.level_count(); ++l) {
    const Index m = 64 >> l;
    for (Index j = 0; j < (Index{1} << l); ++j) {
      Eigen::JacobiSVD<MatrixXd> svd(A.block((j ^ 1) * m, j * m, m, m));
      const VectorXd s = svd.singularValues();
      const Index r = std::min<Index>(3, m);
      EXPECT_GT(s(r - 1), 1e-8 * s(0));
      if (s.size() > r) EXPECT_LT(s(r), 1e-10 * s(0));
    }
  }
  EXPECT_EQ(to_dense(random_hodlr(64, 3, 7)), A);
}

TEST(Hodlr, ApplyMatchesDense) {
  const HodlrMatrix H = random_hodlr(48, 3, 1);
  const MatrixXd A = to_dense(H);
  Rng rng(2);
  const MatrixXd X = rng.gaussian(48, 3);
  std::int64_t flops = 0;
  EXPECT_LE((hodlr_apply(H, X, Side::forward, &flops) - A * X).norm(), 1e-12 * A.norm() * X.norm());
  EXPECT_GT(flops, 0);
  EXPECT_LE((hodlr_apply(H, X, Side::transpose) - A.transpose() * X).norm(), 1e-12 * A.norm() * X.norm());
  LinearOperator op = as_operator(H);
  EXPECT_TRUE(materialize(op).isApprox(A));
}

TEST(Hodlr, LevelDenseSumsToWhole) {
  const HodlrMatrix H = random_hodlr(32, 2, 4);
  MatrixXd sum = MatrixXd::Zero(32, 32);
  for (int l = 1; l <= H.level_count(); ++l) sum += level_dense(H, l);
  const Index nb = H.structure().n_base;
  for (Index j = 0; j < 16; ++j) sum.block(j * nb, j * nb, nb, nb) += H.leaves()[std::size_t(j)];
  EXPECT_LE((sum - to_dense(H)).norm(), 1e-12 * sum.norm());
}

TEST(Hodlr, StrictPolicyRejectsHighRank) {
  const HodlrStructure s = hodlr_structure(8, 2);  // L = 2, blocks of 4 and 2
  Rng rng(3);
  std::vector<LevelFactors> levels(2);
  for (int j = 0; j < 2; ++j) levels[0].push_back(truncated_svd(rng.gaussian(4, 4), 3));
  for (int j = 0; j < 4; ++j) levels[1].push_back(truncated_svd(rng.gaussian(2, 2), 2));
  std::vector<MatrixXd> leaves(4, MatrixXd::Zero(2, 2));
  EXPECT_THROW(HodlrMatrix(s, levels, leaves, RankPolicy::strict), ConfigError);
  EXPECT_NO_THROW(HodlrMatrix(s, levels, leaves, RankPolicy::relaxed));
}

TEST(Assemble, BuildsFromContributions) {
  const HodlrMatrix H = random_hodlr(16, 2, 5);
  std::vector<LevelContribution> contribs;
  for (int l = 1; l <= H.level_count(); ++l) {
    LevelContribution c{l, {}};
    const auto& level = H.levels()[std::size_t(l - 1)];
    for (Index j = Index(level.size()) - 1; j >= 0; --j) c.blocks.push_back({j ^ 1, j, level[std::size_t(j)]});
    contribs.push_back(c);
  }
  const HodlrMatrix G = assemble(H.structure(), contribs, H.leaves());
  EXPECT_EQ(to_dense(G), to_dense(H));
}

TEST(Assemble, RejectsMalformedInput) {
  const HodlrMatrix H = random_hodlr(16, 2, 6);
  const auto base = [&] {
    std::vector<LevelContribution> contribs;
    for (int l = 1; l <= H.level_count(); ++l) {
      LevelContribution c{l, {}};
      const auto& level = H.levels()[std::size_t(l - 1)];
      for (Index j = 0; j < Index(level.size()); ++j) c.blocks.push_back({j ^ 1, j, level[std::size_t(j)]});
      contribs.push_back(c);
    }
    return contribs;
  };
  auto missing = base();
  missing[1].blocks.pop_back();
  EXPECT_THROW(assemble(H.structure(), missing, H.leaves()), DimensionError);

  auto duplicate = base();
  duplicate[1].blocks.push_back(duplicate[1].blocks.front());
  EXPECT_THROW(assemble(H.structure(), duplicate, H.leaves()), DimensionError);

  auto overlap = base();  // block (0, 2) at level 2 lies inside level 1's block
  overlap[1].blocks[0].row = 0;
  overlap[1].blocks[0].col = 2;
  EXPECT_THROW(assemble(H.structure(), overlap, H.leaves()), DimensionError);

  auto diagonal = base();
  diagonal[1].blocks[0].row = diagonal[1].blocks[0].col;
  EXPECT_THROW(assemble(H.structure(), diagonal, H.leaves()), DimensionError);

  auto bad_level = base();
  bad_level[0].level = 7;
  EXPECT_THROW(assemble(H.structure(), bad_level, H.leaves()), DimensionError);

  auto bad_shape = base();
  bad_shape[0].blocks[0].factors = LowRankFactors::zero(3, 8);
  EXPECT_THROW(assemble(H.structure(), bad_shape, H.leaves()), DimensionError);

  std::vector<MatrixXd> leaves = H.leaves();
  leaves.pop_back();
  EXPECT_THROW(assemble(H.structure(), base(), leaves), DimensionError);
}

TEST(BestHodlr, MatchesBruteForceAndIsOptimalAmongCandidates) {
  Rng rng(7);
  for (int t = 0; t < 5; ++t) {
    const MatrixXd A = rng.gaussian(32, 32);
    const HodlrMatrix H = best_hodlr(A, 2);
    const MatrixXd B = brute_force_best(A, 2, H.level_count());
    EXPECT_LE((to_dense(H) - B).norm(), 1e-12 * A.norm());
    const double opt = (A - B).norm();
    const HodlrMatrix other = random_hodlr(32, 2, 100 + std::uint64_t(t));
    EXPECT_LE(opt, (A - to_dense(other)).norm());
  }
}

TEST(BestHodlr, FixedPointOnExactHodlr) {
  const HodlrMatrix H = random_hodlr(64, 4, 9);
  const MatrixXd A = to_dense(H);
  EXPECT_LE((to_dense(best_hodlr(A, 4)) - A).norm(), 1e-10 * A.norm());
}

TEST(Serialization, RoundTripIsBitExact) {
  const HodlrMatrix H = random_hodlr(64, 3, 11);
  const std::string bytes = serialize(H);
  const HodlrMatrix G = deserialize(bytes);
  EXPECT_EQ(serialize(G), bytes);
  EXPECT_EQ(to_dense(G), to_dense(H));
  EXPECT_EQ(bytes.substr(0, 8), std::string("HODLRPK\0", 8));
}

TEST(Serialization, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "perfpeel_roundtrip.hodlr";
  const HodlrMatrix H = random_hodlr(32, 2, 12);
  save_hodlr(path.string(), H);
  EXPECT_EQ(serialize(load_hodlr(path.string())), serialize(H));
  std::filesystem::remove(path);
  EXPECT_THROW(load_hodlr(path.string()), std::runtime_error);
}

TEST(Serialization, DetectsCorruption) {
  const std::string bytes = serialize(random_hodlr(16, 2, 13));
  std::string flipped = bytes;
  flipped[40] ^= 0x01;
  EXPECT_THROW(deserialize(flipped), FormatError);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(deserialize(bytes + "x"), FormatError);
  EXPECT_THROW(deserialize(""), FormatError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize(magic), FormatError);
}
