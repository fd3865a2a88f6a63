#include "perfpeel/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "perfpeel/errors.hpp"

namespace perfpeel {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

Eigen::BDCSVD<MatrixXd> thin_svd(const MatrixXd& A) {
  return Eigen::BDCSVD<MatrixXd>(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

double spectral_norm(const MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXd> svd(A);
  return svd.singularValues()(0);
}

}  // namespace

MatrixXd LowRankFactors::dense() const {
  if (rank() == 0) return MatrixXd::Zero(rows(), cols());
  return Q * X;
}

LowRankFactors LowRankFactors::zero(Index rows, Index cols) {
  return {MatrixXd(rows, 0), MatrixXd(0, cols)};
}

LowRankFactors truncated_svd(const MatrixXd& B, Index k) {
  if (k < 1) throw ConfigError("truncated_svd needs k >= 1");
  if (B.size() == 0) return LowRankFactors::zero(B.rows(), B.cols());
  const auto svd = thin_svd(B);
  const VectorXd& sigma = svd.singularValues();
  Index r = std::min<Index>(k, sigma.size());
  while (r > 0 && sigma(r - 1) == 0.0) --r;
  return {svd.matrixU().leftCols(r),
          sigma.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose()};
}

LowRankFactors truncate_in_basis(const MatrixXd& Q, const MatrixXd& X, Index k) {
  LowRankFactors inner = truncated_svd(X, k);
  if (inner.rank() == 0) return LowRankFactors::zero(Q.rows(), X.cols());
  return {Q * inner.Q, std::move(inner.X)};
}

MatrixXd orth(const MatrixXd& Y) {
  const Index m = Y.rows();
  const Index s = Y.cols();
  if (Y.size() == 0) return MatrixXd(m, 0);
  const double norm2 = spectral_norm(Y);
  if (norm2 == 0.0) return MatrixXd(m, 0);

  Eigen::ColPivHouseholderQR<MatrixXd> qr(Y);
  const double tol = kEps * static_cast<double>(std::max(m, s)) * norm2;
  const auto& R = qr.matrixQR();
  const Index diag = std::min(m, s);
  Index r = 0;
  while (r < diag && std::abs(R(r, r)) > tol) ++r;
  MatrixXd Q = MatrixXd::Identity(m, r);
  Q.applyOnTheLeft(qr.householderQ());
  return Q;
}

MatrixXd pinv_solve(const MatrixXd& A, const MatrixXd& B) {
  if (A.rows() != B.rows()) {
    throw DimensionError("pinv_solve: A has " + std::to_string(A.rows()) + " rows but B has " +
                         std::to_string(B.rows()));
  }
  if (A.size() == 0) return MatrixXd::Zero(A.cols(), B.cols());
  const auto svd = thin_svd(A);
  const VectorXd& sigma = svd.singularValues();
  if (sigma(0) == 0.0) return MatrixXd::Zero(A.cols(), B.cols());
  const double cutoff = kEps * static_cast<double>(std::max(A.rows(), A.cols())) * sigma(0);
  Index r = 0;
  while (r < sigma.size() && sigma(r) > cutoff) ++r;
  const VectorXd inv = sigma.head(r).cwiseInverse();
  return svd.matrixV().leftCols(r) * (inv.asDiagonal() * (svd.matrixU().leftCols(r).transpose() * B));
}

MatrixXd pinv(const MatrixXd& A) {
  return pinv_solve(A, MatrixXd::Identity(A.rows(), A.rows()));
}

LowRankFactors rsvd(const MatrixXd& B, Index k, Index sketch, Rng& rng) {
  if (sketch < k) throw ConfigError("rsvd: sketch size must be at least k");
  const MatrixXd omega = rng.gaussian(B.cols(), sketch);
  const MatrixXd Q = orth(B * omega);
  if (Q.cols() == 0) return LowRankFactors::zero(B.rows(), B.cols());
  return truncate_in_basis(Q, Q.transpose() * B, k);
}

LowRankFactors rsvd(const LinearOperator& op, Index k, Index sketch, Rng& rng) {
  if (sketch < k) throw ConfigError("rsvd: sketch size must be at least k");
  const Index n = op.size();
  const MatrixXd omega = rng.gaussian(n, sketch);
  const MatrixXd Q = orth(op.apply(omega, Side::forward));
  if (Q.cols() == 0) return LowRankFactors::zero(n, n);
  const MatrixXd X = op.apply(Q, Side::transpose).transpose();
  return truncate_in_basis(Q, X, k);
}

namespace {
void check_gnm_sizes(Index k, Index right_sketch, Index left_sketch) {
  if (k < 1 || right_sketch < k || left_sketch < right_sketch) {
    throw ConfigError("gnm needs left_sketch >= right_sketch >= k >= 1");
  }
}
}  // namespace

LowRankFactors gnm(const MatrixXd& B, Index k, Index right_sketch, Index left_sketch, Rng& rng) {
  check_gnm_sizes(k, right_sketch, left_sketch);
  const MatrixXd omega = rng.gaussian(B.cols(), right_sketch);
  const MatrixXd psi = rng.gaussian(B.rows(), left_sketch);
  return gn_from_sketches(B * omega, psi.transpose() * B, psi, k);
}

LowRankFactors gnm(const LinearOperator& op, Index k, Index right_sketch, Index left_sketch,
                   Rng& rng) {
  check_gnm_sizes(k, right_sketch, left_sketch);
  const Index n = op.size();
  const MatrixXd omega = rng.gaussian(n, right_sketch);
  const MatrixXd psi = rng.gaussian(n, left_sketch);
  const MatrixXd Y = op.apply(omega, Side::forward);
  const MatrixXd Z = op.apply(psi, Side::transpose).transpose();
  return gn_from_sketches(Y, Z, psi, k);
}

LowRankFactors gn_from_sketches(const MatrixXd& Y, const MatrixXd& Z, const MatrixXd& psi,
                                Index k) {
  if (psi.rows() != Y.rows() || psi.cols() != Z.rows()) {
    throw DimensionError("gn_from_sketches: left test matrix is " + std::to_string(psi.rows()) +
                         " x " + std::to_string(psi.cols()) + ", expected " +
                         std::to_string(Y.rows()) + " x " + std::to_string(Z.rows()));
  }
  const MatrixXd Q = orth(Y);
  if (Q.cols() == 0) return LowRankFactors::zero(Y.rows(), Z.cols());
  const MatrixXd psi_t_q = psi.transpose() * Q;
  if (psi_t_q.rows() < psi_t_q.cols()) {
    throw DimensionError("gn_from_sketches: underdetermined regression (" +
                         std::to_string(psi_t_q.rows()) + " rows < " +
                         std::to_string(psi_t_q.cols()) + " columns)");
  }
  MatrixXd X = pinv_solve(psi_t_q, Z);
  if (k < 0) return {Q, std::move(X)};
  return truncate_in_basis(Q, X, k);
}

SvdSplit split_svd(const MatrixXd& B, const MatrixXd& Omega, Index k) {
  const Index m1 = B.rows();
  const Index m2 = B.cols();
  if (Omega.rows() != m2) throw DimensionError("split_svd: Omega must have cols(B) rows");
  if (k < 1 || k > std::min(m1, m2)) throw ConfigError("split_svd: need 1 <= k <= min(m1, m2)");
  Eigen::JacobiSVD<MatrixXd> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sigma = svd.singularValues();
  SvdSplit split;
  split.U_top = svd.matrixU().leftCols(k);
  split.U_bot = svd.matrixU().rightCols(m1 - k);
  split.V_top = svd.matrixV().leftCols(k);
  split.V_bot = svd.matrixV().rightCols(m2 - k);
  split.sigma_top = sigma.head(k);
  split.sigma_bot = sigma.tail(sigma.size() - k);
  split.omega_top = split.V_top.transpose() * Omega;
  split.omega_bot = split.V_bot.transpose() * Omega;
  return split;
}

double rsvd_perturb_bound_rhs(const MatrixXd& B, const MatrixXd& Omega, const MatrixXd& E1,
                              const MatrixXd& E2, Index k) {
  if (E1.rows() != B.rows() || E1.cols() != Omega.cols()) {
    throw DimensionError("rsvd_perturb_bound_rhs: E1 must be rows(B) x cols(Omega)");
  }
  const SvdSplit split = split_svd(B, Omega, k);

  Eigen::JacobiSVD<MatrixXd> top(split.omega_top);
  const VectorXd& sv = top.singularValues();
  const double tol = kEps * static_cast<double>(std::max(split.omega_top.rows(), split.omega_top.cols())) *
                     (sv.size() ? sv(0) : 0.0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  if (rank != k) {
    throw ConfigError("rsvd_perturb_bound_rhs: Omega_top has rank " + std::to_string(rank) +
                      " < k = " + std::to_string(k));
  }

  const MatrixXd top_pinv = pinv(split.omega_top);
  const Index nb = split.sigma_bot.size();
  const MatrixXd scaled_bot = split.sigma_bot.asDiagonal() * split.omega_bot.topRows(nb);
  const double tail2 = split.sigma_bot.squaredNorm() + (scaled_bot * top_pinv).squaredNorm();
  return (E1 * top_pinv).norm() + 2.0 * E2.norm() + std::sqrt(tail2);
}

double rsvd_perturbed_error(const MatrixXd& B, const MatrixXd& Omega, const MatrixXd& E1,
                            const MatrixXd& E2, Index k) {
  const MatrixXd Q = orth(B * Omega + E1);
  if (E2.rows() != Q.cols() || E2.cols() != B.cols()) {
    throw DimensionError("rsvd_perturbed_error: E2 must be rank(Q) x cols(B), rank(Q) = " +
                         std::to_string(Q.cols()));
  }
  if (Q.cols() == 0) return B.norm();
  const LowRankFactors approx = truncate_in_basis(Q, Q.transpose() * B + E2, k);
  return (B - approx.dense()).norm();
}

double gn_error_bound(Index k, Index right_sketch, Index left_sketch, double normM2, double normN2,
                      double opt2) {
  if (right_sketch <= 2 * k + 1 || left_sketch <= 2 * right_sketch + 1) {
    throw ConfigError("gn_error_bound needs s_R > 2k + 1 and s_L > 2 s_R + 1");
  }
  const double kk = static_cast<double>(k);
  const double sr = static_cast<double>(right_sketch);
  const double sl = static_cast<double>(left_sketch);
  const double range_ratio = kk / (sr - kk - 1.0);
  const double regression_ratio = sr / (sl - sr - 1.0);
  const double e1 = (1.0 + range_ratio) * opt2;
  const double e2 = 18.0 * range_ratio * normM2 + 8.0 * regression_ratio * normN2 +
                    32.0 * regression_ratio * opt2;
  return e1 + e2 + 2.0 * std::sqrt(e1 * e2);
}

}  // namespace perfpeel
