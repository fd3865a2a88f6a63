#pragma once

// Low-rank approximation primitives: truncated SVD, orthonormal bases,
// randomized SVD, generalized Nystrom, and evaluable error bounds for
// these methods under sketching noise.

#include <cstdint>

#include <Eigen/Dense>

#include "perfpeel/linops.hpp"
#include "perfpeel/rng.hpp"

namespace perfpeel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Q X with Q column-orthonormal (m1 x r) and X of size r x m2.
struct LowRankFactors {
  MatrixXd Q;
  MatrixXd X;

  Index rows() const { return Q.rows(); }
  Index cols() const { return X.cols(); }
  Index rank() const { return Q.cols(); }
  MatrixXd dense() const;

  static LowRankFactors zero(Index rows, Index cols);
};

/// Best Frobenius rank-k approximation. Exactly-zero singular values are
/// dropped, so rank() can be less than k. Ties at the cut keep the order
/// returned by the SVD routine.
LowRankFactors truncated_svd(const MatrixXd& B, Index k);

/// Q [[X]]_k without forming Q X: the truncation of X is re-expressed in Q.
LowRankFactors truncate_in_basis(const MatrixXd& Q, const MatrixXd& X, Index k);

/// Orthonormal basis of range(Y) from column-pivoted Householder QR.
/// Columns whose |R(i,i)| <= eps * max(m, s) * ||Y||_2 are dropped; Y = 0
/// gives a basis with zero columns.
MatrixXd orth(const MatrixXd& Y);

/// Minimum-norm least-squares solution of A x = B via the SVD of A, with
/// singular values at or below eps * max(rows, cols) * sigma_max ignored.
MatrixXd pinv_solve(const MatrixXd& A, const MatrixXd& B);

/// Moore-Penrose pseudoinverse with the same cutoff as pinv_solve.
MatrixXd pinv(const MatrixXd& A);

/// Randomized SVD: Q = orth(B Omega), returns Q [[Q^T B]]_k.
LowRankFactors rsvd(const MatrixXd& B, Index k, Index sketch, Rng& rng);
/// Matrix-free variant: sketch forward queries, rank(Q) transpose queries.
LowRankFactors rsvd(const LinearOperator& op, Index k, Index sketch, Rng& rng);

/// Generalized Nystrom: Q = orth(B Omega), X = (Psi^T Q)^+ Psi^T B,
/// returns Q [[X]]_k. Requires left_sketch >= right_sketch >= k.
LowRankFactors gnm(const MatrixXd& B, Index k, Index right_sketch, Index left_sketch, Rng& rng);
LowRankFactors gnm(const LinearOperator& op, Index k, Index right_sketch, Index left_sketch,
                   Rng& rng);

/// Generalized Nystrom post-processing of given sketches.
///   Y   : m1 x s_R right sketch (possibly noisy)
///   Z   : s_L x m2 left sketch  (possibly noisy)
///   psi : m1 x s_L left test matrix that produced Z
/// Returns Q [[(psi^T Q)^+ Z]]_k with Q = orth(Y). With k < 0 the
/// truncation is skipped.
LowRankFactors gn_from_sketches(const MatrixXd& Y, const MatrixXd& Z, const MatrixXd& psi, Index k);

/// Split of B's SVD at rank k and the projections of a test matrix Omega
/// onto the top and bottom right singular subspaces.
struct SvdSplit {
  MatrixXd U_top, U_bot;
  MatrixXd V_top, V_bot;
  VectorXd sigma_top, sigma_bot;
  MatrixXd omega_top;  // V_top^T Omega
  MatrixXd omega_bot;  // V_bot^T Omega
};
SvdSplit split_svd(const MatrixXd& B, const MatrixXd& Omega, Index k);

/// Right-hand side of the deterministic perturbation bound
///   ||E1 Omega_top^+||_F + 2 ||E2||_F
///     + (||Sigma_bot||_F^2 + ||Sigma_bot Omega_bot Omega_top^+||_F^2)^{1/2}
/// for ||B - Q [[Q^T B + E2]]_k||_F with Q = orth(B Omega + E1).
/// Throws ConfigError unless rank(Omega_top) = k.
double rsvd_perturb_bound_rhs(const MatrixXd& B, const MatrixXd& Omega, const MatrixXd& E1,
                              const MatrixXd& E2, Index k);

/// Left-hand side of the same bound: ||B - Q [[Q^T B + E2]]_k||_F with
/// Q = orth(B Omega + E1). E2 must have rank(Q) rows.
double rsvd_perturbed_error(const MatrixXd& B, const MatrixXd& Omega, const MatrixXd& E1,
                            const MatrixXd& E2, Index k);

/// Expected squared-error bound E1 + E2 + 2 sqrt(E1 E2) for generalized
/// Nystrom with Gaussian sketching noise M Omega~ and Psi~^T N:
///   E1 = (1 + k/(sR-k-1)) opt2
///   E2 = 18k/(sR-k-1) |M|^2 + 8 sR/(sL-sR-1) |N|^2 + 32 sR/(sL-sR-1) opt2
/// Requires sR > 2k+1 and sL > 2 sR + 1.
double gn_error_bound(Index k, Index right_sketch, Index left_sketch, double normM2, double normN2,
                      double opt2);

// Executable checks of the perturbation bounds, shared by the tests, the
// acceptance suite and the check-bounds command.

struct PointwiseBoundCheck {
  int instances = 0;
  int satisfied = 0;
  double worst_slack = 0.0;  // min over instances of rhs + 1e-10 - lhs
};
/// Random B, Omega, E1, E2 with m1, m2 <= 30 and k <= 5; each instance is
/// checked for lhs <= rhs + 1e-10.
PointwiseBoundCheck check_perturbation_pointwise(int instances, std::uint64_t seed);

struct ExpectationBoundCheck {
  int trials = 0;
  double mean_squared_error = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  bool passed = false;  // mean <= bound + 3 standard errors
};
/// Monte-Carlo check of gn_error_bound with fresh Gaussian sketches and
/// noise (Q = orth(B Omega + M Omega~), X = (Psi^T Q)^+ (Psi^T B + Psi~^T N)).
ExpectationBoundCheck check_gn_expectation(const MatrixXd& B, const MatrixXd& M, const MatrixXd& N,
                                           Index k, Index right_sketch, Index left_sketch,
                                           int trials, std::uint64_t seed);

}  // namespace perfpeel
