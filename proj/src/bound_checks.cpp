#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "perfpeel/errors.hpp"
#include "perfpeel/lowrank.hpp"
#include "perfpeel/sketch.hpp"

namespace perfpeel {

namespace {

struct RunningMoments {
  int count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  double standard_error() const {
    if (count < 2) return 0.0;
    return std::sqrt(m2 / (count - 1) / count);
  }
};

Index draw_between(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Random matrix with a spectrum that is flat, decaying, or exactly low rank.
MatrixXd random_test_matrix(Rng& rng, Index m1, Index m2) {
  const Index p = std::min(m1, m2);
  const MatrixXd U = orth(rng.gaussian(m1, p));
  const MatrixXd V = orth(rng.gaussian(m2, p));
  VectorXd sigma(p);
  const auto shape = rng.uniform_index(3);
  const Index cut = draw_between(rng, 1, p);
  for (Index i = 0; i < p; ++i) {
    switch (shape) {
      case 0: sigma(i) = 1.0 + rng.uniform(); break;
      case 1: sigma(i) = std::pow(0.6, static_cast<double>(i)); break;
      default: sigma(i) = i < cut ? 1.0 + rng.uniform() : 0.0; break;
    }
  }
  const double scale = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
  return scale * (U.leftCols(sigma.size()) * sigma.asDiagonal() * V.leftCols(sigma.size()).transpose());
}

}  // namespace

PointwiseBoundCheck check_perturbation_pointwise(int instances, std::uint64_t seed) {
  PointwiseBoundCheck result;
  result.worst_slack = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < instances; ++trial) {
    Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(trial)});
    const Index k = draw_between(rng, 1, 5);
    const Index m1 = draw_between(rng, k, 30);
    const Index m2 = draw_between(rng, k, 30);
    const Index s = draw_between(rng, k, 30);
    const MatrixXd B = random_test_matrix(rng, m1, m2);
    const MatrixXd omega = rng.gaussian(m2, s);

    // Noise scales relative to B; some instances are noise free.
    const double e1_scale = rng.uniform_index(4) == 0 ? 0.0 : rng.uniform() * B.norm() / std::sqrt(static_cast<double>(m1 * s));
    const MatrixXd E1 = e1_scale * rng.gaussian(m1, s);
    const Index r = orth(B * omega + E1).cols();
    const double e2_scale = rng.uniform_index(4) == 0 ? 0.0 : rng.uniform() * B.norm() / std::sqrt(static_cast<double>(std::max<Index>(r, 1) * m2));
    const MatrixXd E2 = e2_scale * rng.gaussian(r, m2);

    const double lhs = rsvd_perturbed_error(B, omega, E1, E2, k);
    const double rhs = rsvd_perturb_bound_rhs(B, omega, E1, E2, k);
    const double slack = rhs + 1e-10 - lhs;
    ++result.instances;
    if (slack >= 0.0) ++result.satisfied;
    result.worst_slack = std::min(result.worst_slack, slack);
  }
  return result;
}

ExpectationBoundCheck check_gn_expectation(const MatrixXd& B, const MatrixXd& M, const MatrixXd& N,
                                           Index k, Index right_sketch, Index left_sketch,
                                           int trials, std::uint64_t seed) {
  if (M.rows() != B.rows() || N.cols() != B.cols()) {
    throw DimensionError("check_gn_expectation: M must have rows(B) rows and N cols(B) columns");
  }
  const VectorXd sigma = Eigen::JacobiSVD<MatrixXd>(B).singularValues();
  const double opt2 = sigma.size() > k ? sigma.tail(sigma.size() - k).squaredNorm() : 0.0;

  ExpectationBoundCheck result;
  result.bound = gn_error_bound(k, right_sketch, left_sketch, M.squaredNorm(), N.squaredNorm(), opt2);
  RunningMoments moments;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(trial)});
    const MatrixXd omega = rng.gaussian(B.cols(), right_sketch);
    const MatrixXd omega_noise = rng.gaussian(M.cols(), right_sketch);
    const MatrixXd psi = rng.gaussian(B.rows(), left_sketch);
    const MatrixXd psi_noise = rng.gaussian(N.rows(), left_sketch);
    const MatrixXd Y = B * omega + M * omega_noise;
    const MatrixXd Z = psi.transpose() * B + psi_noise.transpose() * N;
    const LowRankFactors approx = gn_from_sketches(Y, Z, psi, k);
    moments.push((B - approx.dense()).squaredNorm());
  }
  result.trials = moments.count;
  result.mean_squared_error = moments.mean;
  result.standard_error = moments.standard_error();
  result.passed = result.mean_squared_error <= result.bound + 3.0 * result.standard_error;
  return result;
}

PinvMomentCheck check_gaussian_pinv_moment(const MatrixXd& X, Index p, Index q, int trials,
                                           std::uint64_t seed) {
  if (q <= p + 1) throw ConfigError("pinv moment check needs q > p + 1");
  RunningMoments moments;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(trial)});
    const MatrixXd G = rng.gaussian(X.cols(), q);
    const MatrixXd H = rng.gaussian(p, q);
    moments.push((X * G * pinv(H)).squaredNorm());
  }
  PinvMomentCheck result;
  result.trials = moments.count;
  result.sample_mean = moments.mean;
  result.standard_error = moments.standard_error();
  result.expected = static_cast<double>(p) / static_cast<double>(q - p - 1) * X.squaredNorm();
  result.relative_deviation = std::abs(result.sample_mean - result.expected) / result.expected;
  return result;
}

}  // namespace perfpeel
