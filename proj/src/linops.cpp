#include "perfpeel/linops.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>

#include <unsupported/Eigen/FFT>

#include "perfpeel/errors.hpp"
#include "perfpeel/rng.hpp"

namespace perfpeel {

LinearOperator::LinearOperator(Index n, Kernel kernel, std::string name)
    : n_(n), kernel_(std::move(kernel)), name_(std::move(name)),
      counter_(std::make_shared<QueryCounter>()) {
  if (n_ < 1) throw DimensionError("operator dimension must be positive");
}

MatrixXd LinearOperator::apply(const MatrixXd& X, Side side) const {
  if (X.rows() != n_ || X.cols() < 1) {
    throw DimensionError(name_ + ": apply expects an " + std::to_string(n_) +
                         " x b block with b >= 1, got " + std::to_string(X.rows()) + " x " +
                         std::to_string(X.cols()));
  }
  MatrixXd out = kernel_(X, side);
  counter_->add(side, X.cols());
  if (out.rows() != X.rows() || out.cols() != X.cols()) {
    throw DimensionError(name_ + ": kernel returned a block of the wrong shape");
  }
  return out;
}

MatrixXd materialize(const LinearOperator& op) {
  return op.apply(MatrixXd::Identity(op.size(), op.size()), Side::forward);
}

LinearOperator make_dense_operator(MatrixXd M, std::string name) {
  if (M.rows() != M.cols()) throw DimensionError("dense operator requires a square matrix");
  auto shared = std::make_shared<const MatrixXd>(std::move(M));
  const Index n = shared->rows();
  return LinearOperator(
      n,
      [shared](const MatrixXd& X, Side side) -> MatrixXd {
        if (side == Side::forward) return (*shared) * X;
        return shared->transpose() * X;
      },
      std::move(name));
}

LinearOperator make_zero_operator(Index n) {
  return LinearOperator(
      n, [](const MatrixXd& X, Side) -> MatrixXd { return MatrixXd::Zero(X.rows(), X.cols()); },
      "zero");
}

// ---------------------------------------------------------------- Poisson

double poisson_multiplier(Index t, Index i, Index j) {
  if (i == 0 && j == 0) return 0.0;
  auto harmonic = [t](Index m) -> double {
    return static_cast<double>(m <= t / 2 - 1 ? m : m - t);
  };
  const double ki = harmonic(i);
  const double kj = harmonic(j);
  return -1.0 / (ki * ki + kj * kj);
}

namespace {

using Complex = std::complex<double>;

// In-place 2-D transform of a row-major t x t array.
void fft2(Eigen::FFT<double>& fft, std::vector<Complex>& grid, Index t, bool inverse) {
  std::vector<Complex> in(static_cast<std::size_t>(t));
  std::vector<Complex> out(static_cast<std::size_t>(t));
  auto run = [&]() {
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
  };
  for (Index r = 0; r < t; ++r) {
    for (Index c = 0; c < t; ++c) in[c] = grid[r * t + c];
    run();
    for (Index c = 0; c < t; ++c) grid[r * t + c] = out[c];
  }
  for (Index c = 0; c < t; ++c) {
    for (Index r = 0; r < t; ++r) in[r] = grid[r * t + c];
    run();
    for (Index r = 0; r < t; ++r) grid[r * t + c] = out[r];
  }
}

}  // namespace

LinearOperator make_poisson_operator(Index t) {
  if (t < 2 || t % 2 != 0) throw ConfigError("Poisson grid side must be even and >= 2");
  auto multipliers = std::make_shared<std::vector<double>>(static_cast<std::size_t>(t * t));
  for (Index i = 0; i < t; ++i)
    for (Index j = 0; j < t; ++j) (*multipliers)[i * t + j] = poisson_multiplier(t, i, j);

  return LinearOperator(
      t * t,
      // D is real and even, so the operator is symmetric and both sides agree.
      [t, multipliers](const MatrixXd& X, Side) -> MatrixXd {
        Eigen::FFT<double> fft;
        MatrixXd out(X.rows(), X.cols());
        std::vector<Complex> grid(static_cast<std::size_t>(t * t));
        for (Index col = 0; col < X.cols(); ++col) {
          for (Index p = 0; p < t * t; ++p) grid[p] = Complex(X(p, col), 0.0);
          fft2(fft, grid, t, false);
          for (Index p = 0; p < t * t; ++p) grid[p] *= (*multipliers)[p];
          fft2(fft, grid, t, true);
          for (Index p = 0; p < t * t; ++p) out(p, col) = grid[p].real();
        }
        return out;
      },
      "poisson");
}

// ----------------------------------------------------------------- kernel

MatrixXd kernel_matrix(const PointCloud& cloud) {
  const Index n = cloud.size();
  MatrixXd K = MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const auto& a = cloud.points[i];
      const auto& b = cloud.points[j];
      const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (dist == 0.0) {
        throw ConfigError("kernel operator: points " + std::to_string(i) + " and " +
                          std::to_string(j) + " coincide");
      }
      K(i, j) = 1.0 / dist;
    }
  }
  return K;
}

LinearOperator make_kernel_operator(const PointCloud& cloud) {
  if (cloud.size() < 1) throw DimensionError("kernel operator needs at least one point");
  // The kernel matrix is symmetric, so the transpose product is the forward product.
  auto K = std::make_shared<const MatrixXd>(kernel_matrix(cloud));
  return LinearOperator(
      cloud.size(), [K](const MatrixXd& X, Side) -> MatrixXd { return (*K) * X; }, "kernel");
}

PointCloud helix_points(Index n, std::uint64_t seed) {
  PointCloud cloud;
  cloud.points.resize(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    const double x = n == 1 ? 0.0 : -4.0 + 8.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const double g = rng.normal();
    const double h = rng.normal();
    cloud.points[i] = {x, std::sin(2.0 * std::numbers::pi * x) + 0.05 * g,
                       std::cos(2.0 * std::numbers::pi * x) + 0.05 * h};
  }
  return cloud;
}

// ---------------------------------------------------------- hard instances

MatrixXd hard_block_matrix(Index k, double eta) {
  if (k < 1) throw ConfigError("hard block instance needs k >= 1");
  if (!(eta > 1.0)) throw ConfigError("hard block instance needs eta > 1");
  const Index b = 2 * k;
  MatrixXd X = MatrixXd::Zero(b, b);
  MatrixXd Y = MatrixXd::Zero(b, b);
  X.topLeftCorner(k, k).setIdentity();
  Y.bottomRightCorner(k, k) = eta * MatrixXd::Identity(k, k);

  // 0 = zero, 1 = X, 2 = Y
  constexpr int pattern[4][4] = {{0, 1, 2, 1}, {1, 0, 1, 0}, {2, 1, 0, 1}, {1, 0, 1, 0}};
  MatrixXd A = MatrixXd::Zero(4 * b, 4 * b);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (pattern[r][c] == 1) A.block(r * b, c * b, b, b) = X;
      if (pattern[r][c] == 2) A.block(r * b, c * b, b, b) = Y;
    }
  }
  return A;
}

LinearOperator make_hard_block_instance(Index k, double eta) {
  return make_dense_operator(hard_block_matrix(k, eta), "hard_block");
}

MatrixXd exp_hard_matrix(int levels, double eta) {
  if (levels < 2 || levels > 24) throw ConfigError("exp-hard instance needs 2 <= levels <= 24");
  const Index n = Index{1} << levels;
  MatrixXd A = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; i += 2) A(i, 0) = 1.0;  // 1-based odd rows
  for (int m = 1; m <= levels; ++m) A((Index{1} << m) - 1, 1) = eta;
  return A;
}

LinearOperator make_exp_hard_instance(int levels, double eta) {
  return make_dense_operator(exp_hard_matrix(levels, eta), "exp_hard");
}

}  // namespace perfpeel
