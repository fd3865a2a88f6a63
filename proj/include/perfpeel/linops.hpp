#pragma once

// Matrix-free square operators with query accounting, plus the concrete
// operators used by the experiments (dense, periodic Poisson solve,
// inverse-distance kernel, and two hard instances for RSVD peeling).

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace perfpeel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Which product an operator query computes: A X or A^T X.
enum class Side { forward, transpose };

/// Number of columns pushed through A and through A^T.
class QueryCounter {
 public:
  void add(Side side, std::int64_t columns) {
    (side == Side::forward ? forward_ : transpose_).fetch_add(columns, std::memory_order_relaxed);
  }
  std::int64_t forward() const { return forward_.load(std::memory_order_relaxed); }
  std::int64_t transpose() const { return transpose_.load(std::memory_order_relaxed); }
  void reset() {
    forward_.store(0);
    transpose_.store(0);
  }

 private:
  std::atomic<std::int64_t> forward_{0};
  std::atomic<std::int64_t> transpose_{0};
};

/// Black-box n x n operator. Copies share the same counter.
///
/// The kernel receives an n x b block and returns an n x b block. Kernels
/// must be deterministic and safe to call concurrently.
class LinearOperator {
 public:
  using Kernel = std::function<MatrixXd(const MatrixXd&, Side)>;

  LinearOperator(Index n, Kernel kernel, std::string name = "operator");

  Index size() const { return n_; }
  const std::string& name() const { return name_; }

  /// A X (forward) or A^T X (transpose); adds X.cols() to the matching count.
  MatrixXd apply(const MatrixXd& X, Side side) const;

  const QueryCounter& counter() const { return *counter_; }
  void reset_counter() const { counter_->reset(); }

 private:
  Index n_;
  Kernel kernel_;
  std::string name_;
  std::shared_ptr<QueryCounter> counter_;
};

/// Expands an operator column by column (n forward queries).
MatrixXd materialize(const LinearOperator& op);

LinearOperator make_dense_operator(MatrixXd M, std::string name = "dense");

LinearOperator make_zero_operator(Index n);

/// Periodic 2-D Poisson solution operator on a t x t grid (n = t^2):
///   f -> IDFT2(D o DFT2(f)),  D(i,j) = -1/(kappa_i^2 + kappa_j^2),
/// kappa_i = i for i <= t/2 - 1 and i - t otherwise, D(0,0) = 0.
/// Grid point (i, j) maps to vector entry i*t + j.
LinearOperator make_poisson_operator(Index t);

/// Fourier multiplier D(i, j) of the Poisson operator.
double poisson_multiplier(Index t, Index i, Index j);

using Point3 = std::array<double, 3>;

/// Points in R^3, pairwise distinct when used to build a kernel.
struct PointCloud {
  std::vector<Point3> points;
  Index size() const { return static_cast<Index>(points.size()); }
};

/// Dense matrix K(i,j) = 1/|x_i - x_j|, K(i,i) = 0.
MatrixXd kernel_matrix(const PointCloud& cloud);

/// Direct O(n^2) kernel products; rejects coincident points.
LinearOperator make_kernel_operator(const PointCloud& cloud);

/// Perturbed helix: x uniform on [-4, 4] (equispaced), y = sin(2 pi x) + 0.05 g,
/// z = cos(2 pi x) + 0.05 h with g, h standard normal.
PointCloud helix_points(Index n, std::uint64_t seed);

/// 8k x 8k instance built from 2k x 2k blocks
///     [0 X Y X; X 0 X 0; Y X 0 X; X 0 X 0],
/// X = diag(I_k, 0), Y = eta diag(0, I_k).
MatrixXd hard_block_matrix(Index k, double eta);
LinearOperator make_hard_block_instance(Index k, double eta);

/// n = 2^levels instance (1-based indices): A(i,1) = 1 for odd i,
/// A(2^m, 2) = eta for m = 1..levels, zero elsewhere.
MatrixXd exp_hard_matrix(int levels, double eta);
LinearOperator make_exp_hard_instance(int levels, double eta);

}  // namespace perfpeel
