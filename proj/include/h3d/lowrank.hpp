#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "h3d/kernel.hpp"

namespace h3d {

/// Entry generator for one m x n matrix block in local coordinates.
/// row/col fill whole residual-free kernel rows/columns; implementations
/// should vectorize these, the per-entry call is the fallback path.
class BlockOracle {
 public:
  virtual ~BlockOracle() = default;
  virtual std::int64_t rows() const = 0;
  virtual std::int64_t cols() const = 0;
  virtual double entry(std::int64_t i, std::int64_t j) const = 0;
  virtual void row(std::int64_t i, double* out) const {
    for (std::int64_t j = 0; j < cols(); ++j) out[j] = entry(i, j);
  }
  virtual void col(std::int64_t j, double* out) const {
    for (std::int64_t i = 0; i < rows(); ++i) out[i] = entry(i, j);
  }
};

/// Adapter for tests and ad-hoc blocks.
class LambdaBlock final : public BlockOracle {
 public:
  LambdaBlock(std::int64_t m, std::int64_t n,
              std::function<double(std::int64_t, std::int64_t)> f)
      : m_(m), n_(n), f_(std::move(f)) {}
  std::int64_t rows() const override { return m_; }
  std::int64_t cols() const override { return n_; }
  double entry(std::int64_t i, std::int64_t j) const override { return f_(i, j); }

 private:
  std::int64_t m_, n_;
  std::function<double(std::int64_t, std::int64_t)> f_;
};

/// Kernel block between two point ranges; rows/cols are filled with the
/// radial evaluation fused over the source range (coordinates are copied
/// into per-axis arrays so the fills vectorize).
class KernelBlock final : public BlockOracle {
 public:
  /// Row i and column i + diag_offset meet the matrix diagonal;
  /// kNoDiagonal when the two ranges are disjoint.
  static constexpr std::int64_t kNoDiagonal =
      std::numeric_limits<std::int64_t>::min();

  KernelBlock(const KernelSpec& kernel, const Point3* row_pts, std::int64_t m,
              const Point3* col_pts, std::int64_t n,
              std::int64_t diag_offset = kNoDiagonal);
  std::int64_t rows() const override { return m_; }
  std::int64_t cols() const override { return n_; }
  double entry(std::int64_t i, std::int64_t j) const override;
  void row(std::int64_t i, double* out) const override;
  void col(std::int64_t j, double* out) const override;

 private:
  const KernelSpec& kernel_;
  const Point3* row_pts_;
  const Point3* col_pts_;
  std::int64_t m_, n_;
  std::int64_t diag_offset_;
  std::vector<double> rx_, ry_, rz_;
  std::vector<double> cx_own_, cy_own_, cz_own_;
  const double* cx_ = nullptr;
  const double* cy_ = nullptr;
  const double* cz_ = nullptr;
};

/// Cross approximation of a block: row pivots into X, column pivots into Y,
/// and the LU factors of the pivot submatrix packed in one r x r matrix
/// (strict lower = unit-lower L, upper incl. diagonal = R). The large
/// factors K(X,tau) and K(sigma,Y) are regenerated on demand, never stored.
struct LowRankBlock {
  std::vector<std::int32_t> row_pivots;
  std::vector<std::int32_t> col_pivots;
  Eigen::MatrixXd lu;

  int rank() const { return static_cast<int>(row_pivots.size()); }
  Eigen::MatrixXd lower() const;  // materialized L (tests, debugging)
  Eigen::MatrixXd upper() const;  // materialized R
  std::uint64_t float_count() const {
    return static_cast<std::uint64_t>(rank()) * static_cast<std::uint64_t>(rank());
  }
};

struct AcaOptions {
  double epsilon = 1e-7;
  std::int64_t max_rank = 0;   // 0 means min(m, n)
  double pivot_floor = 1e-30;  // pivots below this stop the elimination
};

/// Partially pivoted ACA. Terminates when |u_k||v_k| <= eps * |approx|_F
/// (running estimate) or when the rank cap is hit.
LowRankBlock aca_compress(const BlockOracle& block, const AcaOptions& opt);

/// b += K(X,tau) R^-1 L^-1 K(sigma,Y) x, regenerating the pivot rows and
/// columns from the oracle. b has block.rows() entries, x block.cols().
void lr_apply(const LowRankBlock& lr, const BlockOracle& block, const double* x,
              double* b);

/// Dense reconstruction of the implied approximant (small blocks; tests and
/// diagnostics).
Eigen::MatrixXd lr_reconstruct(const LowRankBlock& lr, const BlockOracle& block);

/// max{k : sigma_k / sigma_1 > eps}; 0 for the all-zero matrix.
int numerical_rank(const Eigen::MatrixXd& m, double eps);

/// Rank study over the five-cube geometry: unit cube X with a face, edge
/// and vertex neighbour plus a cube one box away, n uniform points in each.
struct RankStudySample {
  char cls;  // 'W', 'F', 'E' or 'V'
  int n;
  int rank;
};

struct RankStudyResult {
  std::vector<RankStudySample> samples;
  std::map<char, double> slope;  // least-squares log-log slope per class
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

/// Ranks of the four off-diagonal interaction classes for one cube size.
std::map<char, int> rank_study_single(const KernelSpec& kernel, int n_per_cube,
                                      double eps, std::uint64_t seed);

RankStudyResult rank_study(const KernelSpec& kernel,
                           const std::vector<int>& n_sweep, double eps,
                           std::uint64_t seed);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<std::pair<double, double>>& xy);

}  // namespace h3d
