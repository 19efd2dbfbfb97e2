#pragma once

#include <functional>
#include <span>

#include "h3d/hmatrix.hpp"

namespace h3d {

struct GmresOptions {
  double tol = 1e-10;  // relative residual |Ax - f| / |f|
  int restart = 0;     // 0: unrestarted (restart = max_iter)
  int max_iter = 500;
};

struct GmresResult {
  std::vector<double> x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // relative residual per iteration
};

using LinearOp = std::function<std::vector<double>(std::span<const double>)>;

/// Arnoldi with modified Gram-Schmidt and Givens rotations. Returns the best
/// iterate with converged = false when max_iter is exhausted.
GmresResult gmres(const LinearOp& apply, std::span<const double> rhs,
                  const GmresOptions& opt = {});

/// Self-integral of the 1/r kernel over a cube of side h centered on the
/// collocation point: h^2 times the unit-cell constant.
double cell_self_integral(double h);
double unit_cell_integral_constant();

/// Piecewise-constant collocation operator for the second-kind integral
/// equation on [-1,1]^3: A = d I + w K_offdiag with d = 1 + the cell
/// self-integral and w the cell volume. The off-diagonal kernel part is
/// held hierarchically.
struct IEOperator {
  int grid_n = 0;
  std::int64_t size = 0;      // grid_n^3
  double cell_volume = 0.0;   // (2/n)^3
  double diagonal = 0.0;      // 1 + cell self-integral
  PointSet collocation;
  HMatrixRep rep;

  std::vector<double> apply(std::span<const double> x) const;
  /// Dense assembly for cross-checks; guarded to small grids.
  Eigen::MatrixXd dense_matrix(int max_n = 24) const;
};

IEOperator discretize_ie(int n, const KernelSpec& kernel, double eps,
                         Variant variant, const HmatOptions& base = {});

struct IeReport {
  Variant variant = Variant::Hodlr3d;
  int grid_n = 0;
  std::int64_t size = 0;
  double epsilon = 0.0;
  int iterations = 0;
  bool converged = false;
  double solve_seconds = 0.0;
  double forward_error = 0.0;
  std::uint64_t seed = 0;
};

/// Manufactured-solution protocol: draw sigma, form f = A sigma exactly by
/// dense row sums, solve with GMRES over the hierarchical apply, report the
/// relative forward error.
IeReport ie_experiment(int n, const KernelSpec& kernel, double eps,
                       Variant variant, std::uint64_t seed,
                       const HmatOptions& base = {},
                       const GmresOptions& gmres_opt = {});

}  // namespace h3d
