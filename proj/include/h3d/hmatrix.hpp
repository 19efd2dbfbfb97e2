#pragma once

#include <span>

#include "h3d/lowrank.hpp"
#include "h3d/octree.hpp"

namespace h3d {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense leaf blocks are regenerated inside every matvec by default; Cached
/// forms them once during initialization and keeps them.
enum class DenseMode { OnTheFly, Cached };

struct HmatOptions {
  int n_max = 216;
  double epsilon = 1e-7;
  DenseMode dense_mode = DenseMode::OnTheFly;
  int depth_cap = 12;
  std::int64_t max_rank = 0;  // 0: min(|X|,|Y|) per block
};

struct LrBlockEntry {
  std::int32_t target = 0, source = 0;  // Morton ids at the block's level
  LowRankBlock block;
};

struct DenseBlockEntry {
  std::int32_t target = 0, source = 0;  // leaf Morton ids
  AdmissibilityClass cls = AdmissibilityClass::SelfBlock;
};

/// Variant-tagged hierarchical representation: the octree, the per-level
/// compressed blocks and the leaf dense-block descriptors. Immutable after
/// initialize(); safe to share across threads.
class HMatrixRep {
 public:
  Variant variant = Variant::Hodlr3d;
  KernelSpec kernel;
  Octree tree;
  InteractionLists lists;
  HmatOptions options;
  std::vector<std::vector<LrBlockEntry>> lr_levels;  // [level], empty at 0
  std::vector<DenseBlockEntry> dense_blocks;  // target-major, self/edge/face/vertex
  std::vector<RowMat> dense_cache;            // parallel to dense_blocks iff Cached

  double init_seconds = 0.0;
  double aca_seconds = 0.0;
  double dense_form_seconds = 0.0;
  int max_rank = 0;

  std::size_t n() const { return tree.num_points(); }
  KernelBlock make_block(int level, std::int32_t target, std::int32_t source) const;
};

HMatrixRep initialize(const PointSet& pts, const KernelSpec& kernel,
                      Variant variant, const HmatOptions& options = {});

struct MatvecTiming {
  double wall_seconds = 0.0;
  double dense_gen_seconds = 0.0;
  /// Multiplication time with the dense-entry generation removed, the
  /// convention used by all benchmark output.
  double matvec_seconds = 0.0;
};

/// b = A~ x where A~ is the hierarchical approximant. Deterministic for a
/// fixed representation regardless of thread count.
std::vector<double> matvec(const HMatrixRep& rep, std::span<const double> x,
                           MatvecTiming* timing = nullptr);

struct RepStats {
  std::uint64_t float_count = 0;  // r^2 per block + dense leaf areas
  std::uint64_t int_count = 0;    // pivot indices
  std::uint64_t memory_bytes = 0;
  double compression_ratio = 0.0;
  int max_rank = 0;
  int depth = 0;
  double init_seconds = 0.0;
  double dense_form_seconds = 0.0;
  double matvec_seconds = 0.0;  // filled by the harness
};

RepStats stats(const HMatrixRep& rep);

/// Relative 2-norm error of b_approx against exact row sums of the kernel
/// matrix: every row when N <= exact_limit, otherwise sample_rows sampled
/// rows (exact sums on those rows). Inputs are in original point order.
double reference_error(const HMatrixRep& rep, std::span<const double> x,
                       std::span<const double> b_approx,
                       std::size_t exact_limit = 4096,
                       std::size_t sample_rows = 2000, std::uint64_t seed = 7);

}  // namespace h3d
