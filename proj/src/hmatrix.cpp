#include "h3d/hmatrix.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace h3d {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Consecutive [begin,end) runs of equal .target, for single-writer tasks.
template <class Blocks>
std::vector<std::pair<std::size_t, std::size_t>> target_runs(const Blocks& blocks) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t k = 0;
  while (k < blocks.size()) {
    std::size_t e = k;
    while (e < blocks.size() && blocks[e].target == blocks[k].target) ++e;
    runs.push_back({k, e});
    k = e;
  }
  return runs;
}

void form_dense(const KernelBlock& block, RowMat& mat) {
  mat.resize(block.rows(), block.cols());
  for (std::int64_t i = 0; i < block.rows(); ++i) {
    block.row(i, mat.data() + i * block.cols());
  }
}

}  // namespace

KernelBlock HMatrixRep::make_block(int level, std::int32_t target,
                                   std::int32_t source) const {
  const OctreeNode& x = tree.levels[level][target];
  const OctreeNode& y = tree.levels[level][source];
  return KernelBlock(kernel, tree.points.data() + x.begin, x.size(),
                     tree.points.data() + y.begin, y.size(),
                     x.begin - y.begin);
}

HMatrixRep initialize(const PointSet& pts, const KernelSpec& kernel,
                      Variant variant, const HmatOptions& options) {
  if (pts.size() == 0) throw std::invalid_argument("initialize: empty point set");
  if (!(options.epsilon > 0)) throw std::invalid_argument("initialize: eps <= 0");

  const auto t_start = Clock::now();
  HMatrixRep rep;
  rep.variant = variant;
  rep.kernel = kernel;
  rep.options = options;
  Cube domain;
  domain.center = {0.0, 0.0, 0.0};
  domain.half_width = 1.0;
  rep.tree = build_tree(pts, options.n_max, domain, options.depth_cap);
  rep.lists = build_interaction_lists(rep.tree, variant);
  const Octree& tree = rep.tree;
  const int depth = tree.depth;

  // Compress every interaction-list block, levels ascending. Blocks are
  // independent; the parallel schedule cannot change any pivot.
  const auto t_aca = Clock::now();
  rep.lr_levels.resize(depth + 1);
  for (int l = 1; l <= depth; ++l) {
    struct Job {
      std::int32_t target, source;
    };
    std::vector<Job> jobs;
    for (std::int64_t m = 0; m < tree.nodes_at(l); ++m) {
      if (tree.levels[l][m].empty()) continue;
      for (std::int32_t j : rep.lists.levels[l][m].inter) {
        if (tree.levels[l][j].empty()) continue;
        jobs.push_back({static_cast<std::int32_t>(m), j});
      }
    }
    auto& out = rep.lr_levels[l];
    out.resize(jobs.size());
    AcaOptions aca;
    aca.epsilon = options.epsilon;
    aca.max_rank = options.max_rank;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t k = 0; k < std::int64_t(jobs.size()); ++k) {
      const KernelBlock block = rep.make_block(l, jobs[k].target, jobs[k].source);
      out[k].target = jobs[k].target;
      out[k].source = jobs[k].source;
      out[k].block = aca_compress(block, aca);
    }
  }
  rep.aca_seconds = seconds_since(t_aca);
  for (const auto& level : rep.lr_levels)
    for (const auto& e : level) rep.max_rank = std::max(rep.max_rank, e.block.rank());

  // Leaf dense blocks in matvec visit order: self, edge, face (vertex only
  // for the strong-admissibility structure).
  for (std::int64_t m = 0; m < tree.nodes_at(depth); ++m) {
    if (tree.levels[depth][m].empty()) continue;
    const NodeLists& nl = rep.lists.levels[depth][m];
    rep.dense_blocks.push_back(
        {static_cast<std::int32_t>(m), static_cast<std::int32_t>(m),
         AdmissibilityClass::SelfBlock});
    auto add = [&](const std::vector<std::int32_t>& v, AdmissibilityClass cls) {
      for (std::int32_t j : v) {
        if (tree.levels[depth][j].empty()) continue;
        rep.dense_blocks.push_back({static_cast<std::int32_t>(m), j, cls});
      }
    };
    add(nl.near_edge, AdmissibilityClass::Edge);
    add(nl.near_face, AdmissibilityClass::Face);
    add(nl.near_vertex, AdmissibilityClass::Vertex);
  }

  // Form the dense matrices once; the time is charged to initialization
  // whether or not they are kept.
  const auto t_dense = Clock::now();
  if (options.dense_mode == DenseMode::Cached) {
    rep.dense_cache.resize(rep.dense_blocks.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t k = 0; k < std::int64_t(rep.dense_blocks.size()); ++k) {
      const auto& d = rep.dense_blocks[k];
      const KernelBlock block = rep.make_block(depth, d.target, d.source);
      form_dense(block, rep.dense_cache[k]);
    }
  } else {
    double sink = 0.0;
#pragma omp parallel reduction(+ : sink)
    {
      RowMat mat;
#pragma omp for schedule(dynamic, 16)
      for (std::int64_t k = 0; k < std::int64_t(rep.dense_blocks.size()); ++k) {
        const auto& d = rep.dense_blocks[k];
        const KernelBlock block = rep.make_block(depth, d.target, d.source);
        form_dense(block, mat);
        sink += mat(0, 0);
      }
    }
    if (!std::isfinite(sink)) throw std::runtime_error("dense pass overflow");
  }
  rep.dense_form_seconds = seconds_since(t_dense);
  rep.init_seconds = seconds_since(t_start);
  return rep;
}

std::vector<double> matvec(const HMatrixRep& rep, std::span<const double> x,
                           MatvecTiming* timing) {
  const std::size_t n = rep.n();
  if (x.size() != n) {
    throw std::invalid_argument("matvec: vector length != N");
  }
  const auto t0 = Clock::now();
  const Octree& tree = rep.tree;
  const int depth = tree.depth;

  std::vector<double> xp(n), bp(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) xp[p] = x[rep.tree.perm[p]];

  std::vector<double> gen_seconds(omp_get_max_threads(), 0.0);
  const bool cached = rep.options.dense_mode == DenseMode::Cached;

  // Dense leaf pass. Blocks are grouped per target so each slice of b has a
  // single writer; the per-entry accumulation order is fixed by construction.
  {
    const auto runs = target_runs(rep.dense_blocks);
#pragma omp parallel
    {
      RowMat mat;
      const int tid = omp_get_thread_num();
#pragma omp for schedule(dynamic, 4)
      for (std::int64_t t = 0; t < std::int64_t(runs.size()); ++t) {
        for (std::size_t kk = runs[t].first; kk < runs[t].second; ++kk) {
          const auto& d = rep.dense_blocks[kk];
          const OctreeNode& xn = tree.levels[depth][d.target];
          const OctreeNode& yn = tree.levels[depth][d.source];
          auto bx = Eigen::Map<Eigen::VectorXd>(bp.data() + xn.begin, xn.size());
          const auto xy =
              Eigen::Map<const Eigen::VectorXd>(xp.data() + yn.begin, yn.size());
          if (cached) {
            bx.noalias() += rep.dense_cache[kk] * xy;
          } else {
            const auto tg = Clock::now();
            const KernelBlock block = rep.make_block(depth, d.target, d.source);
            form_dense(block, mat);
            gen_seconds[tid] += seconds_since(tg);
            bx.noalias() += mat * xy;
          }
        }
      }
    }
  }

  // Low-rank passes, levels ascending; within a level targets are disjoint.
  for (int l = 1; l <= depth; ++l) {
    const auto& blocks = rep.lr_levels[l];
    const auto runs = target_runs(blocks);
#pragma omp parallel for schedule(dynamic, 2)
    for (std::int64_t t = 0; t < std::int64_t(runs.size()); ++t) {
      for (std::size_t kk = runs[t].first; kk < runs[t].second; ++kk) {
        const auto& e = blocks[kk];
        const OctreeNode& xn = tree.levels[l][e.target];
        const OctreeNode& yn = tree.levels[l][e.source];
        const KernelBlock block = rep.make_block(l, e.target, e.source);
        lr_apply(e.block, block, xp.data() + yn.begin, bp.data() + xn.begin);
      }
    }
  }

  std::vector<double> b(n);
  for (std::size_t p = 0; p < n; ++p) b[rep.tree.perm[p]] = bp[p];

  if (timing) {
    timing->wall_seconds = seconds_since(t0);
    timing->dense_gen_seconds = 0.0;
    for (double g : gen_seconds) timing->dense_gen_seconds += g;
    timing->matvec_seconds = timing->wall_seconds - timing->dense_gen_seconds;
  }
  return b;
}

RepStats stats(const HMatrixRep& rep) {
  RepStats s;
  const auto n = static_cast<std::uint64_t>(rep.n());
  for (const auto& level : rep.lr_levels) {
    for (const auto& e : level) {
      s.float_count += e.block.float_count();
      s.int_count += 2ull * static_cast<std::uint64_t>(e.block.rank());
      s.max_rank = std::max(s.max_rank, e.block.rank());
    }
  }
  const int depth = rep.tree.depth;
  for (const auto& d : rep.dense_blocks) {
    const auto& xn = rep.tree.levels[depth][d.target];
    const auto& yn = rep.tree.levels[depth][d.source];
    s.float_count += static_cast<std::uint64_t>(xn.size()) *
                     static_cast<std::uint64_t>(yn.size());
  }
  s.memory_bytes = 8 * s.float_count + 4 * s.int_count;
  s.compression_ratio = double(s.float_count) / (double(n) * double(n));
  s.depth = depth;
  s.init_seconds = rep.init_seconds;
  s.dense_form_seconds = rep.dense_form_seconds;
  return s;
}

double reference_error(const HMatrixRep& rep, std::span<const double> x,
                       std::span<const double> b_approx, std::size_t exact_limit,
                       std::size_t sample_rows, std::uint64_t seed) {
  const std::size_t n = rep.n();
  if (x.size() != n || b_approx.size() != n) {
    throw std::invalid_argument("reference_error: length mismatch");
  }
  std::vector<double> xp(n);
  for (std::size_t p = 0; p < n; ++p) xp[p] = x[rep.tree.perm[p]];

  std::vector<std::size_t> rows;  // permuted row positions
  if (n <= exact_limit) {
    rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  } else {
    std::mt19937_64 gen(seed);
    rows.resize(sample_rows);
    for (auto& r : rows) r = static_cast<std::size_t>(uniform01(gen) * double(n));
  }

  double err2 = 0.0, ref2 = 0.0;
  const KernelBlock whole(rep.kernel, rep.tree.points.data(), std::int64_t(n),
                          rep.tree.points.data(), std::int64_t(n), 0);
#pragma omp parallel reduction(+ : err2, ref2)
  {
    std::vector<double> buf(n);
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t k = 0; k < std::int64_t(rows.size()); ++k) {
      const std::size_t p = rows[k];
      whole.row(std::int64_t(p), buf.data());
      double exact = 0.0;
      for (std::size_t j = 0; j < n; ++j) exact += buf[j] * xp[j];
      const double approx = b_approx[rep.tree.perm[p]];
      err2 += (approx - exact) * (approx - exact);
      ref2 += exact * exact;
    }
  }
  return std::sqrt(err2 / ref2);
}

}  // namespace h3d
