#include "h3d/parallel.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <stdexcept>
#include <thread>

namespace h3d {

namespace {

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return double(ts.tv_sec) + 1e-9 * double(ts.tv_nsec);
}

double wall_seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Balanced contiguous slice q of g over [0, n).
std::pair<std::int64_t, std::int64_t> slice(std::int64_t n, int g, int q) {
  const std::int64_t lo = n * q / g;
  const std::int64_t hi = n * (q + 1) / g;
  return {lo, hi};
}

}  // namespace

PartitionPlan plan_partition(int depth, int n_p) {
  if (n_p < 1) throw std::invalid_argument("plan_partition: n_p must be >= 1");
  if (depth < 0) throw std::invalid_argument("plan_partition: negative depth");
  PartitionPlan plan;
  plan.n_p = n_p;
  plan.depth = depth;
  plan.levels.resize(depth + 1);
  for (int l = 0; l <= depth; ++l) {
    const std::int64_t m = std::int64_t(1) << (3 * l);
    plan.levels[l].node_count = m;
    plan.levels[l].shared = m < n_p;
  }
  return plan;
}

int PartitionPlan::owner_of(int level, std::int64_t node) const {
  (void)level;  // round-robin is level-independent
  return static_cast<int>(node % n_p);
}

std::pair<int, int> PartitionPlan::worker_range(int level, std::int64_t node) const {
  const auto& lp = levels[level];
  if (!lp.shared) {
    const int w = owner_of(level, node);
    return {w, w + 1};
  }
  const std::int64_t m = lp.node_count;
  // Workers {w : floor(w*m/n_p) == node}; group sizes differ by at most one.
  const auto first = static_cast<int>((node * n_p + m - 1) / m);
  const auto last = static_cast<int>(((node + 1) * n_p + m - 1) / m);
  return {first, last};
}

std::int64_t PartitionPlan::load_of(int level, int worker) const {
  const auto& lp = levels[level];
  if (!lp.shared) {
    const std::int64_t m = lp.node_count;
    return m / n_p + (worker < m % n_p ? 1 : 0);
  }
  return 1;  // shared: the worker participates in exactly one node's group
}

namespace {

struct DenseJob {
  std::size_t block = 0;
  std::int64_t src_lo = 0, src_hi = 0;  // column slice of the source range
};

struct LrOwnedJob {
  int level = 0;
  std::size_t block = 0;
};

struct LrSharedA {
  int level = 0;
  std::size_t block = 0;
  int piv_lo = 0, piv_hi = 0;  // slice of the pivot rows of K(sigma,Y)
  std::size_t staging = 0;
};

struct LrSharedB {
  int level = 0;
  std::size_t block = 0;
  std::int64_t row_lo = 0, row_hi = 0;  // slice of the target rows
  std::size_t staging = 0;
};

struct WorkerPlan {
  std::vector<DenseJob> dense;
  std::vector<LrOwnedJob> lr_owned;
  std::vector<LrSharedA> lr_a;
  std::vector<LrSharedB> lr_b;
};

}  // namespace

ParallelMatvecResult parallel_matvec(const HMatrixRep& rep,
                                     std::span<const double> x, int n_p) {
  const std::size_t n = rep.n();
  if (x.size() != n) throw std::invalid_argument("parallel_matvec: bad length");
  if (n_p < 1) throw std::invalid_argument("parallel_matvec: n_p must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();
  const Octree& tree = rep.tree;
  const int depth = tree.depth;
  const PartitionPlan plan = plan_partition(depth, n_p);

  ParallelMatvecResult res;
  std::vector<WorkerPlan> wp(n_p);
  std::vector<std::vector<double>> staging;
  std::vector<std::uint64_t> level_floats(depth + 1, 0), level_gathers(depth + 1, 0);

  // Dense leaf blocks, in the serial visit order.
  for (std::size_t kk = 0; kk < rep.dense_blocks.size(); ++kk) {
    const auto& d = rep.dense_blocks[kk];
    const auto [wf, wl] = plan.worker_range(depth, d.target);
    const std::int64_t ny = tree.levels[depth][d.source].size();
    const int g = wl - wf;
    if (g == 1) {
      wp[wf].dense.push_back({kk, 0, ny});
    } else {
      for (int q = 0; q < g; ++q) {
        const auto [lo, hi] = slice(ny, g, q);
        if (lo < hi) wp[wf + q].dense.push_back({kk, lo, hi});
      }
    }
  }

  // Low-rank blocks, levels ascending.
  for (int l = 1; l <= depth; ++l) {
    for (std::size_t kk = 0; kk < rep.lr_levels[l].size(); ++kk) {
      const auto& e = rep.lr_levels[l][kk];
      const int r = e.block.rank();
      if (r == 0) continue;
      const auto [wf, wl] = plan.worker_range(l, e.target);
      const int g = wl - wf;
      if (g == 1) {
        wp[wf].lr_owned.push_back({l, kk});
        continue;
      }
      const std::size_t st = staging.size();
      staging.emplace_back(r, 0.0);
      const std::int64_t nx = tree.levels[l][e.target].size();
      for (int q = 0; q < g; ++q) {
        const auto [plo, phi] = slice(r, g, q);
        if (plo < phi) {
          wp[wf + q].lr_a.push_back(
              {l, kk, static_cast<int>(plo), static_cast<int>(phi), st});
        }
        const auto [rlo, rhi] = slice(nx, g, q);
        if (rlo < rhi) wp[wf + q].lr_b.push_back({l, kk, rlo, rhi, st});
      }
      level_floats[l] += std::uint64_t(g) * std::uint64_t(r);
      level_gathers[l] += 1;
    }
  }

  std::vector<double> xp(n), bsum(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) xp[p] = x[rep.tree.perm[p]];

  std::vector<std::vector<double>> buffers(n_p);
  res.worker_busy_seconds.assign(n_p, 0.0);
  const bool cached = rep.options.dense_mode == DenseMode::Cached;

  auto phase_a = [&](int w) {
    const double c0 = thread_cpu_seconds();
    auto& b = buffers[w];
    b.assign(n, 0.0);
    RowMat mat;
    for (const auto& job : wp[w].dense) {
      const auto& d = rep.dense_blocks[job.block];
      const OctreeNode& xn = tree.levels[depth][d.target];
      const OctreeNode& yn = tree.levels[depth][d.source];
      auto bx = Eigen::Map<Eigen::VectorXd>(b.data() + xn.begin, xn.size());
      const auto xs = Eigen::Map<const Eigen::VectorXd>(
          xp.data() + yn.begin + job.src_lo, job.src_hi - job.src_lo);
      if (cached && job.src_lo == 0 && job.src_hi == yn.size()) {
        bx.noalias() += rep.dense_cache[job.block] * xs;
      } else {
        const KernelBlock block(rep.kernel, tree.points.data() + xn.begin,
                                xn.size(), tree.points.data() + yn.begin + job.src_lo,
                                job.src_hi - job.src_lo,
                                xn.begin - (yn.begin + job.src_lo));
        mat.resize(block.rows(), block.cols());
        for (std::int64_t i = 0; i < block.rows(); ++i)
          block.row(i, mat.data() + i * block.cols());
        bx.noalias() += mat * xs;
      }
    }
    for (const auto& job : wp[w].lr_owned) {
      const auto& e = rep.lr_levels[job.level][job.block];
      const OctreeNode& xn = tree.levels[job.level][e.target];
      const OctreeNode& yn = tree.levels[job.level][e.source];
      const KernelBlock block = rep.make_block(job.level, e.target, e.source);
      lr_apply(e.block, block, xp.data() + yn.begin, b.data() + xn.begin);
    }
    // Shared blocks: this worker's slice of z1 = K(sigma,Y) x.
    std::vector<double> rowbuf;
    for (const auto& job : wp[w].lr_a) {
      const auto& e = rep.lr_levels[job.level][job.block];
      const OctreeNode& yn = tree.levels[job.level][e.source];
      const KernelBlock block = rep.make_block(job.level, e.target, e.source);
      rowbuf.resize(yn.size());
      for (int k = job.piv_lo; k < job.piv_hi; ++k) {
        block.row(e.block.row_pivots[k], rowbuf.data());
        double acc = 0.0;
        const double* xs = xp.data() + yn.begin;
        for (std::int64_t j = 0; j < yn.size(); ++j) acc += rowbuf[j] * xs[j];
        staging[job.staging][k] = acc;
      }
    }
    res.worker_busy_seconds[w] += thread_cpu_seconds() - c0;
  };

  auto phase_b = [&](int w) {
    const double c0 = thread_cpu_seconds();
    auto& b = buffers[w];
    std::vector<double> t, colbuf;
    for (const auto& job : wp[w].lr_b) {
      const auto& e = rep.lr_levels[job.level][job.block];
      const auto& lr = e.block;
      const int r = lr.rank();
      const OctreeNode& xn = tree.levels[job.level][e.target];
      // Triangular solves are replicated on the gathered r-vector.
      t.assign(staging[job.staging].begin(), staging[job.staging].end());
      for (int k = 0; k < r; ++k) {
        double acc = t[k];
        for (int a = 0; a < k; ++a) acc -= lr.lu(k, a) * t[a];
        t[k] = acc;
      }
      for (int k = r - 1; k >= 0; --k) {
        double acc = t[k];
        for (int a = k + 1; a < r; ++a) acc -= lr.lu(k, a) * t[a];
        t[k] = acc / lr.lu(k, k);
      }
      // K(X,tau) rows restricted to this worker's slice of the target.
      const std::int64_t rows = job.row_hi - job.row_lo;
      const KernelBlock sliced(rep.kernel,
                               tree.points.data() + xn.begin + job.row_lo, rows,
                               tree.points.data() +
                                   tree.levels[job.level][e.source].begin,
                               tree.levels[job.level][e.source].size(),
                               xn.begin + job.row_lo -
                                   tree.levels[job.level][e.source].begin);
      colbuf.resize(rows);
      double* bx = b.data() + xn.begin + job.row_lo;
      for (int k = 0; k < r; ++k) {
        sliced.col(lr.col_pivots[k], colbuf.data());
        const double tk = t[k];
        for (std::int64_t i = 0; i < rows; ++i) bx[i] += tk * colbuf[i];
      }
    }
    res.worker_busy_seconds[w] += thread_cpu_seconds() - c0;
  };

  auto run_phase = [&](auto&& fn) {
    if (n_p == 1) {
      fn(0);
      return;
    }
    std::vector<std::thread> threads;
    threads.reserve(n_p);
    for (int w = 0; w < n_p; ++w) threads.emplace_back(fn, w);
    for (auto& th : threads) th.join();
  };

  run_phase(phase_a);
  run_phase(phase_b);

  // Final gather, fixed worker order.
  for (int w = 0; w < n_p; ++w) {
    const auto& b = buffers[w];
    for (std::size_t p = 0; p < n; ++p) bsum[p] += b[p];
  }
  res.b.resize(n);
  for (std::size_t p = 0; p < n; ++p) res.b[rep.tree.perm[p]] = bsum[p];

  for (int l = 1; l <= depth; ++l) {
    if (level_gathers[l] == 0) continue;
    res.ledger.steps.push_back({"lowrank-share", l, level_floats[l], level_gathers[l]});
    res.ledger.lowrank_exchange_floats += level_floats[l];
    res.ledger.gather_ops += level_gathers[l];
  }
  if (n_p > 1) {
    const std::uint64_t gf = std::uint64_t(n_p - 1) * std::uint64_t(n);
    res.ledger.steps.push_back({"final-gather", -1, gf, 1});
    res.ledger.final_gather_floats = gf;
    res.ledger.gather_ops += 1;
  }
  res.wall_seconds = wall_seconds_since(t0);
  return res;
}

HMatrixRep parallel_initialize(const PointSet& pts, const KernelSpec& kernel,
                               Variant variant, const HmatOptions& options,
                               int n_p, ParallelInitReport* report) {
  if (n_p < 1) throw std::invalid_argument("parallel_initialize: n_p >= 1");
  // Serial construction gives the skeleton (tree, lists, dense census);
  // the compression below overwrites every low-rank block.
  HMatrixRep rep;
  {
    HmatOptions skeleton = options;
    skeleton.max_rank = 1;  // throwaway compression, redone below
    rep = initialize(pts, kernel, variant, skeleton);
  }
  const Octree& tree = rep.tree;
  const int depth = tree.depth;
  const PartitionPlan plan = plan_partition(depth, n_p);

  std::vector<std::vector<std::atomic<std::uint32_t>>> calls(depth + 1);
  for (int l = 0; l <= depth; ++l) {
    calls[l] = std::vector<std::atomic<std::uint32_t>>(tree.nodes_at(l));
  }

  struct Job {
    int level;
    std::size_t block;
    bool store;
  };
  std::vector<std::vector<Job>> jobs(n_p);
  for (int l = 1; l <= depth; ++l) {
    for (std::size_t kk = 0; kk < rep.lr_levels[l].size(); ++kk) {
      const auto& e = rep.lr_levels[l][kk];
      const auto [wf, wl] = plan.worker_range(l, e.target);
      for (int w = wf; w < wl; ++w) {
        jobs[w].push_back({l, kk, w == wf});
      }
    }
  }

  AcaOptions aca;
  aca.epsilon = options.epsilon;
  aca.max_rank = options.max_rank;
  auto worker = [&](int w) {
    for (const auto& job : jobs[w]) {
      auto& e = rep.lr_levels[job.level][job.block];
      const KernelBlock block = rep.make_block(job.level, e.target, e.source);
      LowRankBlock lr = aca_compress(block, aca);
      calls[job.level][e.target].fetch_add(1, std::memory_order_relaxed);
      if (job.store) e.block = std::move(lr);
    }
  };
  if (n_p == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_p; ++w) threads.emplace_back(worker, w);
    for (auto& th : threads) th.join();
  }

  rep.max_rank = 0;
  for (const auto& level : rep.lr_levels)
    for (const auto& e : level) rep.max_rank = std::max(rep.max_rank, e.block.rank());

  if (report) {
    report->plan = plan;
    report->aca_calls.resize(depth + 1);
    for (int l = 0; l <= depth; ++l) {
      report->aca_calls[l].resize(calls[l].size());
      for (std::size_t i = 0; i < calls[l].size(); ++i) {
        report->aca_calls[l][i] = calls[l][i].load();
      }
    }
  }
  return rep;
}

}  // namespace h3d
