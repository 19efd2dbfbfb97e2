#include <doctest.h>

#include <cmath>

#include "h3d/parallel.hpp"
#include "oracles.hpp"

using namespace h3d;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = 2.0 * uniform01(gen) - 1.0;
  return x;
}

}  // namespace

TEST_CASE("partition plan ownership and sharing") {
  const PartitionPlan p8 = plan_partition(2, 8);
  CHECK_FALSE(p8.levels[2].shared);
  for (int w = 0; w < 8; ++w) CHECK(p8.load_of(2, w) == 8);  // 64 / 8

  const PartitionPlan p4 = plan_partition(2, 4);
  CHECK(p4.levels[0].shared);
  const auto [f, l] = p4.worker_range(0, 0);
  CHECK(f == 0);
  CHECK(l == 4);  // the root is shared by the whole group

  const PartitionPlan p1 = plan_partition(3, 1);
  for (int lvl = 0; lvl <= 3; ++lvl) {
    CHECK_FALSE(p1.levels[lvl].shared);
    for (std::int64_t m = 0; m < (std::int64_t(1) << (3 * lvl)); ++m) {
      CHECK(p1.owner_of(lvl, m) == 0);
    }
  }
}

TEST_CASE("partition balance within one node for many worker counts") {
  for (int np : {2, 3, 4, 5, 7, 8, 16, 64}) {
    const PartitionPlan plan = plan_partition(3, np);
    for (int lvl = 0; lvl <= 3; ++lvl) {
      const std::int64_t m = std::int64_t(1) << (3 * lvl);
      if (!plan.levels[lvl].shared) {
        std::int64_t lo = m, hi = 0;
        for (int w = 0; w < np; ++w) {
          lo = std::min(lo, plan.load_of(lvl, w));
          hi = std::max(hi, plan.load_of(lvl, w));
        }
        CHECK(hi - lo <= 1);
      } else {
        // Every node covered, group sizes within one, every worker used.
        std::vector<int> covered(m, 0);
        std::vector<int> used(np, 0);
        int gmin = np + 1, gmax = 0;
        for (std::int64_t node = 0; node < m; ++node) {
          const auto [f, l] = plan.worker_range(lvl, node);
          CHECK(l > f);
          gmin = std::min(gmin, l - f);
          gmax = std::max(gmax, l - f);
          covered[node] = 1;
          for (int w = f; w < l; ++w) used[w]++;
        }
        CHECK(gmax - gmin <= 1);
        for (int c : covered) CHECK(c == 1);
        for (int u : used) CHECK(u == 1);
      }
    }
  }
}

TEST_CASE("single worker reproduces the serial matvec bit for bit") {
  const PointSet pts = generate_points(Distribution::UniformRandom, 4000, 51);
  HmatOptions opt;
  opt.n_max = 100;
  const HMatrixRep rep =
      initialize(pts, make_kernel(KernelId::Laplace3d), Variant::Hodlr3d, opt);
  const auto x = random_vector(4000, 8);
  const auto serial = matvec(rep, x);
  const ParallelMatvecResult par = parallel_matvec(rep, x, 1);
  for (std::size_t i = 0; i < serial.size(); ++i) CHECK(par.b[i] == serial[i]);
  CHECK(par.ledger.lowrank_exchange_floats == 0);
  CHECK(par.ledger.final_gather_floats == 0);
  CHECK(par.ledger.gather_ops == 0);
}

TEST_CASE("worker pools reproduce the serial result to reassociation error") {
  const PointSet pts = generate_points(Distribution::UniformRandom, 20000, 53);
  HmatOptions opt;
  opt.epsilon = 1e-7;
  const HMatrixRep rep =
      initialize(pts, make_kernel(KernelId::Laplace3d), Variant::Hodlr3d, opt);
  const auto x = random_vector(20000, 9);
  const auto serial = matvec(rep, x);
  for (int np : {2, 4, 8}) {
    const ParallelMatvecResult par = parallel_matvec(rep, x, np);
    CHECK(oracles::rel_error2(par.b, serial) <= 1e-12);
    CHECK(par.worker_busy_seconds.size() == std::size_t(np));
  }
}

TEST_CASE("shared nodes exchange exactly g*r floats per block") {
  // Depth-1 tree with 16 workers: every level-1 node is shared by 2.
  const PointSet pts = generate_points(Distribution::UniformRandom, 1000, 57);
  HmatOptions opt;
  opt.epsilon = 1e-6;
  const HMatrixRep rep =
      initialize(pts, make_kernel(KernelId::Laplace3d), Variant::Hodlr3d, opt);
  REQUIRE(rep.tree.depth == 1);

  const auto x = random_vector(1000, 10);
  const auto serial = matvec(rep, x);
  const int np = 16;
  const ParallelMatvecResult par = parallel_matvec(rep, x, np);
  CHECK(oracles::rel_error2(par.b, serial) <= 1e-12);

  const PartitionPlan plan = plan_partition(rep.tree.depth, np);
  std::uint64_t expect = 0, blocks = 0;
  for (int l = 1; l <= rep.tree.depth; ++l) {
    for (const auto& e : rep.lr_levels[l]) {
      if (e.block.rank() == 0) continue;
      const auto [f, lst] = plan.worker_range(l, e.target);
      if (lst - f > 1) {
        expect += std::uint64_t(lst - f) * std::uint64_t(e.block.rank());
        ++blocks;
      }
    }
  }
  CHECK(blocks == 8);  // the eight vertex blocks at level 1
  CHECK(par.ledger.lowrank_exchange_floats == expect);
  CHECK(par.ledger.gather_ops == blocks + 1);  // plus the final gather
  CHECK(par.ledger.final_gather_floats == std::uint64_t(np - 1) * 1000);
}

TEST_CASE("redundant compression of shared nodes is counted") {
  const PointSet pts = generate_points(Distribution::UniformRandom, 1000, 57);
  HmatOptions opt;
  opt.epsilon = 1e-6;
  const KernelSpec lap = make_kernel(KernelId::Laplace3d);
  const HMatrixRep serial = initialize(pts, lap, Variant::Hodlr3d, opt);
  REQUIRE(serial.tree.depth == 1);

  // 16 workers, 8 level-1 nodes: groups of two compress redundantly.
  ParallelInitReport report;
  const HMatrixRep par = parallel_initialize(pts, lap, Variant::Hodlr3d, opt, 16,
                                             &report);
  for (std::int64_t m = 0; m < 8; ++m) {
    const std::size_t blocks = serial.lists.levels[1][m].inter.size();
    CHECK(report.aca_calls[1][m] == 2 * blocks);
  }

  // 4 workers own the level-1 nodes outright: one compression each.
  ParallelInitReport report4;
  const HMatrixRep par4 =
      parallel_initialize(pts, lap, Variant::Hodlr3d, opt, 4, &report4);
  for (std::int64_t m = 0; m < 8; ++m) {
    CHECK(report4.aca_calls[1][m] == serial.lists.levels[1][m].inter.size());
  }

  // Both reproduce the serial pivots exactly.
  for (const HMatrixRep* r : {&par, &par4}) {
    REQUIRE(r->lr_levels[1].size() == serial.lr_levels[1].size());
    for (std::size_t k = 0; k < serial.lr_levels[1].size(); ++k) {
      CHECK(r->lr_levels[1][k].block.row_pivots ==
            serial.lr_levels[1][k].block.row_pivots);
      CHECK(r->lr_levels[1][k].block.col_pivots ==
            serial.lr_levels[1][k].block.col_pivots);
      CHECK(r->lr_levels[1][k].block.lu == serial.lr_levels[1][k].block.lu);
    }
  }
}

TEST_CASE("non-power-of-two worker counts still partition correctly") {
  const PointSet pts = generate_points(Distribution::UniformRandom, 6000, 59);
  HmatOptions opt;
  opt.n_max = 100;
  const HMatrixRep rep =
      initialize(pts, make_kernel(KernelId::Laplace3d), Variant::HStrong, opt);
  const auto x = random_vector(6000, 11);
  const auto serial = matvec(rep, x);
  for (int np : {3, 5, 6}) {
    const ParallelMatvecResult par = parallel_matvec(rep, x, np);
    CHECK(oracles::rel_error2(par.b, serial) <= 1e-12);
  }
}
