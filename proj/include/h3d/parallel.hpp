#pragma once

#include <string>

#include "h3d/hmatrix.hpp"

namespace h3d {

/// Level-based work partition: with 8^l >= n_p every node has one owner
/// (round-robin in Morton order); below that each node is shared by a
/// contiguous worker group, sizes balanced to within one.
struct PartitionPlan {
  int n_p = 1;
  int depth = 0;

  struct LevelPlan {
    bool shared = false;
    std::int64_t node_count = 0;
  };
  std::vector<LevelPlan> levels;

  int owner_of(int level, std::int64_t node) const;
  /// Worker range [first, last) assigned to a node on a shared level; for
  /// owned levels the range is the single owner.
  std::pair<int, int> worker_range(int level, std::int64_t node) const;
  /// Number of nodes a worker touches at a level.
  std::int64_t load_of(int level, int worker) const;
};

PartitionPlan plan_partition(int depth, int n_p);

struct CommStep {
  std::string what;
  int level = -1;
  std::uint64_t floats = 0;
  std::uint64_t gathers = 0;
};

/// Modeled exchange volume: g*r floats and one gather per shared low-rank
/// block, plus the final gather that assembles b.
struct CommLedger {
  std::vector<CommStep> steps;
  std::uint64_t lowrank_exchange_floats = 0;
  std::uint64_t final_gather_floats = 0;
  std::uint64_t gather_ops = 0;

  std::uint64_t total_floats() const {
    return lowrank_exchange_floats + final_gather_floats;
  }
  std::uint64_t total_bytes() const { return 8 * total_floats(); }
};

struct ParallelMatvecResult {
  std::vector<double> b;
  CommLedger ledger;
  std::vector<double> worker_busy_seconds;  // per-worker thread CPU time
  double wall_seconds = 0.0;
};

/// Distributed-style matvec on an in-process worker pool. Owned nodes are
/// computed wholly by their worker; shared dense blocks split by source
/// columns, shared low-rank blocks split the pivot rows of K(sigma,Y) and
/// the target rows of K(X,tau) with the triangular solves replicated.
/// n_p = 1 reproduces the serial matvec bit for bit with an empty ledger.
ParallelMatvecResult parallel_matvec(const HMatrixRep& rep,
                                     std::span<const double> x, int n_p);

struct ParallelInitReport {
  PartitionPlan plan;
  /// ACA invocations per (level, node); shared nodes are compressed
  /// redundantly by every group member.
  std::vector<std::vector<std::uint32_t>> aca_calls;
};

/// Initialization with the same partition: every worker compresses the
/// blocks of its nodes; a shared node is compressed separately by each
/// member of its group. The resulting representation is identical to the
/// serial one.
HMatrixRep parallel_initialize(const PointSet& pts, const KernelSpec& kernel,
                               Variant variant, const HmatOptions& options,
                               int n_p, ParallelInitReport* report = nullptr);

}  // namespace h3d
