#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/kernel.hpp"

namespace h3d {

/// An axis-aligned cube of the uniform grid at some tree level.
struct Cube {
  int level = 0;
  int ix = 0, iy = 0, iz = 0;  // grid index, 0 <= i < 2^level
  Point3 center{0.0, 0.0, 0.0};
  double half_width = 1.0;
};

enum class AdmissibilityClass { SelfBlock, Face, Edge, Vertex, WellSeparated };

const char* class_name(AdmissibilityClass c);

/// Five-way classification of a same-level grid offset: the pair is
/// well-separated once some component is >= 2 boxes apart, otherwise the
/// number of nonzero components distinguishes face/edge/vertex contact.
inline AdmissibilityClass classify_offset(int dx, int dy, int dz) {
  const int ax = dx < 0 ? -dx : dx;
  const int ay = dy < 0 ? -dy : dy;
  const int az = dz < 0 ? -dz : dz;
  if ((ax | ay | az) == 0) return AdmissibilityClass::SelfBlock;
  if (ax >= 2 || ay >= 2 || az >= 2) return AdmissibilityClass::WellSeparated;
  const int nz = (ax != 0) + (ay != 0) + (az != 0);
  if (nz == 1) return AdmissibilityClass::Face;
  if (nz == 2) return AdmissibilityClass::Edge;
  return AdmissibilityClass::Vertex;
}

AdmissibilityClass classify_pair(const Cube& a, const Cube& b);

struct DegenerateDistributionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Index range of one grid cell in the permuted particle order.
struct OctreeNode {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
};

/// Balanced octree over the computational cube. Every level keeps all 8^l
/// nodes in Morton order (empty ones included); particle indices are
/// permuted so each node owns a contiguous range.
class Octree {
 public:
  Cube domain;
  int depth = 0;  // L
  std::vector<std::vector<OctreeNode>> levels;  // levels[l].size() == 8^l
  std::vector<std::int32_t> perm;   // permuted position -> original index
  std::vector<Point3> points;       // coordinates in permuted order

  std::size_t num_points() const { return points.size(); }
  std::int64_t nodes_at(int level) const { return std::int64_t(1) << (3 * level); }
  Cube cube_of(int level, std::int64_t morton) const;
  static std::int64_t parent_of(std::int64_t morton) { return morton >> 3; }
};

std::int64_t morton_encode(int ix, int iy, int iz, int level);
void morton_decode(std::int64_t code, int level, int& ix, int& iy, int& iz);

/// Uniform subdivision to the minimal depth at which every node holds
/// fewer than n_max particles. Depth beyond depth_cap is treated as a
/// degenerate distribution (e.g. many coincident points).
Octree build_tree(const PointSet& pts, int n_max, const Cube& domain,
                  int depth_cap = 12);
Octree build_tree(const PointSet& pts, int n_max = 216);

enum class Variant { Hodlr3d, Hodlr, HStrong };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);

/// Per-node lists at one level. `inter` holds the partners compressed at
/// this level; the near lists defer to the children and become dense
/// blocks at the leaf level.
struct NodeLists {
  std::vector<std::int32_t> inter;
  std::vector<std::int32_t> near_edge;
  std::vector<std::int32_t> near_face;
  std::vector<std::int32_t> near_vertex;  // populated for hstrong only
};

struct InteractionLists {
  Variant variant = Variant::Hodlr3d;
  std::vector<std::vector<NodeLists>> levels;
};

InteractionLists build_interaction_lists(const Octree& tree, Variant variant);

struct CensusRow {
  int level;
  AdmissibilityClass cls;
  bool dense;
  std::uint64_t count;
};

/// Block counts by (level, class, kind), totals, the paper-style closed-form
/// totals where defined (-1 otherwise), and the exact coverage area
/// sum |X||Y| over all blocks (equals N^2 iff the partition is complete).
struct BlockCensus {
  Variant variant = Variant::Hodlr3d;
  int depth = 0;
  std::vector<CensusRow> rows;
  std::uint64_t dense_total = 0;
  std::uint64_t lowrank_total = 0;
  std::uint64_t lowrank_ws = 0;
  std::uint64_t lowrank_vertex = 0;
  std::uint64_t lowrank_edge = 0;
  std::uint64_t lowrank_face = 0;
  std::int64_t formula_dense = -1;
  std::int64_t formula_ws = -1;
  std::int64_t formula_vertex = -1;
  std::int64_t formula_edge = -1;
  std::int64_t formula_face = -1;
  std::uint64_t coverage_area = 0;
  std::uint64_t n_squared = 0;
};

BlockCensus census(const Octree& tree, const InteractionLists& lists);

/// Closed-form census totals for an L-level tree; -1 where no formula exists.
std::int64_t formula_dense_total(Variant v, int L);
std::int64_t formula_lowrank_ws(Variant v, int L);
std::int64_t formula_lowrank_vertex(Variant v, int L);
std::int64_t formula_lowrank_edge(Variant v, int L);
std::int64_t formula_lowrank_face(Variant v, int L);

}  // namespace h3d
