#include "h3d/octree.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <tuple>
#include <utility>

namespace h3d {

const char* class_name(AdmissibilityClass c) {
  switch (c) {
    case AdmissibilityClass::SelfBlock: return "self";
    case AdmissibilityClass::Face: return "face";
    case AdmissibilityClass::Edge: return "edge";
    case AdmissibilityClass::Vertex: return "vertex";
    case AdmissibilityClass::WellSeparated: return "well-separated";
  }
  return "?";
}

AdmissibilityClass classify_pair(const Cube& a, const Cube& b) {
  if (a.level != b.level) {
    throw std::invalid_argument("classify_pair: cubes are at different levels");
  }
  return classify_offset(b.ix - a.ix, b.iy - a.iy, b.iz - a.iz);
}

std::int64_t morton_encode(int ix, int iy, int iz, int level) {
  std::int64_t code = 0;
  for (int b = 0; b < level; ++b) {
    code |= (std::int64_t((ix >> b) & 1) << (3 * b));
    code |= (std::int64_t((iy >> b) & 1) << (3 * b + 1));
    code |= (std::int64_t((iz >> b) & 1) << (3 * b + 2));
  }
  return code;
}

void morton_decode(std::int64_t code, int level, int& ix, int& iy, int& iz) {
  ix = iy = iz = 0;
  for (int b = 0; b < level; ++b) {
    ix |= int((code >> (3 * b)) & 1) << b;
    iy |= int((code >> (3 * b + 1)) & 1) << b;
    iz |= int((code >> (3 * b + 2)) & 1) << b;
  }
}

Cube Octree::cube_of(int level, std::int64_t morton) const {
  int ix, iy, iz;
  morton_decode(morton, level, ix, iy, iz);
  Cube c;
  c.level = level;
  c.ix = ix;
  c.iy = iy;
  c.iz = iz;
  c.half_width = domain.half_width / double(std::int64_t(1) << level);
  const double w = 2.0 * c.half_width;
  c.center.x = domain.center.x - domain.half_width + (ix + 0.5) * w;
  c.center.y = domain.center.y - domain.half_width + (iy + 0.5) * w;
  c.center.z = domain.center.z - domain.half_width + (iz + 0.5) * w;
  return c;
}

namespace {

int grid_coord(double x, double lo, double inv_width, std::int64_t cells) {
  auto k = static_cast<std::int64_t>((x - lo) * inv_width * double(cells));
  if (k < 0) k = 0;
  if (k >= cells) k = cells - 1;
  return static_cast<int>(k);
}

}  // namespace

Octree build_tree(const PointSet& pts, int n_max, const Cube& domain,
                  int depth_cap) {
  if (n_max < 1) throw std::invalid_argument("build_tree: n_max must be >= 1");
  if (pts.size() == 0) throw std::invalid_argument("build_tree: empty point set");
  if (depth_cap < 0 || depth_cap > 20) {
    throw std::invalid_argument("build_tree: unreasonable depth cap");
  }

  const auto n = static_cast<std::int64_t>(pts.size());
  const double lo_x = domain.center.x - domain.half_width;
  const double lo_y = domain.center.y - domain.half_width;
  const double lo_z = domain.center.z - domain.half_width;
  const double inv_w = 1.0 / (2.0 * domain.half_width);
  const std::int64_t cells = std::int64_t(1) << depth_cap;

  for (const auto& p : pts.points) {
    if (p.x < lo_x || p.x > lo_x + 2 * domain.half_width || p.y < lo_y ||
        p.y > lo_y + 2 * domain.half_width || p.z < lo_z ||
        p.z > lo_z + 2 * domain.half_width) {
      throw std::invalid_argument("build_tree: point outside the domain cube");
    }
  }

  // Codes at the cap depth; prefixes give every coarser level.
  std::vector<std::pair<std::int64_t, std::int32_t>> coded(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& p = pts.points[i];
    const int ix = grid_coord(p.x, lo_x, inv_w, cells);
    const int iy = grid_coord(p.y, lo_y, inv_w, cells);
    const int iz = grid_coord(p.z, lo_z, inv_w, cells);
    coded[i] = {morton_encode(ix, iy, iz, depth_cap), static_cast<std::int32_t>(i)};
  }
  std::sort(coded.begin(), coded.end());

  auto max_occupancy_at = [&](int level) {
    const int shift = 3 * (depth_cap - level);
    std::int64_t best = 0, run = 0;
    std::int64_t prev = -1;
    for (const auto& [code, idx] : coded) {
      (void)idx;
      const std::int64_t c = code >> shift;
      run = (c == prev) ? run + 1 : 1;
      prev = c;
      if (run > best) best = run;
    }
    return best;
  };

  int depth = -1;
  for (int l = 0; l <= depth_cap; ++l) {
    if (max_occupancy_at(l) < n_max) {
      depth = l;
      break;
    }
  }
  if (depth < 0) {
    throw DegenerateDistributionError(
        "build_tree: depth cap " + std::to_string(depth_cap) +
        " exceeded; distribution too concentrated for n_max = " +
        std::to_string(n_max));
  }

  Octree tree;
  tree.domain = domain;
  tree.depth = depth;
  tree.perm.resize(n);
  tree.points.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    tree.perm[i] = coded[i].second;
    tree.points[i] = pts.points[coded[i].second];
  }

  tree.levels.resize(depth + 1);
  // Leaf ranges by a single scan, then parents by grouping eight children.
  {
    auto& leaves = tree.levels[depth];
    leaves.assign(std::size_t(1) << (3 * depth), OctreeNode{});
    const int shift = 3 * (depth_cap - depth);
    std::int64_t p = 0;
    for (std::int64_t m = 0; m < std::int64_t(leaves.size()); ++m) {
      leaves[m].begin = p;
      while (p < n && (coded[p].first >> shift) == m) ++p;
      leaves[m].end = p;
    }
  }
  for (int l = depth - 1; l >= 0; --l) {
    auto& nodes = tree.levels[l];
    const auto& kids = tree.levels[l + 1];
    nodes.assign(std::size_t(1) << (3 * l), OctreeNode{});
    for (std::int64_t m = 0; m < std::int64_t(nodes.size()); ++m) {
      nodes[m].begin = kids[8 * m].begin;
      nodes[m].end = kids[8 * m + 7].end;
    }
  }
  return tree;
}

Octree build_tree(const PointSet& pts, int n_max) {
  Cube domain;
  domain.level = 0;
  domain.center = {0.0, 0.0, 0.0};
  domain.half_width = 1.0;
  return build_tree(pts, n_max, domain);
}

Variant parse_variant(const std::string& name) {
  if (name == "hodlr3d") return Variant::Hodlr3d;
  if (name == "hodlr") return Variant::Hodlr;
  if (name == "hstrong") return Variant::HStrong;
  throw std::invalid_argument("unknown variant: " + name);
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Hodlr3d: return "hodlr3d";
    case Variant::Hodlr: return "hodlr";
    case Variant::HStrong: return "hstrong";
  }
  return "?";
}

InteractionLists build_interaction_lists(const Octree& tree, Variant variant) {
  InteractionLists lists;
  lists.variant = variant;
  lists.levels.resize(tree.depth + 1);
  lists.levels[0].resize(1);  // root has no same-level partners

  std::vector<std::int32_t> candidates;
  for (int l = 1; l <= tree.depth; ++l) {
    const std::int64_t count = tree.nodes_at(l);
    lists.levels[l].resize(count);
    for (std::int64_t m = 0; m < count; ++m) {
      NodeLists& out = lists.levels[l][m];
      candidates.clear();
      const std::int64_t base = (m >> 3) << 3;
      for (std::int64_t s = base; s < base + 8; ++s) {
        if (s != m) candidates.push_back(static_cast<std::int32_t>(s));
      }
      if (variant != Variant::Hodlr) {
        const NodeLists& parent = lists.levels[l - 1][m >> 3];
        auto add_children = [&](const std::vector<std::int32_t>& nodes) {
          for (std::int32_t q : nodes)
            for (int c = 0; c < 8; ++c)
              candidates.push_back(static_cast<std::int32_t>(8 * std::int64_t(q) + c));
        };
        add_children(parent.near_edge);
        add_children(parent.near_face);
        if (variant == Variant::HStrong) add_children(parent.near_vertex);
      }
      std::sort(candidates.begin(), candidates.end());

      if (variant == Variant::Hodlr) {
        out.inter = candidates;  // every off-diagonal sibling block compresses
        continue;
      }
      int mx, my, mz;
      morton_decode(m, l, mx, my, mz);
      for (std::int32_t c : candidates) {
        int cx, cy, cz;
        morton_decode(c, l, cx, cy, cz);
        const auto cls = classify_offset(cx - mx, cy - my, cz - mz);
        switch (cls) {
          case AdmissibilityClass::WellSeparated:
            out.inter.push_back(c);
            break;
          case AdmissibilityClass::Vertex:
            if (variant == Variant::Hodlr3d)
              out.inter.push_back(c);
            else
              out.near_vertex.push_back(c);
            break;
          case AdmissibilityClass::Edge:
            out.near_edge.push_back(c);
            break;
          case AdmissibilityClass::Face:
            out.near_face.push_back(c);
            break;
          case AdmissibilityClass::SelfBlock:
            throw std::logic_error("self node found in candidate list");
        }
      }
    }
  }
  return lists;
}

namespace {

std::int64_t ipow(std::int64_t b, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

std::int64_t exact_div(std::int64_t num, std::int64_t den) {
  if (num % den != 0) return -1;
  return num / den;
}

}  // namespace

std::int64_t formula_dense_total(Variant v, int L) {
  const std::int64_t p8 = ipow(8, L), p4 = ipow(4, L), p2 = ipow(2, L);
  switch (v) {
    case Variant::Hodlr: return p8;
    case Variant::Hodlr3d: return exact_div(67 * p8 - 120 * p4 + 56 * p2, 3);
    case Variant::HStrong:
      return exact_div(223 * p8 - 126 * 4 * p4 + 49 * 8 * p2 - 104, 7);
  }
  return -1;
}

std::int64_t formula_lowrank_ws(Variant v, int L) {
  const std::int64_t p8 = ipow(8, L), p4 = ipow(4, L), p2 = ipow(2, L);
  switch (v) {
    case Variant::Hodlr: return -1;
    case Variant::Hodlr3d:
      return exact_div(444 * 8 * p8 - 63 * 256 * p4 + 735 * 32 * p2 - 10944, 21);
    case Variant::HStrong:
      return exact_div(223 * 8 * p8 - 630 * 16 * p4 + 1519 * 16 * p2 - 6552 * L - 16008, 7);
  }
  return -1;
}

std::int64_t formula_lowrank_vertex(Variant v, int L) {
  const std::int64_t p8 = ipow(8, L), p4 = ipow(4, L), p2 = ipow(2, L);
  switch (v) {
    case Variant::Hodlr: return exact_div(8 * (p8 - 1), 7);
    case Variant::Hodlr3d:
      return exact_div(25 * 8 * p8 - 42 * 16 * p4 + 49 * 16 * p2 - 312, 21);
    case Variant::HStrong: return -1;
  }
  return -1;
}

std::int64_t formula_lowrank_edge(Variant v, int L) {
  if (v != Variant::Hodlr) return -1;
  return exact_div(16 * (ipow(8, L) - 1), 7);
}

std::int64_t formula_lowrank_face(Variant v, int L) {
  if (v != Variant::Hodlr) return -1;
  return exact_div(32 * (ipow(8, L) - 1), 7);
}

BlockCensus census(const Octree& tree, const InteractionLists& lists) {
  BlockCensus out;
  out.variant = lists.variant;
  out.depth = tree.depth;
  const auto n = static_cast<std::uint64_t>(tree.num_points());
  out.n_squared = n * n;

  std::map<std::tuple<int, AdmissibilityClass, bool>, std::uint64_t> counts;
  auto size_of = [&](int l, std::int32_t m) {
    return static_cast<std::uint64_t>(tree.levels[l][m].size());
  };

  for (int l = 1; l <= tree.depth; ++l) {
    for (std::int64_t m = 0; m < tree.nodes_at(l); ++m) {
      int mx, my, mz;
      morton_decode(m, l, mx, my, mz);
      for (std::int32_t j : lists.levels[l][m].inter) {
        int jx, jy, jz;
        morton_decode(j, l, jx, jy, jz);
        const auto cls = classify_offset(jx - mx, jy - my, jz - mz);
        counts[{l, cls, false}]++;
        out.lowrank_total++;
        switch (cls) {
          case AdmissibilityClass::WellSeparated: out.lowrank_ws++; break;
          case AdmissibilityClass::Vertex: out.lowrank_vertex++; break;
          case AdmissibilityClass::Edge: out.lowrank_edge++; break;
          case AdmissibilityClass::Face: out.lowrank_face++; break;
          case AdmissibilityClass::SelfBlock: break;
        }
        out.coverage_area += size_of(l, static_cast<std::int32_t>(m)) * size_of(l, j);
      }
    }
  }

  const int L = tree.depth;
  for (std::int64_t m = 0; m < tree.nodes_at(L); ++m) {
    const auto sm = size_of(L, static_cast<std::int32_t>(m));
    counts[{L, AdmissibilityClass::SelfBlock, true}]++;
    out.dense_total++;
    out.coverage_area += sm * sm;
    const NodeLists& nl = lists.levels[L][m];
    auto add_dense = [&](const std::vector<std::int32_t>& v, AdmissibilityClass cls) {
      counts[{L, cls, true}] += v.size();
      out.dense_total += v.size();
      for (std::int32_t j : v) out.coverage_area += sm * size_of(L, j);
    };
    add_dense(nl.near_edge, AdmissibilityClass::Edge);
    add_dense(nl.near_face, AdmissibilityClass::Face);
    add_dense(nl.near_vertex, AdmissibilityClass::Vertex);
  }

  for (const auto& [key, c] : counts) {
    out.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), c});
  }
  out.formula_dense = formula_dense_total(lists.variant, L);
  out.formula_ws = formula_lowrank_ws(lists.variant, L);
  out.formula_vertex = formula_lowrank_vertex(lists.variant, L);
  out.formula_edge = formula_lowrank_edge(lists.variant, L);
  out.formula_face = formula_lowrank_face(lists.variant, L);
  return out;
}

}  // namespace h3d
