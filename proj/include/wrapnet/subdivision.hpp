// subdivision.hpp - midpoint (1:4) subdivision hierarchies and face pooling.
//
// Indexing is a pure function of the base mesh's indexing, which is what
// makes pooling, unpooling and matching-lift agree across two hierarchies
// built from relabeled copies of the same connectivity:
// - edges at each level are the sorted unordered vertex pairs in
//   lexicographic order;
// - the midpoint vertex of edge e at level l gets index V_l + e;
// - face i splits into children 4i..4i+3 ordered (corner0, corner1,
//   corner2, center), each corner child leading with its parent corner.
#pragma once

#include <array>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "wrapnet/mesh.hpp"

namespace wrapnet {

struct LevelTopology {
  int vertex_count = 0;
  std::vector<Tri> triangles;
  std::vector<std::array<int, 2>> edges;        // sorted pairs, lexicographic
  std::vector<std::array<int, 4>> child_faces;  // empty at the finest level
};

struct SubdivisionMesh {
  Mesh base;
  int levels = 0;
  std::vector<LevelTopology> topology;      // levels + 1 entries
  std::vector<std::vector<Vec3>> positions;  // midpoint positions per level

  const LevelTopology& at(int level) const {
    if (level < 0 || level > levels) throw std::runtime_error("subdivision: level out of range");
    return topology[level];
  }
};

namespace detail {

inline std::map<std::array<int, 2>, int> edge_index_map(
    const std::vector<std::array<int, 2>>& edges) {
  std::map<std::array<int, 2>, int> map;
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) map.emplace(edges[e], e);
  return map;
}

}  // namespace detail

inline SubdivisionMesh loop_subdivide(const Mesh& mesh, int levels) {
  if (levels < 0) throw std::runtime_error("loop_subdivide: negative level count");
  {
    ValidationReport report = validate_manifold(mesh);
    if (!report.ok)
      throw std::runtime_error("loop_subdivide: input is not a closed manifold: " +
                               report.violations.front());
  }
  SubdivisionMesh out;
  out.base = mesh;
  out.levels = levels;
  out.topology.resize(levels + 1);
  out.positions.resize(levels + 1);
  out.topology[0].vertex_count = mesh.vertex_count();
  out.topology[0].triangles = mesh.triangles;
  out.topology[0].edges = collect_edges(mesh.triangles);
  out.positions[0] = mesh.positions;

  for (int level = 0; level < levels; ++level) {
    LevelTopology& cur = out.topology[level];
    LevelTopology& next = out.topology[level + 1];
    const auto edge_of = detail::edge_index_map(cur.edges);
    const int base_vertices = cur.vertex_count;

    next.vertex_count = base_vertices + static_cast<int>(cur.edges.size());
    next.triangles.reserve(cur.triangles.size() * 4);
    cur.child_faces.resize(cur.triangles.size());
    for (int f = 0; f < static_cast<int>(cur.triangles.size()); ++f) {
      const Tri& t = cur.triangles[f];
      auto midpoint = [&](int a, int b) {
        return base_vertices + edge_of.at({std::min(a, b), std::max(a, b)});
      };
      const int mab = midpoint(t[0], t[1]);
      const int mbc = midpoint(t[1], t[2]);
      const int mca = midpoint(t[2], t[0]);
      cur.child_faces[f] = {4 * f, 4 * f + 1, 4 * f + 2, 4 * f + 3};
      next.triangles.push_back({t[0], mab, mca});
      next.triangles.push_back({t[1], mbc, mab});
      next.triangles.push_back({t[2], mca, mbc});
      next.triangles.push_back({mab, mbc, mca});
    }
    next.edges = collect_edges(next.triangles);

    const std::vector<Vec3>& pos = out.positions[level];
    std::vector<Vec3>& next_pos = out.positions[level + 1];
    next_pos = pos;
    next_pos.resize(next.vertex_count);
    for (int e = 0; e < static_cast<int>(cur.edges.size()); ++e)
      next_pos[base_vertices + e] = (pos[cur.edges[e][0]] + pos[cur.edges[e][1]]) * 0.5;
  }
  return out;
}

inline Mesh mesh_at_level(const SubdivisionMesh& subdiv, int level) {
  Mesh mesh;
  mesh.positions = subdiv.positions[level];
  mesh.triangles = subdiv.at(level).triangles;
  return mesh;
}

// Parent feature = mean of its 4 children (row-major features, d columns).
inline std::vector<double> pool_faces(std::span<const double> child_features, int d,
                                      const LevelTopology& parent_level) {
  const std::size_t m = parent_level.child_faces.size();
  if (m == 0) throw std::runtime_error("pool_faces: level has no child map");
  if (child_features.size() != m * 4 * static_cast<std::size_t>(d))
    throw std::runtime_error("pool_faces: feature shape mismatch");
  std::vector<double> pooled(m * d);
  for (std::size_t f = 0; f < m; ++f) {
    const auto& kids = parent_level.child_faces[f];
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k)
        acc += child_features[static_cast<std::size_t>(kids[k]) * d + c];
      pooled[f * d + c] = acc * 0.25;
    }
  }
  return pooled;
}

// Extends a base-level vertex correspondence src -> dst to any level, by
// walking both deterministic hierarchies in lockstep: inherited vertices keep
// their image, and the midpoint of src edge (a,b) maps to the midpoint of dst
// edge (sigma(a), sigma(b)).
inline std::vector<int> lift_matching(std::span<const int> sigma_base,
                                      const SubdivisionMesh& src, const SubdivisionMesh& dst,
                                      int level) {
  if (level < 0 || level > src.levels || level > dst.levels)
    throw std::runtime_error("lift_matching: level out of range");
  if (static_cast<int>(sigma_base.size()) != src.topology[0].vertex_count)
    throw std::runtime_error("lift_matching: sigma size mismatch");
  std::vector<int> sigma(sigma_base.begin(), sigma_base.end());
  for (int l = 0; l < level; ++l) {
    const auto& src_edges = src.topology[l].edges;
    const auto dst_edge_of = detail::edge_index_map(dst.topology[l].edges);
    const int src_base = src.topology[l].vertex_count;
    const int dst_base = dst.topology[l].vertex_count;
    std::vector<int> next(src.topology[l + 1].vertex_count, -1);
    for (int v = 0; v < src_base; ++v) next[v] = sigma[v];
    for (int e = 0; e < static_cast<int>(src_edges.size()); ++e) {
      const int a = sigma[src_edges[e][0]], b = sigma[src_edges[e][1]];
      auto it = dst_edge_of.find({std::min(a, b), std::max(a, b)});
      if (it == dst_edge_of.end())
        throw std::runtime_error("lift_matching: hierarchies do not share connectivity");
      next[src_base + e] = dst_base + it->second;
    }
    sigma = std::move(next);
  }
  return sigma;
}

}  // namespace wrapnet
