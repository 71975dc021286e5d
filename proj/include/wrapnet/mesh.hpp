// mesh.hpp - triangle mesh container, validation, adjacency and geometry.
//
// Conventions:
// - A mesh is a list of 3D vertex positions plus a list of vertex-index
//   triangles (0-based, outward-consistent winding).
// - Only closed, consistently oriented 2-manifolds are accepted by the
//   pipeline; validate_manifold reports violations instead of throwing.
// - Positions are double precision throughout; the gradient checks in the
//   network layers depend on it.
// - OBJ support is v/f triangle lines only; OFF is the ASCII flavor with a
//   separate counts line. Both parsers convert into the same Mesh.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wrapnet/numeric.hpp"

namespace wrapnet {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

using Tri = std::array<int, 3>;

struct Mesh {
  std::vector<Vec3> positions;
  std::vector<Tri> triangles;

  int vertex_count() const { return static_cast<int>(positions.size()); }
  int face_count() const { return static_cast<int>(triangles.size()); }
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;

  void fail(std::string msg) {
    ok = false;
    violations.push_back(std::move(msg));
  }
};

// Undirected edges as sorted vertex pairs in lexicographic order. This
// ordering is load-bearing: subdivision indexing derives midpoint vertex ids
// from it, so it must be a pure function of the connectivity.
inline std::vector<std::array<int, 2>> collect_edges(const std::vector<Tri>& triangles) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(triangles.size() * 3 / 2);
  for (const Tri& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// Checks the closed-oriented-2-manifold contract: index bounds, no repeated
// vertex within a triangle, no duplicate faces, every undirected edge shared
// by exactly two faces with opposite directions, no zero-area faces, no
// isolated vertices. Failures are report entries, never exceptions.
inline ValidationReport validate_manifold(const Mesh& mesh) {
  ValidationReport report;
  const int n = mesh.vertex_count();
  if (n == 0 || mesh.face_count() == 0) {
    report.fail("empty mesh");
    return report;
  }

  std::vector<char> referenced(n, 0);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& t = mesh.triangles[f];
    bool bad = false;
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= n) {
        report.fail("face " + std::to_string(f) + ": vertex index out of range");
        bad = true;
      }
    }
    if (bad) continue;
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      report.fail("face " + std::to_string(f) + ": repeated vertex");
    for (int k = 0; k < 3; ++k) referenced[t[k]] = 1;
    const Vec3 c = cross(mesh.positions[t[1]] - mesh.positions[t[0]],
                         mesh.positions[t[2]] - mesh.positions[t[0]]);
    if (norm(c) == 0.0)
      report.fail("face " + std::to_string(f) + ": zero area");
  }
  if (!report.ok) return report;

  for (int v = 0; v < n; ++v)
    if (!referenced[v]) report.fail("vertex " + std::to_string(v) + ": not referenced by any face");

  std::map<std::array<int, 3>, int> seen;
  for (int f = 0; f < mesh.face_count(); ++f) {
    std::array<int, 3> key = mesh.triangles[f];
    std::sort(key.begin(), key.end());
    auto [it, fresh] = seen.emplace(key, f);
    if (!fresh)
      report.fail("faces " + std::to_string(it->second) + " and " + std::to_string(f) +
                  ": same vertex triple");
  }

  // Directed edge census. Closed + consistently oriented means each directed
  // edge appears exactly once and its reverse exactly once.
  std::map<std::pair<int, int>, int> directed;
  for (const Tri& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) directed[{t[k], t[(k + 1) % 3]}]++;
  for (const auto& [e, count] : directed) {
    if (count > 1) {
      report.fail("directed edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                  ") used " + std::to_string(count) + " times (non-manifold or inconsistent winding)");
      continue;
    }
    auto rev = directed.find({e.second, e.first});
    if (rev == directed.end())
      report.fail("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                  "): boundary or flipped orientation");
  }
  return report;
}

// ---------------------------------------------------------------------------
// File I/O

enum class MeshFormat { Obj, Off };

inline MeshFormat format_from_path(const std::string& path) {
  auto pos = path.rfind('.');
  std::string ext = pos == std::string::npos ? "" : path.substr(pos + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "obj") return MeshFormat::Obj;
  if (ext == "off") return MeshFormat::Off;
  throw std::runtime_error("cannot infer mesh format from path: " + path);
}

namespace detail {

inline void check_loaded_mesh(const Mesh& mesh, const std::string& where) {
  if (mesh.positions.empty() || mesh.triangles.empty())
    throw std::runtime_error(where + ": empty mesh");
  const int n = mesh.vertex_count();
  for (const Tri& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= n)
        throw std::runtime_error(where + ": face index out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw std::runtime_error(where + ": face repeats a vertex");
  }
}

inline Mesh load_obj(std::istream& in, const std::string& where) {
  Mesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    const std::string ctx = where + ":" + std::to_string(lineno);
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw std::runtime_error(ctx + ": malformed vertex line");
      mesh.positions.push_back(p);
    } else if (tag == "f") {
      std::string tok;
      std::vector<long> idx;
      while (ls >> tok) {
        if (tok.find('/') != std::string::npos)
          throw std::runtime_error(ctx + ": f with texture/normal references is not supported");
        std::size_t used = 0;
        long v = 0;
        try {
          v = std::stol(tok, &used);
        } catch (const std::exception&) {
          throw std::runtime_error(ctx + ": malformed face index '" + tok + "'");
        }
        if (used != tok.size()) throw std::runtime_error(ctx + ": malformed face index '" + tok + "'");
        idx.push_back(v);
      }
      if (idx.size() != 3) throw std::runtime_error(ctx + ": only triangles are supported");
      Tri t;
      for (int k = 0; k < 3; ++k) {
        // OBJ is 1-based; negative indices (relative addressing) rejected.
        if (idx[k] < 1) throw std::runtime_error(ctx + ": face index must be positive");
        t[k] = static_cast<int>(idx[k] - 1);
      }
      mesh.triangles.push_back(t);
    } else if (tag == "vn" || tag == "vt" || tag == "usemtl" || tag == "mtllib") {
      throw std::runtime_error(ctx + ": unsupported OBJ feature '" + tag + "'");
    }
    // Anything else (o/g/s/comments) is ignored.
  }
  check_loaded_mesh(mesh, where);
  return mesh;
}

inline Mesh load_off(std::istream& in, const std::string& where) {
  std::string header;
  if (!(in >> header) || header != "OFF") throw std::runtime_error(where + ": missing OFF header");
  long nv = 0, nf = 0, ne = 0;
  if (!(in >> nv >> nf >> ne)) throw std::runtime_error(where + ": malformed OFF counts line");
  if (nv <= 0 || nf <= 0) throw std::runtime_error(where + ": empty mesh");
  Mesh mesh;
  mesh.positions.resize(nv);
  for (long i = 0; i < nv; ++i)
    if (!(in >> mesh.positions[i].x >> mesh.positions[i].y >> mesh.positions[i].z))
      throw std::runtime_error(where + ": malformed vertex line " + std::to_string(i));
  mesh.triangles.resize(nf);
  for (long f = 0; f < nf; ++f) {
    long arity = 0;
    if (!(in >> arity)) throw std::runtime_error(where + ": malformed face line " + std::to_string(f));
    if (arity != 3) throw std::runtime_error(where + ": only triangles are supported");
    for (int k = 0; k < 3; ++k) {
      long v = 0;
      if (!(in >> v)) throw std::runtime_error(where + ": malformed face line " + std::to_string(f));
      mesh.triangles[f][k] = static_cast<int>(v);
    }
  }
  check_loaded_mesh(mesh, where);
  return mesh;
}

}  // namespace detail

inline Mesh load_mesh(std::istream& in, MeshFormat format, const std::string& where = "<stream>") {
  return format == MeshFormat::Obj ? detail::load_obj(in, where) : detail::load_off(in, where);
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  return load_mesh(in, format_from_path(path), path);
}

inline Mesh load_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  return load_mesh(in, format, path);
}

// 17 significant digits: text round-trips reproduce the double bit-exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void save_mesh(const Mesh& mesh, std::ostream& out, MeshFormat format) {
  detail::check_loaded_mesh(mesh, "save_mesh");
  if (format == MeshFormat::Obj) {
    for (const Vec3& p : mesh.positions)
      out << "v " << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z)
          << '\n';
    for (const Tri& t : mesh.triangles)
      out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  } else {
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
    for (const Vec3& p : mesh.positions)
      out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
    for (const Tri& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) throw std::runtime_error("save_mesh: write failure");
}

inline void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_mesh(mesh, out, format_from_path(path));
  out.flush();
  if (!out) throw std::runtime_error("write failure: " + path);
}

inline void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_mesh(mesh, out, format);
  out.flush();
  if (!out) throw std::runtime_error("write failure: " + path);
}

// ---------------------------------------------------------------------------
// Normalization

// Zero-mean, max vertex norm 1. The centroid uses order-invariant summation
// so normalize commutes with vertex permutation bit-exactly.
inline Mesh normalize(const Mesh& mesh) {
  if (mesh.positions.empty()) throw std::runtime_error("normalize: empty mesh");
  ExactSum sx, sy, sz;
  for (const Vec3& p : mesh.positions) {
    sx.add(p.x);
    sy.add(p.y);
    sz.add(p.z);
  }
  const double inv_n = 1.0 / static_cast<double>(mesh.vertex_count());
  const Vec3 centroid{sx.result() * inv_n, sy.result() * inv_n, sz.result() * inv_n};
  Mesh out = mesh;
  double max_norm = 0.0;
  for (Vec3& p : out.positions) {
    p -= centroid;
    max_norm = std::max(max_norm, norm(p));
  }
  if (max_norm == 0.0) throw std::runtime_error("normalize: all vertices coincide");
  const double inv_s = 1.0 / max_norm;
  for (Vec3& p : out.positions) p = p * inv_s;
  return out;
}

// ---------------------------------------------------------------------------
// Adjacency structures

// Entry (i,k) is the face sharing edge k of face i, where edge k runs from
// local vertex k to k+1 mod 3.
struct FaceAdjacency {
  std::vector<std::array<int, 3>> neighbors;
};

inline FaceAdjacency build_face_adjacency(const Mesh& mesh) {
  const int m = mesh.face_count();
  FaceAdjacency adj;
  adj.neighbors.assign(m, {-1, -1, -1});
  std::map<std::pair<int, int>, std::pair<int, int>> by_directed_edge;  // (a,b) -> (face, slot)
  for (int f = 0; f < m; ++f)
    for (int k = 0; k < 3; ++k) {
      auto [it, fresh] = by_directed_edge.emplace(
          std::make_pair(mesh.triangles[f][k], mesh.triangles[f][(k + 1) % 3]),
          std::make_pair(f, k));
      if (!fresh) throw std::runtime_error("build_face_adjacency: non-manifold input");
    }
  for (int f = 0; f < m; ++f)
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.triangles[f][k], b = mesh.triangles[f][(k + 1) % 3];
      auto it = by_directed_edge.find({b, a});
      if (it == by_directed_edge.end())
        throw std::runtime_error("build_face_adjacency: boundary edge (open mesh)");
      adj.neighbors[f][k] = it->second.first;
    }
  return adj;
}

// For each vertex, the faces containing it and the corner slot it occupies.
struct VertexStar {
  std::vector<std::vector<std::pair<int, int>>> faces;  // vertex -> [(face, corner)]
};

inline VertexStar build_vertex_star(const Mesh& mesh) {
  VertexStar star;
  star.faces.resize(mesh.vertex_count());
  for (int f = 0; f < mesh.face_count(); ++f)
    for (int k = 0; k < 3; ++k) star.faces[mesh.triangles[f][k]].push_back({f, k});
  return star;
}

// ---------------------------------------------------------------------------
// Geometry

struct FaceGeometry {
  std::vector<Vec3> normals;    // unit, winding-consistent
  std::vector<double> areas;    // strictly positive
  std::vector<Vec3> centroids;  // vertex averages
};

inline FaceGeometry face_geometry(const Mesh& mesh) {
  FaceGeometry g;
  const int m = mesh.face_count();
  g.normals.resize(m);
  g.areas.resize(m);
  g.centroids.resize(m);
  for (int f = 0; f < m; ++f) {
    const Tri& t = mesh.triangles[f];
    const Vec3 &p0 = mesh.positions[t[0]], &p1 = mesh.positions[t[1]], &p2 = mesh.positions[t[2]];
    const Vec3 c = cross(p1 - p0, p2 - p0);
    const double len = norm(c);
    if (len == 0.0) throw std::runtime_error("face_geometry: zero-area face " + std::to_string(f));
    g.normals[f] = c / len;
    g.areas[f] = 0.5 * len;
    g.centroids[f] = (p0 + p1 + p2) / 3.0;
  }
  return g;
}

// Deterministic 7-dim face features: unit normal (3), area (1), curvature
// vector (3) = own centroid minus the mean of the three neighbor centroids.
// Row-major m x 7.
inline std::vector<double> init_face_features(const Mesh& mesh, const FaceAdjacency& adj) {
  const FaceGeometry g = face_geometry(mesh);
  const int m = mesh.face_count();
  std::vector<double> feats(static_cast<std::size_t>(m) * 7);
  for (int f = 0; f < m; ++f) {
    const auto& nb = adj.neighbors[f];
    const Vec3 nb_mean = (g.centroids[nb[0]] + g.centroids[nb[1]] + g.centroids[nb[2]]) / 3.0;
    const Vec3 curv = g.centroids[f] - nb_mean;
    double* row = feats.data() + static_cast<std::size_t>(f) * 7;
    row[0] = g.normals[f].x;
    row[1] = g.normals[f].y;
    row[2] = g.normals[f].z;
    row[3] = g.areas[f];
    row[4] = curv.x;
    row[5] = curv.y;
    row[6] = curv.z;
  }
  return feats;
}

// ---------------------------------------------------------------------------
// Permutation

namespace detail {
inline void check_bijection(std::span<const int> perm, int n, const char* what) {
  if (static_cast<int>(perm.size()) != n)
    throw std::runtime_error(std::string(what) + ": wrong size");
  std::vector<char> hit(n, 0);
  for (int v : perm) {
    if (v < 0 || v >= n || hit[v]) throw std::runtime_error(std::string(what) + ": not a bijection");
    hit[v] = 1;
  }
}
}  // namespace detail

// vertex_perm maps old vertex index -> new vertex index, face_perm likewise.
// The result is the same shape with relabeled indexing.
inline Mesh permute(const Mesh& mesh, std::span<const int> vertex_perm,
                    std::span<const int> face_perm) {
  detail::check_bijection(vertex_perm, mesh.vertex_count(), "vertex_perm");
  detail::check_bijection(face_perm, mesh.face_count(), "face_perm");
  Mesh out;
  out.positions.resize(mesh.vertex_count());
  out.triangles.resize(mesh.face_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) out.positions[vertex_perm[v]] = mesh.positions[v];
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& t = mesh.triangles[f];
    out.triangles[face_perm[f]] = {vertex_perm[t[0]], vertex_perm[t[1]], vertex_perm[t[2]]};
  }
  return out;
}

// Euler characteristic V - E + F; genus of a closed surface is (2 - chi) / 2.
inline int euler_characteristic(const Mesh& mesh) {
  return mesh.vertex_count() - static_cast<int>(collect_edges(mesh.triangles).size()) +
         mesh.face_count();
}

}  // namespace wrapnet
