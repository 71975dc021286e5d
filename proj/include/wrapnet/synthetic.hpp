// synthetic.hpp - closed-manifold primitives and the synthetic dataset.
//
// The dataset generator emits, per item: a plain mesh (used by the vanilla
// model), plus a base/full pair where full is the deterministic 3-level
// midpoint refinement of base with vertices projected back onto the item's
// surface (used by the subdivision model). Everything is written
// pre-normalized: zero centroid, max vertex norm 1.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wrapnet/mesh.hpp"
#include "wrapnet/subdivision.hpp"

namespace wrapnet {

inline Mesh make_tetrahedron() {
  Mesh mesh;
  mesh.positions = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
  return mesh;
}

inline Mesh make_octahedron() {
  Mesh mesh;
  mesh.positions = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  mesh.triangles = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                    {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  return mesh;
}

inline Mesh make_icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh mesh;
  mesh.positions = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return mesh;
}

inline Mesh make_cube() {
  Mesh mesh;
  mesh.positions = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
  mesh.triangles = {{0, 3, 2}, {0, 2, 1}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                    {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  return mesh;
}

// Parametric torus: ring radius big_r, tube radius small_r, nu x nv grid.
inline Mesh make_torus(int nu, int nv, double big_r, double small_r) {
  if (nu < 3 || nv < 3) throw std::runtime_error("make_torus: need at least a 3x3 grid");
  Mesh mesh;
  const double two_pi = 6.283185307179586476925286766559;
  mesh.positions.resize(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      const double u = two_pi * i / nu, v = two_pi * j / nv;
      const double ring = big_r + small_r * std::cos(v);
      mesh.positions[static_cast<std::size_t>(i) * nv + j] = {ring * std::cos(u),
                                                              ring * std::sin(u),
                                                              small_r * std::sin(v)};
    }
  auto vid = [&](int i, int j) { return ((i + nu) % nu) * nv + (j + nv) % nv; };
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  return mesh;
}

// --- surface projections -----------------------------------------------------

inline void project_to_unit_sphere(Mesh& mesh) {
  for (Vec3& p : mesh.positions) p = p / norm(p);
}

inline void project_to_ellipsoid(Mesh& mesh, double a, double b, double c) {
  for (Vec3& p : mesh.positions) {
    const double s = std::sqrt((p.x / a) * (p.x / a) + (p.y / b) * (p.y / b) +
                               (p.z / c) * (p.z / c));
    p = p / s;
  }
}

inline void project_to_torus(Mesh& mesh, double big_r, double small_r) {
  for (Vec3& p : mesh.positions) {
    const double axial = std::hypot(p.x, p.y);
    Vec3 q = axial > 0 ? Vec3{p.x * big_r / axial, p.y * big_r / axial, 0.0}
                       : Vec3{big_r, 0.0, 0.0};
    Vec3 d = p - q;
    const double len = norm(d);
    p = len > 0 ? q + d * (small_r / len) : q + Vec3{0, 0, small_r};
  }
}

// Icosphere at a given refinement level, unit radius.
inline Mesh make_icosphere(int level) {
  SubdivisionMesh subdiv = loop_subdivide(make_icosahedron(), level);
  Mesh mesh = mesh_at_level(subdiv, level);
  project_to_unit_sphere(mesh);
  return mesh;
}

// --- dataset ------------------------------------------------------------------

struct DatasetItem {
  std::string id;
  std::string label;
  std::string plain_path;  // relative to the dataset directory
  std::string base_path;
  std::string full_path;
};

struct DatasetManifest {
  std::string directory;
  std::vector<DatasetItem> items;

  const DatasetItem& find(const std::string& id) const {
    for (const auto& item : items)
      if (item.id == id) return item;
    throw std::runtime_error("dataset item not found: " + id);
  }
};

inline std::string manifest_path(const std::string& dataset_dir) {
  return (std::filesystem::path(dataset_dir) / "manifest.txt").string();
}

inline void save_manifest(const DatasetManifest& manifest) {
  std::ofstream out(manifest_path(manifest.directory));
  if (!out) throw std::runtime_error("cannot write manifest in " + manifest.directory);
  out << "# id label plain base full\n";
  for (const auto& item : manifest.items)
    out << item.id << ' ' << item.label << ' ' << item.plain_path << ' ' << item.base_path << ' '
        << item.full_path << '\n';
  if (!out) throw std::runtime_error("manifest write failure");
}

inline DatasetManifest load_manifest(const std::string& dataset_dir) {
  std::ifstream in(manifest_path(dataset_dir));
  if (!in) throw std::runtime_error("cannot open manifest in " + dataset_dir);
  DatasetManifest manifest;
  manifest.directory = dataset_dir;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DatasetItem item;
    if (!(ls >> item.id >> item.label >> item.plain_path >> item.base_path >> item.full_path))
      throw std::runtime_error("malformed manifest line: " + line);
    manifest.items.push_back(item);
  }
  return manifest;
}

inline Mesh load_dataset_mesh(const DatasetManifest& manifest, const std::string& rel) {
  return load_mesh((std::filesystem::path(manifest.directory) / rel).string());
}

namespace detail {

struct NormalizeTransform {
  Vec3 centroid;
  double inv_scale = 1.0;
};

inline NormalizeTransform normalize_transform(const Mesh& mesh) {
  ExactSum sx, sy, sz;
  for (const Vec3& p : mesh.positions) {
    sx.add(p.x);
    sy.add(p.y);
    sz.add(p.z);
  }
  const double inv_n = 1.0 / mesh.vertex_count();
  NormalizeTransform t;
  t.centroid = {sx.result() * inv_n, sy.result() * inv_n, sz.result() * inv_n};
  double max_norm = 0.0;
  for (const Vec3& p : mesh.positions) max_norm = std::max(max_norm, norm(p - t.centroid));
  if (max_norm == 0.0) throw std::runtime_error("normalize: all vertices coincide");
  t.inv_scale = 1.0 / max_norm;
  return t;
}

inline void apply_transform(Mesh& mesh, const NormalizeTransform& t) {
  for (Vec3& p : mesh.positions) p = (p - t.centroid) * t.inv_scale;
}

}  // namespace detail

// Writes the synthetic dataset and returns its manifest. The seed reserves a
// knob for future randomized variants; the current shapes are deterministic.
inline DatasetManifest gen_synthetic(const std::string& out_dir, std::uint64_t seed) {
  (void)seed;
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.directory = out_dir;

  auto emit = [&](const std::string& id, const std::string& label, Mesh plain, Mesh base,
                  Mesh full) {
    // One consistent frame per item: the pair is normalized by the full
    // mesh's transform so base and full stay aligned.
    detail::apply_transform(plain, detail::normalize_transform(plain));
    const auto pair_t = detail::normalize_transform(full);
    detail::apply_transform(base, pair_t);
    detail::apply_transform(full, pair_t);
    DatasetItem item;
    item.id = id;
    item.label = label;
    item.plain_path = id + ".off";
    item.base_path = id + "_base.off";
    item.full_path = id + "_full.off";
    for (const auto& [mesh, rel] :
         {std::pair<const Mesh&, std::string>(plain, item.plain_path),
          std::pair<const Mesh&, std::string>(base, item.base_path),
          std::pair<const Mesh&, std::string>(full, item.full_path)}) {
      ValidationReport report = validate_manifold(mesh);
      if (!report.ok)
        throw std::runtime_error("gen_synthetic: " + rel + " failed validation: " +
                                 report.violations.front());
      save_mesh(mesh, (fs::path(out_dir) / rel).string());
    }
    manifest.items.push_back(item);
  };

  // Spheres: icosahedron refinements projected to the unit sphere.
  {
    Mesh base = make_icosahedron();
    project_to_unit_sphere(base);
    Mesh full = mesh_at_level(loop_subdivide(base, 3), 3);
    project_to_unit_sphere(full);
    for (int level = 1; level <= 3; ++level)
      emit("icosphere_l" + std::to_string(level), "sphere", make_icosphere(level), base, full);
  }

  // Boxes: triangulated cube refinements (midpoints already lie on the surface).
  {
    Mesh base = make_cube();
    SubdivisionMesh subdiv = loop_subdivide(base, 3);
    for (int level = 1; level <= 3; ++level)
      emit("box_l" + std::to_string(level), "box", mesh_at_level(subdiv, level), base,
           mesh_at_level(subdiv, 3));
  }

  // Tori at two resolutions, genus-1 fixtures.
  {
    const double big_r = 0.7, small_r = 0.3;
    Mesh base = make_torus(6, 6, big_r, small_r);
    Mesh full = mesh_at_level(loop_subdivide(base, 3), 3);
    project_to_torus(full, big_r, small_r);
    emit("torus_8x8", "torus", make_torus(8, 8, big_r, small_r), base, full);
    emit("torus_16x16", "torus", make_torus(16, 16, big_r, small_r), base, full);
  }

  // Ellipsoids: anisotropically scaled icospheres.
  {
    const double a = 1.0, b = 0.75, c = 0.55;
    auto scaled = [&](Mesh mesh) {
      for (Vec3& p : mesh.positions) p = {p.x * a, p.y * b, p.z * c};
      return mesh;
    };
    Mesh base = scaled(make_icosahedron());
    project_to_ellipsoid(base, a, b, c);
    Mesh full = mesh_at_level(loop_subdivide(base, 3), 3);
    project_to_ellipsoid(full, a, b, c);
    for (int level : {1, 2, 3})
      emit("ellipsoid_l" + std::to_string(level), "ellipsoid", scaled(make_icosphere(level)), base,
           full);
  }

  save_manifest(manifest);
  return manifest;
}

}  // namespace wrapnet
