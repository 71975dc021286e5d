// metrics.hpp - point-based reconstruction metrics.
//
// Chamfer distance: symmetric sum of mean squared nearest-neighbor
// distances. Normals error: symmetric mean of (1 - cosine) between normals
// at nearest-neighbor pairs. Curvature preservation: same aggregation with
// absolute differences of covariance curvature (surface variation
// lambda_min / (lambda_0 + lambda_1 + lambda_2) over k-nearest
// neighborhoods, k = 15 by default). CP's aggregation is two-sided by
// convention, mirroring the normals-error formula.
//
// Nearest-neighbor queries run on a uniform cell grid; ties break toward the
// lowest point index.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "wrapnet/mesh.hpp"
#include "wrapnet/numeric.hpp"

namespace wrapnet {

struct PointSet {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // optional; unit when present

  bool has_normals() const { return !normals.empty(); }
  int size() const { return static_cast<int>(points.size()); }
};

// --- nearest neighbors -------------------------------------------------------

// Uniform hash-free cell grid over the bounding box. Query expands rings of
// cells until the best squared distance cannot improve.
class NearestNeighborGrid {
 public:
  explicit NearestNeighborGrid(std::span<const Vec3> points)
      : points_(points.begin(), points.end()) {
    if (points_.empty()) throw std::runtime_error("NearestNeighborGrid: empty point set");
    lo_ = hi_ = points_[0];
    for (const Vec3& p : points_)
      for (int c = 0; c < 3; ++c) {
        lo_[c] = std::min(lo_[c], p[c]);
        hi_[c] = std::max(hi_[c], p[c]);
      }
    const double target_cells = std::cbrt(static_cast<double>(points_.size()));
    for (int c = 0; c < 3; ++c) {
      dims_[c] = std::max(1, static_cast<int>(target_cells));
      const double span = hi_[c] - lo_[c];
      cell_[c] = span > 0 ? span / dims_[c] : 1.0;
    }
    cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
    for (int i = 0; i < static_cast<int>(points_.size()); ++i)
      cells_[cell_index(points_[i])].push_back(i);
  }

  // Index of the nearest point (lowest index on ties).
  int nearest(const Vec3& q) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    const std::array<int, 3> home = cell_coords(q);
    const int max_ring = *std::max_element(dims_.begin(), dims_.end());
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best >= 0) {
        // Points beyond the current ring are at least (ring-1) cells away in
        // some axis; stop once that bound exceeds the best found.
        const double min_cell = *std::min_element(cell_.begin(), cell_.end());
        const double bound = (ring - 1) * min_cell;
        if (bound > 0 && bound * bound > best_d2) break;
      }
      bool any_cell = false;
      for (int dx = -ring; dx <= ring; ++dx)
        for (int dy = -ring; dy <= ring; ++dy)
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const int cx = home[0] + dx, cy = home[1] + dy, cz = home[2] + dz;
            if (cx < 0 || cy < 0 || cz < 0 || cx >= dims_[0] || cy >= dims_[1] || cz >= dims_[2])
              continue;
            any_cell = true;
            for (int idx : cells_[(static_cast<std::size_t>(cx) * dims_[1] + cy) * dims_[2] + cz]) {
              const Vec3 d = points_[idx] - q;
              const double d2 = dot(d, d);
              if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                best_d2 = d2;
                best = idx;
              }
            }
          }
      if (!any_cell && best >= 0) break;
    }
    return best;
  }

  // Indices of the k nearest points (ascending distance, index tie-break).
  std::vector<int> k_nearest(const Vec3& q, int k) const {
    if (k > static_cast<int>(points_.size()))
      throw std::runtime_error("k_nearest: k exceeds point count");
    std::vector<std::pair<double, int>> scored(points_.size());
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
      const Vec3 d = points_[i] - q;
      scored[i] = {dot(d, d), i};
    }
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) out[i] = scored[i].second;
    return out;
  }

 private:
  std::array<int, 3> cell_coords(const Vec3& p) const {
    std::array<int, 3> c;
    for (int i = 0; i < 3; ++i) {
      const int v = static_cast<int>((p[i] - lo_[i]) / cell_[i]);
      c[i] = std::clamp(v, 0, dims_[i] - 1);
    }
    return c;
  }
  std::size_t cell_index(const Vec3& p) const {
    const auto c = cell_coords(p);
    return (static_cast<std::size_t>(c[0]) * dims_[1] + c[1]) * dims_[2] + c[2];
  }

  std::vector<Vec3> points_;
  Vec3 lo_, hi_;
  std::array<int, 3> dims_;
  std::array<double, 3> cell_;
  std::vector<std::vector<int>> cells_;
};

inline std::vector<int> nearest_indices(std::span<const Vec3> from, std::span<const Vec3> to) {
  NearestNeighborGrid grid(to);
  std::vector<int> idx(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) idx[i] = grid.nearest(from[i]);
  return idx;
}

// --- metrics -------------------------------------------------------------------

inline double chamfer(const PointSet& s1, const PointSet& s2) {
  if (s1.points.empty() || s2.points.empty()) throw std::runtime_error("chamfer: empty point set");
  auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    const std::vector<int> nn = nearest_indices(from, to);
    ExactSum acc;
    for (std::size_t i = 0; i < from.size(); ++i) {
      const Vec3 d = from[i] - to[nn[i]];
      acc.add(dot(d, d));
    }
    return acc.result() / static_cast<double>(from.size());
  };
  return directed(s1.points, s2.points) + directed(s2.points, s1.points);
}

inline double normals_error(const PointSet& s1, const PointSet& s2) {
  if (!s1.has_normals() || !s2.has_normals())
    throw std::runtime_error("normals_error: normals missing");
  auto directed = [](const PointSet& from, const PointSet& to) {
    const std::vector<int> nn = nearest_indices(from.points, to.points);
    ExactSum acc;
    for (std::size_t i = 0; i < from.points.size(); ++i) {
      const Vec3& na = from.normals[i];
      const Vec3& nb = to.normals[nn[i]];
      const double la = norm(na), lb = norm(nb);
      if (la == 0.0 || lb == 0.0) throw std::runtime_error("normals_error: zero-norm normal");
      acc.add(1.0 - dot(na, nb) / (la * lb));
    }
    return acc.result() / static_cast<double>(from.points.size());
  };
  return directed(s1, s2) + directed(s2, s1);
}

// --- covariance normals and curvature ------------------------------------------

namespace detail {

// Eigen-decomposition of a symmetric 3x3 by cyclic Jacobi rotations.
// Returns eigenvalues ascending with matching unit eigenvectors as columns.
struct SymEig3 {
  std::array<double, 3> values;
  std::array<Vec3, 3> vectors;
};

inline SymEig3 sym_eig3(std::array<std::array<double, 3>, 3> a) {
  std::array<std::array<double, 3>, 3> v = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::fabs(a[0][1]) + std::fabs(a[0][2]) + std::fabs(a[1][2]);
    if (off == 0.0) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a[i][i] < a[j][j]; });
  SymEig3 out;
  for (int i = 0; i < 3; ++i) {
    out.values[i] = a[order[i]][order[i]];
    out.vectors[i] = {v[0][order[i]], v[1][order[i]], v[2][order[i]]};
  }
  return out;
}

}  // namespace detail

struct NormalsCurvature {
  std::vector<Vec3> normals;      // unit; sign toward outward (away from set centroid)
  std::vector<double> curvature;  // lambda_min / trace, in [0, 1/3]
};

inline NormalsCurvature estimate_normals_curvature(const PointSet& set, int k = 15) {
  const int n = set.size();
  if (k < 3) throw std::runtime_error("estimate_normals_curvature: k must be >= 3");
  if (k > n) throw std::runtime_error("estimate_normals_curvature: k exceeds point count");
  NearestNeighborGrid grid(set.points);
  Vec3 set_centroid{0, 0, 0};
  for (const Vec3& p : set.points) set_centroid += p;
  set_centroid = set_centroid / static_cast<double>(n);

  NormalsCurvature out;
  out.normals.resize(n);
  out.curvature.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<int> nb = grid.k_nearest(set.points[i], k);
    Vec3 mean{0, 0, 0};
    for (int j : nb) mean += set.points[j];
    mean = mean / static_cast<double>(k);
    std::array<std::array<double, 3>, 3> cov = {};
    for (int j : nb) {
      const Vec3 d = set.points[j] - mean;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
    }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] /= static_cast<double>(k);
    const detail::SymEig3 eig = detail::sym_eig3(cov);
    Vec3 normal = eig.vectors[0];
    const double len = norm(normal);
    if (len > 0) normal = normal / len;
    if (dot(normal, set.points[i] - set_centroid) < 0.0) normal = normal * -1.0;
    out.normals[i] = normal;
    const double trace = eig.values[0] + eig.values[1] + eig.values[2];
    out.curvature[i] = trace > 0 ? std::max(0.0, eig.values[0]) / trace : 0.0;
  }
  return out;
}

// Curvature preservation: two-sided mean absolute curvature difference at
// nearest-neighbor pairs.
inline double curvature_preservation(const PointSet& s1, const PointSet& s2, int k = 15) {
  const NormalsCurvature c1 = estimate_normals_curvature(s1, k);
  const NormalsCurvature c2 = estimate_normals_curvature(s2, k);
  auto directed = [](const PointSet& from, std::span<const double> curv_from, const PointSet& to,
                     std::span<const double> curv_to) {
    const std::vector<int> nn = nearest_indices(from.points, to.points);
    ExactSum acc;
    for (std::size_t i = 0; i < from.points.size(); ++i)
      acc.add(std::fabs(curv_from[i] - curv_to[nn[i]]));
    return acc.result() / static_cast<double>(from.points.size());
  };
  return directed(s1, c1.curvature, s2, c2.curvature) + directed(s2, c2.curvature, s1, c1.curvature);
}

// Area-weighted vertex normals; exact when connectivity is available.
inline std::vector<Vec3> mesh_vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> normals(mesh.vertex_count(), {0, 0, 0});
  for (const Tri& t : mesh.triangles) {
    const Vec3 c = cross(mesh.positions[t[1]] - mesh.positions[t[0]],
                         mesh.positions[t[2]] - mesh.positions[t[0]]);
    for (int k = 0; k < 3; ++k) normals[t[k]] += c;  // |c| = 2 * area
  }
  for (Vec3& nrm : normals) {
    const double len = norm(nrm);
    if (len == 0.0) throw std::runtime_error("mesh_vertex_normals: degenerate vertex normal");
    nrm = nrm / len;
  }
  return normals;
}

inline PointSet mesh_point_set(const Mesh& mesh, bool with_normals = true) {
  PointSet set;
  set.points = mesh.positions;
  if (with_normals) set.normals = mesh_vertex_normals(mesh);
  return set;
}

}  // namespace wrapnet
