// sphere.hpp - Fibonacci sphere grid and uniform sphere sampling.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wrapnet/mesh.hpp"
#include "wrapnet/numeric.hpp"

namespace wrapnet {

// The published lattice formula places points only on the upper (y >= 0)
// hemisphere: y_i = 1 - (i/(N-1))^2. AsWritten keeps that form; FullSphere
// substitutes the classical y_i = 1 - 2i/(N-1) so the grid covers both
// hemispheres. FullSphere is the default everywhere a grid is consumed.
enum class GridVariant { AsWritten, FullSphere };

struct SphereGrid {
  std::vector<Vec3> points;  // generation order, all unit norm
  int size() const { return static_cast<int>(points.size()); }
};

constexpr double kGoldenAngle = 3.14159265358979323846 * (3.0 - 2.2360679774997896964091736687747);

inline SphereGrid fibonacci_grid(int n, GridVariant variant = GridVariant::FullSphere) {
  if (n < 2) throw std::runtime_error("fibonacci_grid: need at least 2 points");
  SphereGrid grid;
  grid.points.resize(n);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n - 1);
    const double y = variant == GridVariant::AsWritten ? 1.0 - s * s : 1.0 - 2.0 * s;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double a = kGoldenAngle * static_cast<double>(i);
    grid.points[i] = {r * std::cos(a), y, r * std::sin(a)};
  }
  return grid;
}

// K points uniform on the unit sphere: normalized standard Gaussians.
inline std::vector<Vec3> sample_sphere_uniform(int k, Rng& rng) {
  if (k < 1) throw std::runtime_error("sample_sphere_uniform: K must be positive");
  std::vector<Vec3> pts(k);
  for (int i = 0; i < k; ++i) {
    Vec3 p;
    double len = 0.0;
    do {
      p = {rng.normal(), rng.normal(), rng.normal()};
      len = norm(p);
    } while (len < 1e-12);
    pts[i] = p / len;
  }
  return pts;
}

inline std::vector<Vec3> sample_sphere_uniform(int k, std::uint64_t seed) {
  Rng rng(seed);
  return sample_sphere_uniform(k, rng);
}

}  // namespace wrapnet
