#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "wrapnet/sphere.hpp"

using namespace wrapnet;
using Catch::Approx;

TEST_CASE("grid endpoints follow the lattice formula", "[sphere]") {
  for (int n : {2, 5, 64, 500}) {
    const SphereGrid as_written = fibonacci_grid(n, GridVariant::AsWritten);
    REQUIRE(norm(as_written.points[0] - Vec3{0, 1, 0}) < 1e-15);
    // last point: y = 0, radius 1, azimuth = golden angle * (n-1); oracle in
    // long double arithmetic
    const long double phi = 3.14159265358979323846264338328L *
                            (3.0L - 2.23606797749978969640917366873L);
    const long double a = phi * (n - 1);
    const Vec3 expected{static_cast<double>(std::cos(a)), 0.0, static_cast<double>(std::sin(a))};
    REQUIRE(norm(as_written.points[n - 1] - expected) < 1e-9);

    const SphereGrid full = fibonacci_grid(n, GridVariant::FullSphere);
    REQUIRE(norm(full.points[0] - Vec3{0, 1, 0}) < 1e-15);
    REQUIRE(norm(full.points[n - 1] - Vec3{0, -1, 0}) < 1e-15);
  }
}

TEST_CASE("as-written variant stays on the upper hemisphere", "[sphere]") {
  const SphereGrid grid = fibonacci_grid(100, GridVariant::AsWritten);
  for (const Vec3& p : grid.points) REQUIRE(p.y >= -1e-15);
  const SphereGrid full = fibonacci_grid(100, GridVariant::FullSphere);
  int below = 0;
  for (const Vec3& p : full.points) below += p.y < 0;
  REQUIRE(below == 50);
}

TEST_CASE("grid points are unit norm and pairwise distinct", "[sphere]") {
  for (GridVariant variant : {GridVariant::AsWritten, GridVariant::FullSphere}) {
    const SphereGrid grid = fibonacci_grid(512, variant);
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.size(); ++i) {
      REQUIRE(std::fabs(norm(grid.points[i]) - 1.0) <= 1e-12);
      for (int j = i + 1; j < grid.size(); ++j)
        min_gap = std::min(min_gap, norm(grid.points[i] - grid.points[j]));
    }
    REQUIRE(min_gap > 0.0);
  }
}

TEST_CASE("full-sphere minimum gap shrinks as the grid grows", "[sphere]") {
  auto min_gap = [](int n) {
    const SphereGrid grid = fibonacci_grid(n, GridVariant::FullSphere);
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) gap = std::min(gap, norm(grid.points[i] - grid.points[j]));
    return gap;
  };
  REQUIRE(min_gap(256) < min_gap(64));
  REQUIRE(min_gap(64) < min_gap(16));
}

TEST_CASE("grid generation is a pure function of (n, variant)", "[sphere]") {
  const SphereGrid a = fibonacci_grid(321, GridVariant::FullSphere);
  const SphereGrid b = fibonacci_grid(321, GridVariant::FullSphere);
  REQUIRE(a.points == b.points);
  REQUIRE_THROWS(fibonacci_grid(1));
}

TEST_CASE("sphere sampling is uniform-ish and deterministic", "[sphere]") {
  const auto a = sample_sphere_uniform(100000, 99);
  const auto b = sample_sphere_uniform(100000, 99);
  REQUIRE(a == b);
  Vec3 mean{0, 0, 0};
  for (const Vec3& p : a) {
    REQUIRE(std::fabs(norm(p) - 1.0) <= 1e-12);
    mean += p;
  }
  mean = mean / static_cast<double>(a.size());
  // component standard error ~ 1/sqrt(3K) ~ 0.0018; 0.02 is > 10 sigma
  REQUIRE(std::fabs(mean.x) < 0.02);
  REQUIRE(std::fabs(mean.y) < 0.02);
  REQUIRE(std::fabs(mean.z) < 0.02);
  REQUIRE_THROWS(sample_sphere_uniform(0, 1));
}
