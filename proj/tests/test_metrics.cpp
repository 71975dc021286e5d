#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "wrapnet/metrics.hpp"
#include "wrapnet/numeric.hpp"
#include "wrapnet/sphere.hpp"
#include "wrapnet/synthetic.hpp"

using namespace wrapnet;
using Catch::Approx;

namespace {

// O(k^2) oracles, double loops all the way down.
double chamfer_brute(const std::vector<Vec3>& s1, const std::vector<Vec3>& s2) {
  auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    ExactSum acc;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) {
        const Vec3 d = p - q;
        best = std::min(best, dot(d, d));
      }
      acc.add(best);
    }
    return acc.result() / static_cast<double>(from.size());
  };
  return directed(s1, s2) + directed(s2, s1);
}

int nearest_brute(const Vec3& p, const std::vector<Vec3>& to) {
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(to.size()); ++i) {
    const Vec3 d = p - to[i];
    const double d2 = dot(d, d);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

std::vector<Vec3> random_points(int k, Rng& rng, double scale = 1.0) {
  std::vector<Vec3> pts(k);
  for (Vec3& p : pts) p = {rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                           rng.uniform(-scale, scale)};
  return pts;
}

}  // namespace

TEST_CASE("chamfer of identical sets is exactly zero", "[metrics]") {
  Rng rng(1);
  PointSet s;
  s.points = random_points(25, rng);
  REQUIRE(chamfer(s, s) == 0.0);
}

TEST_CASE("chamfer of two single points is the squared distance twice", "[metrics]") {
  PointSet a, b;
  a.points = {{0, 0, 0}};
  b.points = {{1, 0, 0}};
  REQUIRE(chamfer(a, b) == 2.0);
}

TEST_CASE("chamfer matches the exhaustive oracle on random sets", "[metrics]") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    PointSet a, b;
    a.points = random_points(30, rng);
    b.points = random_points(40, rng);
    REQUIRE(chamfer(a, b) == chamfer_brute(a.points, b.points));
    REQUIRE(chamfer(b, a) == chamfer(a, b));
  }
}

TEST_CASE("chamfer is invariant to point permutation and common rotation", "[metrics]") {
  Rng rng(3);
  PointSet a, b;
  a.points = random_points(17, rng);
  b.points = random_points(23, rng);
  const double base = chamfer(a, b);

  PointSet shuffled = a;
  std::reverse(shuffled.points.begin(), shuffled.points.end());
  REQUIRE(chamfer(shuffled, b) == base);

  const double angle = 0.7;
  auto rotate = [&](PointSet s) {
    for (Vec3& p : s.points)
      p = {p.x * std::cos(angle) - p.y * std::sin(angle),
           p.x * std::sin(angle) + p.y * std::cos(angle), p.z};
    return s;
  };
  REQUIRE(chamfer(rotate(a), rotate(b)) == Approx(base).margin(1e-10));
}

TEST_CASE("normals error on identical sets and opposed normals", "[metrics]") {
  PointSet a;
  a.points = {{0, 0, 0}, {1, 1, 1}};
  a.normals = {{0, 0, 1}, {1, 0, 0}};
  REQUIRE(normals_error(a, a) == 0.0);

  PointSet b = a;
  b.normals = {{0, 0, -1}, {-1, 0, 0}};
  REQUIRE(normals_error(a, b) == 4.0);  // (1 - (-1)) in each direction

  PointSet c = a;
  c.normals = {{1, 0, 0}, {0, 0, 1}};
  REQUIRE(normals_error(a, c) == 2.0);  // orthogonal: cosine 0 twice
}

TEST_CASE("normals error rejects zero normals and missing normals", "[metrics]") {
  PointSet a, b;
  a.points = b.points = {{0, 0, 0}};
  a.normals = {{0, 0, 1}};
  REQUIRE_THROWS(normals_error(a, b));
  b.normals = {{0, 0, 0}};
  REQUIRE_THROWS(normals_error(a, b));
}

TEST_CASE("covariance normals and curvature on a plane", "[metrics]") {
  Rng rng(5);
  PointSet plane;
  for (int i = 0; i < 200; ++i) plane.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0});
  const NormalsCurvature est = estimate_normals_curvature(plane, 15);
  for (int i = 0; i < plane.size(); ++i) {
    REQUIRE(std::fabs(std::fabs(est.normals[i].z) - 1.0) < 1e-9);
    REQUIRE(est.curvature[i] < 1e-12);
  }
}

TEST_CASE("sphere curvature is near-constant across points", "[metrics]") {
  PointSet sphere;
  sphere.points = sample_sphere_uniform(2000, 77);
  const NormalsCurvature est = estimate_normals_curvature(sphere, 15);
  double mean = 0.0;
  for (double c : est.curvature) mean += c;
  mean /= est.curvature.size();
  REQUIRE(mean > 0.0);
  double var = 0.0;
  for (double c : est.curvature) var += (c - mean) * (c - mean);
  var /= est.curvature.size();
  const double cv = std::sqrt(var) / mean;
  CAPTURE(mean, cv);
  REQUIRE(cv < 0.3);
  // normals point radially outward on a sphere sample
  for (int i = 0; i < sphere.size(); ++i)
    REQUIRE(dot(est.normals[i], sphere.points[i]) > 0.5);
}

TEST_CASE("estimate_normals_curvature validates k", "[metrics]") {
  PointSet tiny;
  tiny.points = {{0, 0, 0}, {1, 0, 0}};
  REQUIRE_THROWS(estimate_normals_curvature(tiny, 15));
}

TEST_CASE("curvature preservation is zero on identical sets and matches its oracle",
          "[metrics]") {
  Rng rng(6);
  PointSet a, b;
  a.points = sample_sphere_uniform(60, 123);
  b.points = random_points(50, rng);
  REQUIRE(curvature_preservation(a, a) == 0.0);

  const int k = 15;
  const NormalsCurvature ca = estimate_normals_curvature(a, k);
  const NormalsCurvature cb = estimate_normals_curvature(b, k);
  ExactSum t1, t2;
  for (int i = 0; i < a.size(); ++i)
    t1.add(std::fabs(ca.curvature[i] - cb.curvature[nearest_brute(a.points[i], b.points)]));
  for (int j = 0; j < b.size(); ++j)
    t2.add(std::fabs(cb.curvature[j] - ca.curvature[nearest_brute(b.points[j], a.points)]));
  const double expected = t1.result() / a.size() + t2.result() / b.size();
  REQUIRE(curvature_preservation(a, b, k) == expected);
}

TEST_CASE("grid nearest neighbor agrees with brute force incl. ties", "[metrics]") {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vec3> cloud = random_points(150, rng);
    // inject exact duplicates to exercise lowest-index tie-breaking
    cloud[37] = cloud[12];
    cloud[99] = cloud[12];
    NearestNeighborGrid grid(cloud);
    for (const Vec3& q : random_points(200, rng, 1.5)) {
      const int got = grid.nearest(q);
      const int want = nearest_brute(q, cloud);
      const Vec3 dg = cloud[got] - q, dw = cloud[want] - q;
      REQUIRE(dot(dg, dg) == dot(dw, dw));
      REQUIRE(got == want);  // same tie-break: lowest index
    }
    // query exactly on the duplicated point: must return index 12
    REQUIRE(grid.nearest(cloud[12]) == 12);
  }
}

TEST_CASE("mesh vertex normals are outward on convex fixtures", "[metrics]") {
  const Mesh mesh = make_icosphere(2);
  const std::vector<Vec3> normals = mesh_vertex_normals(mesh);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    REQUIRE(std::fabs(norm(normals[v]) - 1.0) < 1e-12);
    REQUIRE(dot(normals[v], mesh.positions[v]) > 0.9);
  }
}
