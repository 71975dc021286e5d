#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "wrapnet/mesh.hpp"
#include "wrapnet/subdivision.hpp"
#include "wrapnet/synthetic.hpp"

using namespace wrapnet;

TEST_CASE("subdivision counts follow V' = V + E, F' = 4F", "[subdivision]") {
  const SubdivisionMesh tet = loop_subdivide(make_tetrahedron(), 1);
  REQUIRE(tet.topology[1].triangles.size() == 16);
  REQUIRE(tet.topology[1].vertex_count == 10);  // 4 + 6 edges

  const SubdivisionMesh ico = loop_subdivide(make_icosahedron(), 3);
  REQUIRE(ico.topology[3].triangles.size() == 20 * 64);
  for (int l = 0; l < 3; ++l) {
    const int v = ico.topology[l].vertex_count;
    const int e = static_cast<int>(ico.topology[l].edges.size());
    REQUIRE(ico.topology[l + 1].vertex_count == v + e);
    REQUIRE(ico.topology[l + 1].triangles.size() == 4 * ico.topology[l].triangles.size());
  }
}

TEST_CASE("midpoint refinement preserves total area and every level is manifold",
          "[subdivision]") {
  const SubdivisionMesh hier = loop_subdivide(make_icosahedron(), 2);
  double areas[3];
  for (int l = 0; l <= 2; ++l) {
    const Mesh level = mesh_at_level(hier, l);
    REQUIRE(validate_manifold(level).ok);
    ExactSum acc;
    for (double a : face_geometry(level).areas) acc.add(a);
    areas[l] = acc.result();
  }
  REQUIRE(areas[1] == Catch::Approx(areas[0]).epsilon(1e-12));
  REQUIRE(areas[2] == Catch::Approx(areas[0]).epsilon(1e-12));
}

TEST_CASE("new vertices sit exactly on edge midpoints", "[subdivision]") {
  const Mesh base = make_tetrahedron();
  const SubdivisionMesh hier = loop_subdivide(base, 1);
  const auto& edges = hier.topology[0].edges;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Vec3 expected = (base.positions[edges[e][0]] + base.positions[edges[e][1]]) * 0.5;
    REQUIRE(norm(hier.positions[1][base.vertex_count() + e] - expected) == 0.0);
  }
}

TEST_CASE("euler characteristic is constant across levels", "[subdivision]") {
  for (auto [mesh, chi] : {std::pair<Mesh, int>{make_icosahedron(), 2},
                           std::pair<Mesh, int>{make_torus(6, 6, 0.7, 0.3), 0}}) {
    const SubdivisionMesh hier = loop_subdivide(mesh, 2);
    for (int l = 0; l <= 2; ++l) REQUIRE(euler_characteristic(mesh_at_level(hier, l)) == chi);
  }
}

TEST_CASE("pooling averages the four children", "[subdivision]") {
  const SubdivisionMesh tet = loop_subdivide(make_tetrahedron(), 1);
  const int children = static_cast<int>(tet.topology[1].triangles.size());

  std::vector<double> constant(children, 3.25);
  for (double v : pool_faces(constant, 1, tet.topology[0])) REQUIRE(v == 3.25);

  std::vector<double> feats(children, 0.0);
  const auto& kids = tet.topology[0].child_faces[2];
  feats[kids[3]] = 4.0;  // children (0,0,0,4) -> parent 1
  const auto pooled = pool_faces(feats, 1, tet.topology[0]);
  REQUIRE(pooled[2] == 1.0);
  REQUIRE(pooled[0] == 0.0);

  // broadcast then pool is the identity
  std::vector<double> parent_map(tet.topology[0].triangles.size() * 2);
  for (std::size_t i = 0; i < parent_map.size(); ++i) parent_map[i] = 0.5 * i - 3.0;
  std::vector<double> broadcast(children * 2);
  for (std::size_t f = 0; f < tet.topology[0].triangles.size(); ++f)
    for (int k = 0; k < 4; ++k)
      for (int c = 0; c < 2; ++c)
        broadcast[static_cast<std::size_t>(tet.topology[0].child_faces[f][k]) * 2 + c] =
            parent_map[f * 2 + c];
  REQUIRE(pool_faces(broadcast, 2, tet.topology[0]) == parent_map);

  REQUIRE_THROWS(pool_faces(std::vector<double>(children * 2 + 1), 2, tet.topology[0]));
}

TEST_CASE("child map recovers the parent face list exactly", "[subdivision]") {
  const SubdivisionMesh hier = loop_subdivide(make_icosahedron(), 2);
  for (int l = 0; l < 2; ++l) {
    const auto& parents = hier.topology[l].triangles;
    const auto& children = hier.topology[l + 1].triangles;
    const auto& child_map = hier.topology[l].child_faces;
    for (std::size_t f = 0; f < parents.size(); ++f) {
      // corner child k leads with parent corner k
      for (int k = 0; k < 3; ++k) REQUIRE(children[child_map[f][k]][0] == parents[f][k]);
      // the center child is composed of the three midpoints shared with the
      // corner children
      const Tri& center = children[child_map[f][3]];
      const Tri& c0 = children[child_map[f][0]];
      REQUIRE(center[0] == c0[1]);
      REQUIRE(center[2] == c0[2]);
    }
  }
}

TEST_CASE("subdivision indexing is permutation equivariant", "[subdivision]") {
  const Mesh base = make_icosahedron();
  Rng rng(23);
  const auto vp = random_permutation(base.vertex_count(), rng);
  const auto fp = random_permutation(base.face_count(), rng);
  const Mesh moved = permute(base, vp, fp);

  const SubdivisionMesh h1 = loop_subdivide(base, 2);
  const SubdivisionMesh h2 = loop_subdivide(moved, 2);

  // The induced vertex correspondence at each level maps positions exactly.
  const std::vector<int> lifted = lift_matching(vp, h1, h2, 2);
  REQUIRE(static_cast<int>(lifted.size()) == h1.topology[2].vertex_count);
  for (std::size_t v = 0; v < lifted.size(); ++v)
    REQUIRE(h1.positions[2][v] == h2.positions[2][lifted[v]]);
}

TEST_CASE("lift_matching level 0 is sigma itself and identity lifts to identity",
          "[subdivision]") {
  const Mesh tet = make_tetrahedron();
  const SubdivisionMesh hier = loop_subdivide(tet, 2);
  const std::vector<int> ident = identity_permutation(tet.vertex_count());
  REQUIRE(lift_matching(ident, hier, hier, 0) == ident);
  for (int level = 1; level <= 2; ++level) {
    const std::vector<int> lifted = lift_matching(ident, hier, hier, level);
    REQUIRE(lifted == identity_permutation(hier.topology[level].vertex_count));
  }
}

TEST_CASE("lift_matching tracks midpoints through a 4-cycle", "[subdivision]") {
  const Mesh tet = make_tetrahedron();
  const std::vector<int> cycle = {1, 2, 3, 0};
  const Mesh moved = permute(tet, cycle, identity_permutation(tet.face_count()));
  const SubdivisionMesh src = loop_subdivide(tet, 1);
  const SubdivisionMesh dst = loop_subdivide(moved, 1);
  const std::vector<int> lifted = lift_matching(cycle, src, dst, 1);

  // Oracle: track each midpoint by its defining edge pair.
  std::map<std::array<int, 2>, int> dst_mid;
  for (std::size_t e = 0; e < dst.topology[0].edges.size(); ++e)
    dst_mid[dst.topology[0].edges[e]] = dst.topology[0].vertex_count + static_cast<int>(e);
  for (std::size_t e = 0; e < src.topology[0].edges.size(); ++e) {
    const int a = cycle[src.topology[0].edges[e][0]], b = cycle[src.topology[0].edges[e][1]];
    const int expected = dst_mid.at({std::min(a, b), std::max(a, b)});
    REQUIRE(lifted[src.topology[0].vertex_count + e] == expected);
  }
}

TEST_CASE("lift_matching validates its inputs", "[subdivision]") {
  const SubdivisionMesh hier = loop_subdivide(make_tetrahedron(), 1);
  REQUIRE_THROWS(lift_matching(identity_permutation(4), hier, hier, 2));   // level > L
  REQUIRE_THROWS(lift_matching(identity_permutation(3), hier, hier, 1));   // wrong size
}

TEST_CASE("loop_subdivide rejects non-manifold input", "[subdivision]") {
  Mesh open_fan;
  open_fan.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  open_fan.triangles = {{0, 1, 2}, {1, 3, 2}};
  REQUIRE_THROWS(loop_subdivide(open_fan, 1));
  REQUIRE_THROWS(loop_subdivide(make_tetrahedron(), -1));
}
