#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "wrapnet/dataset.hpp"
#include "wrapnet/synthetic.hpp"

using namespace wrapnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("wrapnet_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synthetic dataset items all validate and are normalized", "[synthetic]") {
  const fs::path dir = temp_dir("synth");
  const DatasetManifest manifest = gen_synthetic(dir.string(), 1);
  REQUIRE(manifest.items.size() >= 8);

  for (const DatasetItem& item : manifest.items) {
    for (const std::string& rel : {item.plain_path, item.base_path, item.full_path}) {
      const Mesh mesh = load_dataset_mesh(manifest, rel);
      const ValidationReport report = validate_manifold(mesh);
      CAPTURE(rel, report.violations);
      REQUIRE(report.ok);
      Vec3 centroid{0, 0, 0};
      double max_norm = 0.0;
      for (const Vec3& p : mesh.positions) {
        centroid += p;
        max_norm = std::max(max_norm, norm(p));
      }
      REQUIRE(norm(centroid / mesh.vertex_count()) < 1e-9);
      REQUIRE(max_norm == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("icosphere level 3 has 1280 faces", "[synthetic]") {
  REQUIRE(make_icosphere(3).face_count() == 1280);
  const fs::path dir = temp_dir("synth_counts");
  const DatasetManifest manifest = gen_synthetic(dir.string(), 1);
  const Mesh l3 = load_dataset_mesh(manifest, manifest.find("icosphere_l3").plain_path);
  REQUIRE(l3.face_count() == 1280);
}

TEST_CASE("torus items have genus 1, others genus 0", "[synthetic]") {
  const fs::path dir = temp_dir("synth_genus");
  const DatasetManifest manifest = gen_synthetic(dir.string(), 1);
  for (const DatasetItem& item : manifest.items) {
    const int expected_chi = item.label == "torus" ? 0 : 2;
    for (const std::string& rel : {item.plain_path, item.base_path, item.full_path})
      REQUIRE(euler_characteristic(load_dataset_mesh(manifest, rel)) == expected_chi);
  }
}

TEST_CASE("full meshes share connectivity with their subdivided bases", "[synthetic]") {
  const fs::path dir = temp_dir("synth_pairs");
  const DatasetManifest manifest = gen_synthetic(dir.string(), 1);
  ModelConfig config;
  config.levels = 3;
  config.codeword = 8;
  // prepare_item throws if the pair is inconsistent
  for (const DatasetItem& item : manifest.items) {
    const PreparedMesh prepared = prepare_item(manifest, item, config);
    REQUIRE(prepared.finest.face_count() == prepared.base.face_count() * 64);
  }
}

TEST_CASE("manifest round-trips through its text file", "[synthetic]") {
  const fs::path dir = temp_dir("synth_manifest");
  const DatasetManifest manifest = gen_synthetic(dir.string(), 1);
  const DatasetManifest loaded = load_manifest(dir.string());
  REQUIRE(loaded.items.size() == manifest.items.size());
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    REQUIRE(loaded.items[i].id == manifest.items[i].id);
    REQUIRE(loaded.items[i].label == manifest.items[i].label);
    REQUIRE(loaded.items[i].plain_path == manifest.items[i].plain_path);
  }
  REQUIRE_THROWS(loaded.find("no_such_item"));
}
