// model.hpp - the end-to-end mesh autoencoder.
//
// Encoder: a face feature extractor (4 face convolutions, Loop pooling
// interleaved when the model runs on subdivision hierarchies) feeds a shared
// MLP and a global mean pool that emits a fixed-length codeword. In
// parallel, an unwrap deformation block drives the (base) mesh toward a unit
// sphere; its vertices are matched injectively onto a fixed Fibonacci sphere
// grid and the connectivity, relabeled into grid order, becomes the base
// graph that crosses the bottleneck.
//
// Decoder: the base graph plus the grid positions form an initial sphere
// mesh, which a codeword-conditioned deformation block wraps into the
// reconstruction; with subdivision enabled a second stage interleaves three
// midpoint subdivisions with further deformation layers.
//
// Training: vertex-to-vertex MSE (aligned through the matching) trains the
// decoder and the encoder's codeword branch; the unwrap block is supervised
// only by a Chamfer loss against random unit-sphere samples. The decoder's
// input positions are constants by construction, so no MSE gradient can
// reach the unwrap parameters.
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrapnet/assignment.hpp"
#include "wrapnet/autodiff.hpp"
#include "wrapnet/config.hpp"
#include "wrapnet/layers.hpp"
#include "wrapnet/mesh.hpp"
#include "wrapnet/metrics.hpp"
#include "wrapnet/nn.hpp"
#include "wrapnet/numeric.hpp"
#include "wrapnet/sphere.hpp"
#include "wrapnet/subdivision.hpp"

namespace wrapnet {

enum class BottleneckMode { SendBaseGraph, SendApproxSphere, SendBaseMesh };

inline std::string to_string(BottleneckMode mode) {
  switch (mode) {
    case BottleneckMode::SendBaseGraph: return "send_base_graph";
    case BottleneckMode::SendApproxSphere: return "send_approx_sphere";
    case BottleneckMode::SendBaseMesh: return "send_base_mesh";
  }
  throw std::runtime_error("bad bottleneck mode");
}

inline BottleneckMode bottleneck_mode_from_string(const std::string& s) {
  if (s == "send_base_graph") return BottleneckMode::SendBaseGraph;
  if (s == "send_approx_sphere") return BottleneckMode::SendApproxSphere;
  if (s == "send_base_mesh") return BottleneckMode::SendBaseMesh;
  throw std::runtime_error("unknown bottleneck mode: " + s);
}

inline std::string to_string(GridVariant v) {
  return v == GridVariant::AsWritten ? "as_written" : "full_sphere";
}

inline GridVariant grid_variant_from_string(const std::string& s) {
  if (s == "as_written") return GridVariant::AsWritten;
  if (s == "full_sphere") return GridVariant::FullSphere;
  throw std::runtime_error("unknown grid variant: " + s);
}

struct ModelConfig {
  int codeword = 512;
  int fe_hidden = 128;       // face-conv hidden width in the feature extractor
  int fe_out = 1024;         // face feature width entering the shared MLP
  int mlp_hidden = 1024;
  int mlp_hidden_layers = 4;
  int unwrap_hidden = 64;    // encoder deformation block width
  int wrap_hidden = 128;     // decoder deformation block width
  int block_pairs = 2;       // conv+face2node pairs per deformation block
  int levels = 0;            // 0 = vanilla, 3 = subdivision hierarchy
  int grid_size = 0;         // 0 = derive from dataset at ingest
  GridVariant grid_variant = GridVariant::FullSphere;
  BottleneckMode mode = BottleneckMode::SendBaseGraph;
  double lr = 5e-5;
  std::uint64_t seed = 1;
  int chamfer_samples = 0;   // 0 = vertex count of the unwrap output

  void to_kv(KeyValueMap& kv) const {
    kv.set("codeword", codeword);
    kv.set("fe_hidden", fe_hidden);
    kv.set("fe_out", fe_out);
    kv.set("mlp_hidden", mlp_hidden);
    kv.set("mlp_hidden_layers", mlp_hidden_layers);
    kv.set("unwrap_hidden", unwrap_hidden);
    kv.set("wrap_hidden", wrap_hidden);
    kv.set("block_pairs", block_pairs);
    kv.set("levels", levels);
    kv.set("grid_size", grid_size);
    kv.set("grid_variant", to_string(grid_variant));
    kv.set("mode", to_string(mode));
    kv.set("lr", lr);
    kv.set("seed", seed);
    kv.set("chamfer_samples", chamfer_samples);
  }

  static ModelConfig from_kv(const KeyValueMap& kv) {
    ModelConfig c;
    auto geti = [&](const char* k, int& slot) {
      if (kv.contains(k)) slot = static_cast<int>(kv.get_int(k));
    };
    geti("codeword", c.codeword);
    geti("fe_hidden", c.fe_hidden);
    geti("fe_out", c.fe_out);
    geti("mlp_hidden", c.mlp_hidden);
    geti("mlp_hidden_layers", c.mlp_hidden_layers);
    geti("unwrap_hidden", c.unwrap_hidden);
    geti("wrap_hidden", c.wrap_hidden);
    geti("block_pairs", c.block_pairs);
    geti("levels", c.levels);
    geti("grid_size", c.grid_size);
    if (kv.contains("grid_variant")) c.grid_variant = grid_variant_from_string(kv.get("grid_variant"));
    if (kv.contains("mode")) c.mode = bottleneck_mode_from_string(kv.get("mode"));
    if (kv.contains("lr")) c.lr = kv.get_double("lr");
    if (kv.contains("seed")) c.seed = kv.get_u64("seed");
    geti("chamfer_samples", c.chamfer_samples);
    return c;
  }

  void validate() const {
    if (codeword < 1 || fe_hidden < 1 || fe_out < 1 || mlp_hidden < 1 || mlp_hidden_layers < 1 ||
        unwrap_hidden < 1 || wrap_hidden < 1 || block_pairs < 1)
      throw std::runtime_error("model config: widths must be positive");
    if (levels != 0 && levels != 3)
      throw std::runtime_error("model config: levels must be 0 (vanilla) or 3 (subdivision)");
    if (grid_size != 0 && grid_size < 2) throw std::runtime_error("model config: grid too small");
  }
};

// --- parameters ----------------------------------------------------------------

struct WrapNetParams {
  ModelConfig config;
  ParamStore store;
  std::vector<FaceConvParams> fe_convs;  // 7 -> h -> h -> h -> fe_out
  MlpParams shared_mlp;                  // fe_out -> hidden^layers -> codeword
  DeformationBlockParams unwrap;         // absent in SendBaseMesh mode
  bool has_unwrap = false;
  DeformationBlockParams wrap1;                 // (7 + codeword) -> wrap_hidden
  std::vector<DeformationBlockParams> wrap2;    // one pair per subdivision level

  std::vector<Param*> bottom_group;  // FE + shared MLP (codeword branch)
  std::vector<Param*> unwrap_group;
  std::vector<Param*> wrap_group;
};

inline WrapNetParams make_params(const ModelConfig& config) {
  config.validate();
  WrapNetParams params;
  params.config = config;
  Rng rng(Rng::derive(config.seed, 0x706172616d73ULL));

  const int fe_widths[5] = {7, config.fe_hidden, config.fe_hidden, config.fe_hidden, config.fe_out};
  for (int k = 0; k < 4; ++k)
    params.fe_convs.push_back(make_face_conv(params.store, "fe.conv" + std::to_string(k),
                                             fe_widths[k], fe_widths[k + 1], rng));
  std::vector<int> mlp_widths;
  mlp_widths.push_back(config.fe_out);
  for (int l = 0; l < config.mlp_hidden_layers; ++l) mlp_widths.push_back(config.mlp_hidden);
  mlp_widths.push_back(config.codeword);
  params.shared_mlp = make_mlp(params.store, "fe.mlp", mlp_widths, rng);

  if (config.mode != BottleneckMode::SendBaseMesh) {
    params.unwrap = make_deformation_block(params.store, "unwrap", 7, config.unwrap_hidden,
                                           config.block_pairs, 0, rng);
    params.has_unwrap = true;
  }

  const int wrap1_out = config.levels > 0 ? config.wrap_hidden : 0;
  params.wrap1 = make_deformation_block(params.store, "wrap1", 7 + config.codeword,
                                        config.wrap_hidden, config.block_pairs, wrap1_out, rng);
  for (int l = 0; l < config.levels; ++l) {
    const int out = l + 1 == config.levels ? 0 : config.wrap_hidden;
    params.wrap2.push_back(make_deformation_block(params.store, "wrap2.l" + std::to_string(l),
                                                  config.wrap_hidden, config.wrap_hidden, 1, out,
                                                  rng));
  }

  for (const auto& conv : params.fe_convs) collect(params.bottom_group, conv);
  collect(params.bottom_group, params.shared_mlp);
  if (params.has_unwrap) collect(params.unwrap_group, params.unwrap);
  collect(params.wrap_group, params.wrap1);
  for (const auto& block : params.wrap2) collect(params.wrap_group, block);
  return params;
}

// --- prepared inputs -------------------------------------------------------------

// A dataset mesh with every connectivity-derived index structure the model
// needs, computed once.
struct PreparedMesh {
  std::string id;
  std::string label;
  int levels = 0;
  Mesh base;    // matching-level mesh (equals finest when levels == 0)
  Mesh finest;  // supervision target and FE input
  SubdivisionMesh hierarchy;  // populated when levels > 0

  std::vector<double> fe_features;      // finest-level 7-dim face features
  std::vector<double> unwrap_features;  // base-level 7-dim face features
  std::vector<FaceNeighborIndex> fe_neighbors;  // per FE conv, finest -> base
  std::vector<std::vector<std::array<int, 4>>> fe_child_maps;  // pooling steps
  MeshGraphContext base_ctx;

  PreparedMesh(std::string id_, std::string label_, Mesh plain)
      : id(std::move(id_)), label(std::move(label_)), levels(0), base(std::move(plain)),
        finest(base), base_ctx(base) {
    const FaceAdjacency adj = build_face_adjacency(finest);
    fe_features = init_face_features(finest, adj);
    unwrap_features = fe_features;
    fe_neighbors.assign(4, FaceNeighborIndex(adj));
  }

  PreparedMesh(std::string id_, std::string label_, const Mesh& base_mesh, const Mesh& full_mesh,
               int levels_)
      : id(std::move(id_)), label(std::move(label_)), levels(levels_), base(base_mesh),
        hierarchy(loop_subdivide(base_mesh, levels_)), base_ctx(base_mesh) {
    if (full_mesh.triangles != hierarchy.at(levels_).triangles)
      throw std::runtime_error(id + ": full mesh connectivity does not match the subdivided base");
    hierarchy.positions[levels_] = full_mesh.positions;
    finest = full_mesh;
    fe_features = init_face_features(finest, build_face_adjacency(finest));
    unwrap_features = init_face_features(base, build_face_adjacency(base));
    // FE convolution k runs at level (levels - k); pooling follows convs 0..levels-1.
    for (int l = levels_; l >= 0; --l) {
      fe_neighbors.emplace_back(build_face_adjacency_topological(hierarchy.at(l).triangles));
      if (l > 0) fe_child_maps.push_back(hierarchy.topology[l - 1].child_faces);
    }
  }

  static FaceAdjacency build_face_adjacency_topological(const std::vector<Tri>& triangles) {
    Mesh shell;
    int max_v = 0;
    for (const Tri& t : triangles) max_v = std::max({max_v, t[0], t[1], t[2]});
    shell.positions.assign(max_v + 1, Vec3{});
    shell.triangles = triangles;
    return build_face_adjacency(shell);
  }
};

// --- bottleneck -------------------------------------------------------------------

struct BottleneckPayload {
  std::vector<double> codeword;
  std::vector<Tri> base_graph;  // triangles over grid indices, canonical order
  int grid_size = 0;
  GridVariant grid_variant = GridVariant::FullSphere;
  std::vector<int> sigma;  // matching map, training side; empty without matching
  // Ablation modes ship explicit vertex positions instead of grid indexing.
  BottleneckMode mode = BottleneckMode::SendBaseGraph;
  std::vector<Vec3> carrier_positions;  // SendApproxSphere / SendBaseMesh only
};

// Canonical form: rotate each triangle so its smallest vertex leads
// (orientation preserved), then sort rows. Permuting the input mesh then
// leaves the base graph untouched.
inline std::vector<Tri> canonicalize_triangles(std::vector<Tri> triangles) {
  for (Tri& t : triangles) {
    int lead = 0;
    for (int k = 1; k < 3; ++k)
      if (t[k] < t[lead]) lead = k;
    t = {t[lead], t[(lead + 1) % 3], t[(lead + 2) % 3]};
  }
  std::sort(triangles.begin(), triangles.end());
  return triangles;
}

inline std::vector<Tri> relabel_triangles(const std::vector<Tri>& triangles,
                                          std::span<const int> vertex_map) {
  std::vector<Tri> out(triangles.size());
  for (std::size_t f = 0; f < triangles.size(); ++f)
    out[f] = {vertex_map[triangles[f][0]], vertex_map[triangles[f][1]],
              vertex_map[triangles[f][2]]};
  return out;
}

// --- forward passes ----------------------------------------------------------------

struct EncodeResult {
  Tensor codeword;           // 1 x codeword
  Tensor approx_sphere;      // base-vertex x 3 unwrap output (when present)
  bool has_unwrap = false;
  BottleneckPayload payload;
};

namespace detail {

inline std::vector<double> flatten(std::span<const Vec3> points) {
  std::vector<double> flat(points.size() * 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    flat[3 * i] = points[i].x;
    flat[3 * i + 1] = points[i].y;
    flat[3 * i + 2] = points[i].z;
  }
  return flat;
}

inline Tensor fe_codeword(Tape& tape, ParamBinding& bind, const PreparedMesh& mesh,
                          const WrapNetParams& params) {
  const int m = mesh.finest.face_count();
  Tensor h = tape.constant({m, 7}, mesh.fe_features);
  for (std::size_t k = 0; k < params.fe_convs.size(); ++k) {
    h = face_conv(tape, bind, h, mesh.fe_neighbors[k], params.fe_convs[k]);
    if (k + 1 < params.fe_convs.size()) h = tape.relu(h);
    if (k < mesh.fe_child_maps.size()) h = tape.pool_children(h, mesh.fe_child_maps[k]);
  }
  Tensor z = mlp_forward(tape, bind, h, params.shared_mlp);
  return global_mean_pool(tape, z);
}

inline Tensor unwrap_forward(Tape& tape, ParamBinding& bind, const PreparedMesh& mesh,
                             const WrapNetParams& params) {
  Tensor pos = tape.constant({mesh.base.vertex_count(), 3}, flatten(mesh.base.positions));
  Tensor feats = tape.constant({mesh.base.face_count(), 7}, mesh.unwrap_features);
  return deformation_block_forward(tape, bind, pos, feats, mesh.base_ctx, params.unwrap).positions;
}

inline std::vector<Vec3> tensor_to_points(Tensor t) {
  auto v = t.value();
  std::vector<Vec3> pts(t.rows());
  for (int i = 0; i < t.rows(); ++i) pts[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return pts;
}

}  // namespace detail

inline EncodeResult encode_forward(Tape& tape, ParamBinding& bind, const PreparedMesh& mesh,
                                   const WrapNetParams& params, const SphereGrid& grid) {
  const ModelConfig& config = params.config;
  EncodeResult out;
  out.codeword = detail::fe_codeword(tape, bind, mesh, params);
  out.payload.codeword.assign(out.codeword.value().begin(), out.codeword.value().end());
  out.payload.grid_size = grid.size();
  out.payload.grid_variant = config.grid_variant;
  out.payload.mode = config.mode;

  switch (config.mode) {
    case BottleneckMode::SendBaseGraph: {
      if (mesh.base.vertex_count() > grid.size())
        throw std::runtime_error("encode: mesh has more vertices than the sphere grid (" +
                                 std::to_string(mesh.base.vertex_count()) + " > " +
                                 std::to_string(grid.size()) + ")");
      out.approx_sphere = detail::unwrap_forward(tape, bind, mesh, params);
      out.has_unwrap = true;
      const std::vector<Vec3> unwrapped = detail::tensor_to_points(out.approx_sphere);
      // The matching is discrete: sigma is a constant of the forward pass.
      out.payload.sigma = match_to_sphere_grid(unwrapped, grid).sigma;
      out.payload.base_graph =
          canonicalize_triangles(relabel_triangles(mesh.base.triangles, out.payload.sigma));
      break;
    }
    case BottleneckMode::SendApproxSphere: {
      out.approx_sphere = detail::unwrap_forward(tape, bind, mesh, params);
      out.has_unwrap = true;
      out.payload.base_graph = mesh.base.triangles;
      out.payload.carrier_positions = detail::tensor_to_points(out.approx_sphere);
      break;
    }
    case BottleneckMode::SendBaseMesh: {
      out.payload.base_graph = mesh.base.triangles;
      out.payload.carrier_positions = mesh.base.positions;
      break;
    }
  }
  return out;
}

struct DecodeResult {
  Tensor positions;  // finest-level output positions
  Mesh mesh;         // value-level reconstruction
  Mesh initial;      // decoder-side base mesh (sphere mesh in the full pipeline)
  SubdivisionMesh hierarchy;      // decoder-side hierarchy (levels > 0)
  std::vector<int> grid_to_base;  // grid index -> decoder base vertex (SendBaseGraph)
};

inline DecodeResult decode_forward(Tape& tape, ParamBinding& bind,
                                   const BottleneckPayload& payload, const WrapNetParams& params,
                                   const SphereGrid& grid, bool validate_inputs) {
  const ModelConfig& config = params.config;
  if (static_cast<int>(payload.codeword.size()) != config.codeword)
    throw std::runtime_error("decode: codeword length mismatch");

  DecodeResult out;
  Mesh initial;
  if (payload.mode == BottleneckMode::SendBaseGraph) {
    // Distinct referenced grid indices, ascending, become the vertex list.
    std::vector<int> used;
    for (const Tri& t : payload.base_graph)
      for (int k = 0; k < 3; ++k) {
        if (t[k] < 0) throw std::runtime_error("decode: negative grid index in base graph");
        if (t[k] >= grid.size())
          throw std::runtime_error("decode: base graph references grid index beyond the grid");
        used.push_back(t[k]);
      }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    out.grid_to_base.assign(grid.size(), -1);
    for (int i = 0; i < static_cast<int>(used.size()); ++i) out.grid_to_base[used[i]] = i;
    initial.positions.resize(used.size());
    for (std::size_t i = 0; i < used.size(); ++i) initial.positions[i] = grid.points[used[i]];
    initial.triangles = relabel_triangles(payload.base_graph, out.grid_to_base);
  } else {
    if (payload.carrier_positions.empty())
      throw std::runtime_error("decode: payload carries no vertex positions for this mode");
    initial.positions = payload.carrier_positions;
    initial.triangles = payload.base_graph;
  }
  if (validate_inputs) {
    ValidationReport report = validate_manifold(initial);
    if (!report.ok)
      throw std::runtime_error("decode: base graph is not a closed manifold: " +
                               report.violations.front());
  }
  out.initial = initial;

  MeshGraphContext ctx(initial);
  Tensor pos = tape.constant({initial.vertex_count(), 3}, detail::flatten(initial.positions));
  Tensor feats =
      tape.constant({initial.face_count(), 7},
                    init_face_features(initial, build_face_adjacency(initial)));
  Tensor code = tape.constant({1, config.codeword}, payload.codeword);
  DeformationResult stage1 =
      deformation_block_forward(tape, bind, pos, feats, ctx, params.wrap1, code);
  pos = stage1.positions;

  if (config.levels > 0) {
    out.hierarchy = loop_subdivide(initial, config.levels);
    Tensor level_feats = stage1.features;
    for (int l = 0; l < config.levels; ++l) {
      const LevelTopology& topo = out.hierarchy.topology[l];
      // Midpoint unpooling of positions, parent-broadcast unpooling of features.
      std::vector<int> end_a(topo.edges.size()), end_b(topo.edges.size());
      for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        end_a[e] = topo.edges[e][0];
        end_b[e] = topo.edges[e][1];
      }
      Tensor mids = tape.scale(
          tape.add(tape.gather_rows(pos, end_a), tape.gather_rows(pos, end_b)), 0.5);
      pos = tape.concat_rows({pos, mids});
      std::vector<int> parent_of(topo.child_faces.size() * 4);
      for (std::size_t f = 0; f < topo.child_faces.size(); ++f)
        for (int k = 0; k < 4; ++k) parent_of[topo.child_faces[f][k]] = static_cast<int>(f);
      level_feats = tape.gather_rows(level_feats, parent_of);

      Mesh shell;
      shell.positions.assign(out.hierarchy.at(l + 1).vertex_count, Vec3{});
      shell.triangles = out.hierarchy.at(l + 1).triangles;
      MeshGraphContext level_ctx(shell, PreparedMesh::build_face_adjacency_topological(
                                            shell.triangles));
      DeformationResult stage2 = deformation_block_forward(tape, bind, pos, level_feats, level_ctx,
                                                           params.wrap2[l]);
      pos = stage2.positions;
      if (stage2.has_features) level_feats = stage2.features;
    }
  }

  out.positions = pos;
  out.mesh.positions = detail::tensor_to_points(pos);
  out.mesh.triangles =
      config.levels > 0 ? out.hierarchy.at(config.levels).triangles : initial.triangles;
  return out;
}

// --- losses -----------------------------------------------------------------------

// align[i] = row of the decoded positions holding input vertex i.
inline std::vector<int> build_alignment(const PreparedMesh& mesh, const BottleneckPayload& payload,
                                        const DecodeResult& decoded) {
  if (payload.mode != BottleneckMode::SendBaseGraph) {
    return identity_permutation(mesh.finest.vertex_count());
  }
  std::vector<int> base_align(mesh.base.vertex_count());
  for (int v = 0; v < mesh.base.vertex_count(); ++v) {
    const int g = payload.sigma[v];
    const int compact = decoded.grid_to_base[g];
    if (compact < 0) throw std::runtime_error("alignment: matched grid index unused by base graph");
    base_align[v] = compact;
  }
  if (mesh.levels == 0) return base_align;
  return lift_matching(base_align, mesh.hierarchy, decoded.hierarchy, mesh.levels);
}

inline Tensor reconstruction_loss(Tape& tape, Tensor decoded_positions,
                                  const Mesh& target_finest, std::span<const int> align) {
  if (static_cast<int>(align.size()) != target_finest.vertex_count())
    throw std::runtime_error("reconstruction_loss: alignment size mismatch");
  Tensor aligned = tape.gather_rows(decoded_positions, align);
  Tensor target =
      tape.constant({target_finest.vertex_count(), 3}, detail::flatten(target_finest.positions));
  Tensor diff = tape.sub(aligned, target);
  return tape.mean_all(tape.mul(diff, diff));
}

// Value-level counterpart used by tests and metrics tooling.
inline double reconstruction_mse(const Mesh& target, const Mesh& decoded,
                                 std::span<const int> align) {
  if (static_cast<int>(align.size()) != target.vertex_count())
    throw std::runtime_error("reconstruction_mse: alignment size mismatch");
  ExactSum acc;
  for (int v = 0; v < target.vertex_count(); ++v) {
    const Vec3 d = target.positions[v] - decoded.positions[align[v]];
    acc.add(d.x * d.x);
    acc.add(d.y * d.y);
    acc.add(d.z * d.z);
  }
  return acc.result() / (3.0 * target.vertex_count());
}

// Chamfer between the (tape-resident) unwrap output and fixed sphere samples.
// Nearest neighbors are recomputed from current values and differentiated at
// fixed indices.
inline Tensor sphere_chamfer_loss(Tape& tape, Tensor unwrapped,
                                  std::span<const Vec3> samples) {
  const int n = unwrapped.rows();
  const int k = static_cast<int>(samples.size());
  if (k < 1) throw std::runtime_error("sphere_chamfer_loss: no samples");
  const std::vector<Vec3> points = detail::tensor_to_points(unwrapped);

  const std::vector<int> to_sample = nearest_indices(points, samples);
  const std::vector<int> to_point = nearest_indices(samples, points);

  std::vector<double> matched_samples(static_cast<std::size_t>(n) * 3);
  for (int i = 0; i < n; ++i) {
    const Vec3& s = samples[to_sample[i]];
    matched_samples[3 * i] = s.x;
    matched_samples[3 * i + 1] = s.y;
    matched_samples[3 * i + 2] = s.z;
  }
  Tensor diff1 = tape.sub(unwrapped, tape.constant({n, 3}, matched_samples));
  Tensor term1 = tape.scale(tape.sum_all(tape.mul(diff1, diff1)), 1.0 / n);

  std::vector<double> flat_samples(static_cast<std::size_t>(k) * 3);
  for (int j = 0; j < k; ++j) {
    flat_samples[3 * j] = samples[j].x;
    flat_samples[3 * j + 1] = samples[j].y;
    flat_samples[3 * j + 2] = samples[j].z;
  }
  Tensor diff2 = tape.sub(tape.gather_rows(unwrapped, to_point),
                          tape.constant({k, 3}, flat_samples));
  Tensor term2 = tape.scale(tape.sum_all(tape.mul(diff2, diff2)), 1.0 / k);
  return tape.add(term1, term2);
}

// --- training ----------------------------------------------------------------------

struct AdamGroups {
  AdamState bottom, unwrap, wrap;
};

struct StepStats {
  double mse = 0.0;      // mean over batch
  double chamfer = 0.0;  // mean over batch (0 when no unwrap)
};

#ifndef NDEBUG
namespace detail {
// All intermediate meshes share one connectivity up to the matching relabel.
inline void assert_shared_connectivity(const PreparedMesh& mesh, const BottleneckPayload& payload,
                                       const DecodeResult& decoded) {
  if (payload.mode != BottleneckMode::SendBaseGraph) return;
  std::vector<int> to_base(payload.sigma.size());
  for (std::size_t v = 0; v < payload.sigma.size(); ++v)
    to_base[v] = decoded.grid_to_base[payload.sigma[v]];
  assert(canonicalize_triangles(relabel_triangles(mesh.base.triangles, to_base)) ==
         canonicalize_triangles(decoded.initial.triangles));
}
}  // namespace detail
#endif

inline int chamfer_sample_count(const ModelConfig& config, const PreparedMesh& mesh) {
  return config.chamfer_samples > 0 ? config.chamfer_samples : mesh.base.vertex_count();
}

inline std::uint64_t step_sample_seed(const ModelConfig& config, std::int64_t step,
                                      std::size_t mesh_index) {
  return Rng::derive(Rng::derive(config.seed, 0x6368616d666572ULL),
                     static_cast<std::uint64_t>(step) * 8191 + mesh_index);
}

// One joint optimization step over a loose batch: per-mesh forward/backward,
// gradients accumulated, then one Adam step per parameter group. The MSE
// trains the decoder and codeword branch; the Chamfer term alone trains the
// unwrap block.
inline StepStats train_step(std::span<const PreparedMesh> batch, WrapNetParams& params,
                            AdamGroups& adam, const SphereGrid& grid, std::int64_t step_index,
                            const AdamConfig* adam_override = nullptr) {
  if (batch.empty()) throw std::runtime_error("train_step: empty batch");
  params.store.zero_grad();
  StepStats stats;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const PreparedMesh& mesh = batch[b];
    Tape tape;
    ParamBinding bind(tape);
    EncodeResult enc = encode_forward(tape, bind, mesh, params, grid);
    DecodeResult dec = decode_forward(tape, bind, enc.payload, params, grid, false);
#ifndef NDEBUG
    detail::assert_shared_connectivity(mesh, enc.payload, dec);
#endif
    const std::vector<int> align = build_alignment(mesh, enc.payload, dec);
    Tensor mse = reconstruction_loss(tape, dec.positions, mesh.finest, align);
    Tensor total = mse;
    double chamfer_value = 0.0;
    if (enc.has_unwrap) {
      const int k = chamfer_sample_count(params.config, mesh);
      const std::vector<Vec3> samples =
          sample_sphere_uniform(k, step_sample_seed(params.config, step_index, b));
      Tensor chamfer_term = sphere_chamfer_loss(tape, enc.approx_sphere, samples);
      chamfer_value = chamfer_term.scalar();
      total = tape.add(mse, chamfer_term);
    }
    if (!std::isfinite(total.scalar()))
      throw std::runtime_error("train_step: non-finite loss (mse=" + std::to_string(mse.scalar()) +
                               " chamfer=" + std::to_string(chamfer_value) + "), step aborted");
    tape.backward(total);
    bind.accumulate_grads();
    stats.mse += mse.scalar();
    stats.chamfer += chamfer_value;
  }
  stats.mse /= static_cast<double>(batch.size());
  stats.chamfer /= static_cast<double>(batch.size());

  AdamConfig cfg;
  cfg.lr = params.config.lr;
  if (adam_override) cfg = *adam_override;
  adam_step(params.bottom_group, adam.bottom, cfg);
  if (params.has_unwrap) adam_step(params.unwrap_group, adam.unwrap, cfg);
  adam_step(params.wrap_group, adam.wrap, cfg);
  return stats;
}

// Chamfer-only optimization of the unwrap block; all other parameters stay
// untouched. Returns the last step's mean Chamfer.
inline double pretrain_unwrap(std::span<const PreparedMesh> batch, WrapNetParams& params,
                              AdamGroups& adam, int steps,
                              const std::function<void(int, double)>& on_step = {}) {
  if (!params.has_unwrap) return 0.0;  // nothing to pretrain in SendBaseMesh mode
  double last = 0.0;
  for (int s = 0; s < steps; ++s) {
    params.store.zero_grad();
    double mean_chamfer = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const PreparedMesh& mesh = batch[b];
      Tape tape;
      ParamBinding bind(tape);
      Tensor unwrapped = detail::unwrap_forward(tape, bind, mesh, params);
      const int k = chamfer_sample_count(params.config, mesh);
      const std::vector<Vec3> samples =
          sample_sphere_uniform(k, step_sample_seed(params.config, s, b) ^ 0x70726574ULL);
      Tensor loss = sphere_chamfer_loss(tape, unwrapped, samples);
      if (!std::isfinite(loss.scalar()))
        throw std::runtime_error("pretrain_unwrap: non-finite loss, step aborted");
      tape.backward(loss);
      bind.accumulate_grads();
      mean_chamfer += loss.scalar();
    }
    mean_chamfer /= static_cast<double>(batch.size());
    AdamConfig cfg;
    cfg.lr = params.config.lr;
    adam_step(params.unwrap_group, adam.unwrap, cfg);
    last = mean_chamfer;
    if (on_step) on_step(s, mean_chamfer);
  }
  return last;
}

// Mean |  |x| - 1 | of the unwrap output over a batch; pretraining health gauge.
inline double mean_unwrap_norm_deviation(std::span<const PreparedMesh> batch,
                                         WrapNetParams& params) {
  ExactSum acc;
  std::size_t count = 0;
  for (const PreparedMesh& mesh : batch) {
    Tape tape;
    ParamBinding bind(tape, false);
    Tensor unwrapped = detail::unwrap_forward(tape, bind, mesh, params);
    for (const Vec3& p : detail::tensor_to_points(unwrapped)) {
      acc.add(std::fabs(norm(p) - 1.0));
      ++count;
    }
  }
  return acc.result() / static_cast<double>(count);
}

// --- inference entry points -----------------------------------------------------

inline EncodeResult encode(const PreparedMesh& mesh, WrapNetParams& params,
                           const SphereGrid& grid) {
  Tape tape;
  ParamBinding bind(tape, false);
  return encode_forward(tape, bind, mesh, params, grid);
}

inline Mesh decode(const BottleneckPayload& payload, WrapNetParams& params,
                   const SphereGrid& grid) {
  Tape tape;
  ParamBinding bind(tape, false);
  return decode_forward(tape, bind, payload, params, grid, true).mesh;
}

// decode((1-t) c1 + t c2, G); the base graph (and mode metadata) comes from
// the payload argument.
inline Mesh interpolate(const BottleneckPayload& payload, std::span<const double> other_codeword,
                        double t, WrapNetParams& params, const SphereGrid& grid) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::runtime_error("interpolate: t must lie in [0, 1]");
  if (other_codeword.size() != payload.codeword.size())
    throw std::runtime_error("interpolate: codeword length mismatch");
  BottleneckPayload mixed = payload;
  for (std::size_t i = 0; i < mixed.codeword.size(); ++i)
    mixed.codeword[i] = (1.0 - t) * payload.codeword[i] + t * other_codeword[i];
  return decode(mixed, params, grid);
}

// Grid size at dataset ingest: max matching-level vertex count, rounded up to
// the next multiple of 64.
inline int derive_grid_size(std::span<const PreparedMesh> meshes) {
  int max_vertices = 0;
  for (const PreparedMesh& mesh : meshes)
    max_vertices = std::max(max_vertices, mesh.base.vertex_count());
  return ((max_vertices + 63) / 64) * 64;
}

}  // namespace wrapnet
