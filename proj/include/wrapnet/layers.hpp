// layers.hpp - Face2Node and the deformation block built from it.
//
// Face2Node turns face features into per-vertex differential position
// updates. For each face i and each of its corners v (corner slot r), the
// face feature is concatenated with the face's edge vectors starting at r:
//   cat_r = F_i || e_r || e_{r+1 mod 3} || e_{r+2 mod 3},   e_k = x_{k+1} - x_k,
// a shared MLP maps cat_r to (delta || feature), the vertex moves by the
// mean of the deltas over its star, and the face feature update is the mean
// over the three rotations, which makes it invariant to within-face vertex
// order. All node updates are applied simultaneously from pre-update
// positions.
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wrapnet/autodiff.hpp"
#include "wrapnet/mesh.hpp"
#include "wrapnet/nn.hpp"

namespace wrapnet {

// Connectivity-derived index arrays for one mesh, shared by every layer pass.
struct MeshGraphContext {
  int n = 0, m = 0;
  std::array<std::vector<int>, 3> corner;  // corner[k][f] = triangles[f][k]
  FaceNeighborIndex neighbors;
  // star_rows[v] lists rows of the stacked (3m x .) rotation tensor touching
  // v: rotation r of face f sits at row r*m + f and updates vertex corner[r][f].
  std::vector<std::vector<int>> star_rows;

  MeshGraphContext(const Mesh& mesh, const FaceAdjacency& adj)
      : n(mesh.vertex_count()), m(mesh.face_count()), neighbors(adj) {
    for (int k = 0; k < 3; ++k) {
      corner[k].resize(m);
      for (int f = 0; f < m; ++f) corner[k][f] = mesh.triangles[f][k];
    }
    star_rows.resize(n);
    for (int f = 0; f < m; ++f)
      for (int k = 0; k < 3; ++k) star_rows[mesh.triangles[f][k]].push_back(k * m + f);
  }

  explicit MeshGraphContext(const Mesh& mesh) : MeshGraphContext(mesh, build_face_adjacency(mesh)) {}
};

struct Face2NodeParams {
  MlpParams mlp;  // (d_in + 9) -> hidden -> (3 + d_out), 2 layers
  int d_in = 0;
  int d_out = 0;
};

inline Face2NodeParams make_face2node(ParamStore& store, const std::string& prefix, int d_in,
                                      int hidden, int d_out, Rng& rng) {
  Face2NodeParams layer;
  layer.d_in = d_in;
  layer.d_out = d_out;
  const std::vector<int> widths = {d_in + 9, hidden, 3 + d_out};
  layer.mlp = make_mlp(store, prefix, widths, rng);
  return layer;
}

inline void collect(std::vector<Param*>& out, const Face2NodeParams& layer) {
  collect(out, layer.mlp);
}

struct Face2NodeResult {
  Tensor positions;  // n x 3
  Tensor features;   // m x d_out (valid when d_out > 0)
  bool has_features = false;
};

inline Face2NodeResult face2node_forward(Tape& tape, ParamBinding& bind, Tensor positions,
                                         Tensor features, const MeshGraphContext& ctx,
                                         const Face2NodeParams& layer) {
  if (features.rows() != ctx.m) throw std::runtime_error("face2node: feature row mismatch");
  if (features.cols() != layer.d_in) throw std::runtime_error("face2node: feature width mismatch");
  if (positions.rows() != ctx.n || positions.cols() != 3)
    throw std::runtime_error("face2node: position shape mismatch");

  Tensor xa = tape.gather_rows(positions, ctx.corner[0]);
  Tensor xb = tape.gather_rows(positions, ctx.corner[1]);
  Tensor xc = tape.gather_rows(positions, ctx.corner[2]);
  std::array<Tensor, 3> edge = {tape.sub(xb, xa), tape.sub(xc, xb), tape.sub(xa, xc)};

  std::array<Tensor, 3> per_rotation;
  for (int r = 0; r < 3; ++r) {
    Tensor cat = tape.concat_cols({features, edge[r], edge[(r + 1) % 3], edge[(r + 2) % 3]});
    per_rotation[r] = mlp_forward(tape, bind, cat, layer.mlp);
  }
  Tensor stacked = tape.concat_rows({per_rotation[0], per_rotation[1], per_rotation[2]});
  Tensor deltas = tape.group_mean_rows(tape.slice_cols(stacked, 0, 3), ctx.star_rows);

  Face2NodeResult out;
  out.positions = tape.add(positions, deltas);
  if (layer.d_out > 0) {
    const int w = 3 + layer.d_out;
    Tensor f0 = tape.slice_cols(per_rotation[0], 3, w);
    Tensor f1 = tape.slice_cols(per_rotation[1], 3, w);
    Tensor f2 = tape.slice_cols(per_rotation[2], 3, w);
    out.features = tape.scale(tape.add(tape.add(f0, f1), f2), 1.0 / 3.0);
    out.has_features = true;
  }
  return out;
}

// Alternating FaceConv / Face2Node pairs. Every Face2Node except the last
// re-emits face features at the hidden width for the next FaceConv; the last
// one may as well (the model's second wrapping stage carries features across
// subdivision levels).
struct DeformationBlockParams {
  std::vector<FaceConvParams> convs;
  std::vector<Face2NodeParams> f2ns;
  int d_in = 0;
  int hidden = 0;
  int d_out = 0;  // feature width after the final Face2Node (0 = positions only)
};

inline DeformationBlockParams make_deformation_block(ParamStore& store, const std::string& prefix,
                                                     int d_in, int hidden, int pairs, int d_out,
                                                     Rng& rng) {
  if (pairs < 1) throw std::runtime_error("deformation block: need at least one pair");
  DeformationBlockParams block;
  block.d_in = d_in;
  block.hidden = hidden;
  block.d_out = d_out;
  int cur = d_in;
  for (int p = 0; p < pairs; ++p) {
    block.convs.push_back(
        make_face_conv(store, prefix + ".conv" + std::to_string(p), cur, hidden, rng));
    const int out = p + 1 == pairs ? d_out : hidden;
    block.f2ns.push_back(
        make_face2node(store, prefix + ".f2n" + std::to_string(p), hidden, hidden, out, rng));
    cur = out;
  }
  return block;
}

inline void collect(std::vector<Param*>& out, const DeformationBlockParams& block) {
  for (const auto& c : block.convs) collect(out, c);
  for (const auto& f : block.f2ns) collect(out, f);
}

struct DeformationResult {
  Tensor positions;
  Tensor features;
  bool has_features = false;
};

// conditioning, when present, is a 1 x c row appended to every face's input
// feature row before the first convolution.
inline DeformationResult deformation_block_forward(Tape& tape, ParamBinding& bind,
                                                   Tensor positions, Tensor features,
                                                   const MeshGraphContext& ctx,
                                                   const DeformationBlockParams& block,
                                                   std::optional<Tensor> conditioning = {}) {
  Tensor feats = features;
  if (conditioning) feats = tape.concat_cols({feats, tape.repeat_row(*conditioning, ctx.m)});
  if (feats.cols() != block.d_in)
    throw std::runtime_error("deformation block: input feature width mismatch");
  Tensor pos = positions;
  DeformationResult out;
  for (std::size_t p = 0; p < block.convs.size(); ++p) {
    Tensor h = tape.relu(face_conv(tape, bind, feats, ctx.neighbors, block.convs[p]));
    Face2NodeResult step = face2node_forward(tape, bind, pos, h, ctx, block.f2ns[p]);
    pos = step.positions;
    if (step.has_features) {
      feats = step.features;
      out.features = step.features;
      out.has_features = true;
    }
  }
  out.positions = pos;
  return out;
}

}  // namespace wrapnet
