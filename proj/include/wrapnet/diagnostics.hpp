// diagnostics.hpp - seeded finite-difference battery over every layer kind.
//
// Each case packs layer inputs and parameters into one flat vector,
// rebuilds the real layer forward from it, and compares analytic gradients
// against central differences. Used by the grad-check CLI command and the
// acceptance suite.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wrapnet/gradcheck.hpp"
#include "wrapnet/layers.hpp"
#include "wrapnet/model.hpp"
#include "wrapnet/nn.hpp"
#include "wrapnet/synthetic.hpp"

namespace wrapnet {

struct BatteryCase {
  std::string name;
  int instance = 0;
  GradCheckReport report;
};

namespace detail {

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (rng.uniform() * 2.0 - 1.0);
  return v;
}

// Builds a GraphBuilder whose leaves are the given data shapes followed by
// the given parameters (values overwritten from the check vector, then bound
// through ParamBinding so the real layer code picks them up).
template <typename Body>
GraphBuilder store_case(std::vector<Shape> data_shapes, std::vector<Param*> params, Body body) {
  return [data_shapes = std::move(data_shapes), params = std::move(params),
          body = std::move(body)](Tape& tape, std::span<const double> x) {
    std::size_t offset = 0;
    BuiltGraph g;
    std::vector<Tensor> data;
    for (const Shape& s : data_shapes) {
      data.push_back(tape.input(s, x.subspan(offset, s.size()), true));
      offset += s.size();
    }
    for (Param* p : params) {
      std::copy(x.begin() + offset, x.begin() + offset + p->value.size(), p->value.begin());
      offset += p->value.size();
    }
    if (offset != x.size()) throw std::runtime_error("store_case: size mismatch");
    ParamBinding bind(tape);
    for (const Tensor& t : data) g.leaves.push_back(t);
    for (Param* p : params) g.leaves.push_back(bind(*p));
    g.root = body(tape, bind, data);
    return g;
  };
}

}  // namespace detail

// Runs `instances` seeded checks per layer kind: FaceConv, Face2Node, MLP,
// both pooling reductions, the two training losses, and a full deformation
// block. Gradients are taken with respect to inputs and parameters together.
inline std::vector<BatteryCase> run_gradient_battery(std::uint64_t seed, int instances = 5,
                                                     GradCheckOptions opts = {}) {
  std::vector<BatteryCase> cases;
  const Mesh icosa = normalize(make_icosahedron());
  const MeshGraphContext ctx(icosa);
  const int m = icosa.face_count(), n = icosa.vertex_count();
  static const SubdivisionMesh tetra_hier = loop_subdivide(make_tetrahedron(), 1);

  auto run = [&cases](const std::string& name, int instance, const GraphBuilder& builder,
                      std::size_t total, Rng& rng, const GradCheckOptions& options) {
    auto sample = [&rng, total](int) { return detail::random_vector(total, rng, 0.8); };
    BatteryCase c;
    c.name = name;
    c.instance = instance;
    c.report = grad_check_resampled(builder, sample, 8, options);
    cases.push_back(c);
  };

  auto total_size = [](std::span<const Shape> data, std::span<Param* const> params) {
    std::size_t t = 0;
    for (const Shape& s : data) t += s.size();
    for (const Param* p : params) t += p->value.size();
    return t;
  };

  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(Rng::derive(seed, 1000 + inst));

    {  // FaceConv
      const int d_in = 5, d_out = 4;
      auto store = std::make_shared<ParamStore>();
      Rng init(Rng::derive(seed, 91 + inst));
      auto conv = std::make_shared<FaceConvParams>(make_face_conv(*store, "c", d_in, d_out, init));
      std::vector<Param*> params;
      collect(params, *conv);
      const std::vector<Shape> data = {{m, d_in}};
      GraphBuilder builder = detail::store_case(
          data, params, [&ctx, conv, store](Tape& tape, ParamBinding& bind, std::vector<Tensor>& d) {
            return tape.mean_all(tape.abs(face_conv(tape, bind, d[0], ctx.neighbors, *conv)));
          });
      run("face_conv", inst, builder, total_size(data, params), rng, opts);
    }

    {  // Face2Node
      const int d_in = 4, hidden = 6, d_out = 3;
      auto store = std::make_shared<ParamStore>();
      Rng init(Rng::derive(seed, 92 + inst));
      auto layer = std::make_shared<Face2NodeParams>(
          make_face2node(*store, "f", d_in, hidden, d_out, init));
      std::vector<Param*> params;
      collect(params, *layer);
      const std::vector<Shape> data = {{n, 3}, {m, d_in}};
      GraphBuilder builder = detail::store_case(
          data, params, [&ctx, layer, store](Tape& tape, ParamBinding& bind, std::vector<Tensor>& d) {
            Face2NodeResult res = face2node_forward(tape, bind, d[0], d[1], ctx, *layer);
            Tensor pos_term = tape.mean_all(tape.mul(res.positions, res.positions));
            return tape.add(pos_term, tape.mean_all(tape.abs(res.features)));
          });
      run("face2node", inst, builder, total_size(data, params), rng, opts);
    }

    {  // MLP
      const int k = 9;
      auto store = std::make_shared<ParamStore>();
      Rng init(Rng::derive(seed, 93 + inst));
      const std::vector<int> widths = {5, 7, 4};
      auto mlp = std::make_shared<MlpParams>(make_mlp(*store, "m", widths, init));
      std::vector<Param*> params;
      collect(params, *mlp);
      const std::vector<Shape> data = {{k, 5}};
      GraphBuilder builder = detail::store_case(
          data, params, [mlp, store](Tape& tape, ParamBinding& bind, std::vector<Tensor>& d) {
            Tensor out = mlp_forward(tape, bind, d[0], *mlp);
            return tape.mean_all(tape.mul(out, out));
          });
      run("mlp", inst, builder, total_size(data, params), rng, opts);
    }

    {  // Global mean pooling
      const std::vector<Shape> data = {{m, 6}};
      GraphBuilder builder =
          detail::store_case(data, {}, [](Tape& tape, ParamBinding&, std::vector<Tensor>& d) {
            Tensor pooled = global_mean_pool(tape, d[0]);
            return tape.mean_all(tape.mul(pooled, pooled));
          });
      run("global_mean_pool", inst, builder, total_size(data, {}), rng, opts);
    }

    {  // Loop pooling of child faces
      const int faces1 = static_cast<int>(tetra_hier.topology[1].triangles.size());
      const std::vector<Shape> data = {{faces1, 5}};
      GraphBuilder builder =
          detail::store_case(data, {}, [](Tape& tape, ParamBinding&, std::vector<Tensor>& d) {
            Tensor pooled = tape.pool_children(d[0], tetra_hier.topology[0].child_faces);
            return tape.mean_all(tape.mul(pooled, pooled));
          });
      run("pool_children", inst, builder, total_size(data, {}), rng, opts);
    }

    {  // Vertex-to-vertex MSE through a nontrivial alignment
      Rng perm_rng(Rng::derive(seed, 777 + inst));
      const std::vector<int> align = random_permutation(n, perm_rng);
      const std::vector<Shape> data = {{n, 3}};
      GraphBuilder builder = detail::store_case(
          data, {}, [&icosa, align](Tape& tape, ParamBinding&, std::vector<Tensor>& d) {
            return reconstruction_loss(tape, d[0], icosa, align);
          });
      run("reconstruction_loss", inst, builder, total_size(data, {}), rng, opts);
    }

    {  // Chamfer against fixed sphere samples
      const std::vector<Vec3> samples = sample_sphere_uniform(24, Rng::derive(seed, 31 + inst));
      const std::vector<Shape> data = {{n, 3}};
      GraphBuilder builder = detail::store_case(
          data, {}, [samples](Tape& tape, ParamBinding&, std::vector<Tensor>& d) {
            return sphere_chamfer_loss(tape, d[0], samples);
          });
      run("chamfer_loss", inst, builder, total_size(data, {}), rng, opts);
    }

    {  // Whole deformation block through the production forward
      auto store = std::make_shared<ParamStore>();
      Rng init(Rng::derive(seed, 4242 + inst));
      auto block = std::make_shared<DeformationBlockParams>(
          make_deformation_block(*store, "blk", 7, 5, 2, 0, init));
      std::vector<Param*> params;
      collect(params, *block);
      const std::vector<Shape> data = {{n, 3}, {m, 7}};
      GraphBuilder builder = detail::store_case(
          data, params, [&ctx, block, store](Tape& tape, ParamBinding& bind, std::vector<Tensor>& d) {
            DeformationResult res =
                deformation_block_forward(tape, bind, d[0], d[1], ctx, *block);
            return tape.mean_all(tape.mul(res.positions, res.positions));
          });
      run("deformation_block", inst, builder, total_size(data, params), rng, opts);
    }
  }
  return cases;
}

}  // namespace wrapnet
