// nn.hpp - parameters, initialization, Adam, MLP and face convolution.
#pragma once

#include <cmath>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "wrapnet/autodiff.hpp"
#include "wrapnet/mesh.hpp"
#include "wrapnet/numeric.hpp"

namespace wrapnet {

struct Param {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // accumulated across a batch, cleared by zero_grad
  std::vector<double> m, v;  // Adam moments
};

// Owns all named parameter arrays. A deque keeps Param addresses stable so
// layers can hold Param* handles.
class ParamStore {
 public:
  Param& add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    items_.emplace_back();
    Param& p = items_.back();
    p.name = name;
    p.shape = shape;
    p.value.assign(shape.size(), 0.0);
    p.grad.assign(shape.size(), 0.0);
    p.m.assign(shape.size(), 0.0);
    p.v.assign(shape.size(), 0.0);
    index_[name] = items_.size() - 1;
    return p;
  }

  Param& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return items_[it->second];
  }

  const Param& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return items_[it->second];
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad() {
    for (Param& p : items_)
      std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const Param& p : items_) n += p.value.size();
    return n;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  std::size_t count() const { return items_.size(); }

 private:
  std::deque<Param> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline void glorot_init(Param& p, Rng& rng) {
  const double bound = std::sqrt(6.0 / (p.shape.rows + p.shape.cols));
  for (double& w : p.value) w = rng.uniform(-bound, bound);
}

// Binds parameters into a tape as differentiable leaves, once each, and
// copies leaf gradients back after backward().
class ParamBinding {
 public:
  explicit ParamBinding(Tape& tape, bool requires_grad = true)
      : tape_(&tape), requires_grad_(requires_grad) {}

  Tensor operator()(Param& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return it->second;
    Tensor t = tape_->input(p.shape, p.value, requires_grad_);
    bound_.emplace(&p, t);
    order_.push_back(&p);
    return t;
  }

  // Accumulates d(root)/d(param) into each bound param's grad buffer.
  void accumulate_grads() {
    if (!requires_grad_) return;
    for (Param* p : order_) {
      auto g = bound_.at(p).grad();
      for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    }
  }

 private:
  Tape* tape_;
  bool requires_grad_;
  std::unordered_map<Param*, Tensor> bound_;
  std::vector<Param*> order_;
};

// --- Adam ------------------------------------------------------------------

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
};

// One bias-corrected Adam update over a parameter group. A non-finite
// gradient anywhere rejects the whole step.
inline void adam_step(std::span<Param* const> group, AdamState& state, const AdamConfig& cfg) {
  for (const Param* p : group)
    for (double g : p->grad)
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in " + p->name);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (Param* p : group) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->m[i] = cfg.beta1 * p->m[i] + (1.0 - cfg.beta1) * g;
      p->v[i] = cfg.beta2 * p->v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      p->value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// --- MLP ---------------------------------------------------------------------

// Row-shared MLP: affine layers with ReLU after every layer except the last.
struct MlpParams {
  std::vector<Param*> weights;  // layer i: widths[i] x widths[i+1]
  std::vector<Param*> biases;   // 1 x widths[i+1]
};

inline MlpParams make_mlp(ParamStore& store, const std::string& prefix,
                          std::span<const int> widths, Rng& rng) {
  if (widths.size() < 2) throw std::runtime_error("make_mlp: need at least one layer");
  MlpParams mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Param& w = store.add(prefix + ".w" + std::to_string(l), {widths[l], widths[l + 1]});
    glorot_init(w, rng);
    Param& b = store.add(prefix + ".b" + std::to_string(l), {1, widths[l + 1]});
    mlp.weights.push_back(&w);
    mlp.biases.push_back(&b);
  }
  return mlp;
}

inline Tensor mlp_forward(Tape& tape, ParamBinding& bind, Tensor x, const MlpParams& mlp) {
  Tensor h = x;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    h = tape.add_bias(tape.matmul(h, bind(*mlp.weights[l])), bind(*mlp.biases[l]));
    if (l + 1 < mlp.weights.size()) h = tape.relu(h);
  }
  return h;
}

inline void collect(std::vector<Param*>& out, const MlpParams& mlp) {
  for (Param* p : mlp.weights) out.push_back(p);
  for (Param* p : mlp.biases) out.push_back(p);
}

// --- Face convolution --------------------------------------------------------

// Order-invariant 4-term convolution over a face's 3 edge neighbors:
//   out_i = F_i W0 + (sum_j F_j) W1 + (sum_j |F_{j+1} - F_j|) W2
//         + (sum_j |F_i - F_j|) W3 + bias,
// with j running over the ordered neighbors and j+1 wrapping around. The
// cyclic-difference and difference-to-center sums are invariant to rotations
// of the neighbor order, so the layer is agnostic to within-face vertex order.
struct FaceConvParams {
  Param* w0 = nullptr;
  Param* w1 = nullptr;
  Param* w2 = nullptr;
  Param* w3 = nullptr;
  Param* bias = nullptr;
};

inline FaceConvParams make_face_conv(ParamStore& store, const std::string& prefix, int d_in,
                                     int d_out, Rng& rng) {
  FaceConvParams conv;
  conv.w0 = &store.add(prefix + ".w0", {d_in, d_out});
  conv.w1 = &store.add(prefix + ".w1", {d_in, d_out});
  conv.w2 = &store.add(prefix + ".w2", {d_in, d_out});
  conv.w3 = &store.add(prefix + ".w3", {d_in, d_out});
  conv.bias = &store.add(prefix + ".bias", {1, d_out});
  glorot_init(*conv.w0, rng);
  glorot_init(*conv.w1, rng);
  glorot_init(*conv.w2, rng);
  glorot_init(*conv.w3, rng);
  return conv;
}

inline void collect(std::vector<Param*>& out, const FaceConvParams& conv) {
  out.push_back(conv.w0);
  out.push_back(conv.w1);
  out.push_back(conv.w2);
  out.push_back(conv.w3);
  out.push_back(conv.bias);
}

// Neighbor slot arrays extracted from FaceAdjacency for tensor gathers.
struct FaceNeighborIndex {
  std::array<std::vector<int>, 3> slot;  // slot[k][f] = face across edge k of f

  explicit FaceNeighborIndex(const FaceAdjacency& adj) {
    const std::size_t m = adj.neighbors.size();
    for (int k = 0; k < 3; ++k) {
      slot[k].resize(m);
      for (std::size_t f = 0; f < m; ++f) slot[k][f] = adj.neighbors[f][k];
    }
  }
};

inline Tensor face_conv(Tape& tape, ParamBinding& bind, Tensor feats,
                        const FaceNeighborIndex& nbr, const FaceConvParams& conv) {
  Tensor n0 = tape.gather_rows(feats, nbr.slot[0]);
  Tensor n1 = tape.gather_rows(feats, nbr.slot[1]);
  Tensor n2 = tape.gather_rows(feats, nbr.slot[2]);
  Tensor sum_nb = tape.add(tape.add(n0, n1), n2);
  Tensor ring = tape.add(tape.add(tape.abs(tape.sub(n1, n0)), tape.abs(tape.sub(n2, n1))),
                         tape.abs(tape.sub(n0, n2)));
  Tensor spread = tape.add(
      tape.add(tape.abs(tape.sub(feats, n0)), tape.abs(tape.sub(feats, n1))),
      tape.abs(tape.sub(feats, n2)));
  Tensor out = tape.add(tape.add(tape.matmul(feats, bind(*conv.w0)),
                                 tape.matmul(sum_nb, bind(*conv.w1))),
                        tape.add(tape.matmul(ring, bind(*conv.w2)),
                                 tape.matmul(spread, bind(*conv.w3))));
  return tape.add_bias(out, bind(*conv.bias));
}

// Column means across rows; exactly invariant to row permutation.
inline Tensor global_mean_pool(Tape& tape, Tensor feats) { return tape.mean_rows_exact(feats); }

}  // namespace wrapnet
