// autodiff.hpp - reverse-mode automatic differentiation over 2-D arrays.
//
// A Tape owns a flat list of nodes in creation order; forward values are
// computed eagerly and backward() replays the tape in reverse, accumulating
// exact analytic gradients. Everything is double precision.
//
// Reductions that combine rows whose order is not canonical (global pooling,
// per-vertex star means) use ExactSum, so outputs are identical bits under
// any row permutation of the inputs. Elementwise and matmul kernels keep a
// fixed per-row accumulation order, which makes them row-permutation
// equivariant at the bit level as well.
#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrapnet/numeric.hpp"

namespace wrapnet {

struct Shape {
  int rows = 0, cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  bool operator==(const Shape&) const = default;
};

class Tape;

struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  Shape shape() const;
  int rows() const { return shape().rows; }
  int cols() const { return shape().cols; }
  std::span<const double> value() const;
  std::span<const double> grad() const;
  double scalar() const;
};

class Tape {
 public:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Tensor input(Shape shape, std::span<const double> data, bool requires_grad) {
    if (data.size() != shape.size()) throw std::runtime_error("tape input: size mismatch");
    Node node;
    node.shape = shape;
    node.value.assign(data.begin(), data.end());
    node.requires_grad = requires_grad;
    return push(std::move(node));
  }

  Tensor constant(Shape shape, std::span<const double> data) { return input(shape, data, false); }

  Tensor zeros(Shape shape, bool requires_grad = false) {
    Node node;
    node.shape = shape;
    node.value.assign(shape.size(), 0.0);
    node.requires_grad = requires_grad;
    return push(std::move(node));
  }

  // --- elementwise -------------------------------------------------------

  Tensor add(Tensor a, Tensor b) { return binary(a, b, "add", [](double x, double y) { return x + y; },
                                                 [](double) { return 1.0; }, [](double) { return 1.0; }); }

  Tensor sub(Tensor a, Tensor b) { return binary(a, b, "sub", [](double x, double y) { return x - y; },
                                                 [](double) { return 1.0; }, [](double) { return -1.0; }); }

  Tensor mul(Tensor a, Tensor b) {
    check_same_shape(a, b, "mul");
    const Shape s = node(a.id).shape;
    Node out;
    out.shape = s;
    out.value.resize(s.size());
    const auto& av = node(a.id).value;
    const auto& bv = node(b.id).value;
    for (std::size_t i = 0; i < s.size(); ++i) out.value[i] = av[i] * bv[i];
    out.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, b] {
        const auto& g = node(t.id).grad;
        const auto& av2 = node(a.id).value;
        const auto& bv2 = node(b.id).value;
        if (node(a.id).requires_grad) {
          auto& ga = node(a.id).grad;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
        }
        if (node(b.id).requires_grad) {
          auto& gb = node(b.id).grad;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
        }
      };
    return t;
  }

  Tensor scale(Tensor a, double s) {
    Node out;
    out.shape = node(a.id).shape;
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (std::size_t i = 0; i < av.size(); ++i) out.value[i] = av[i] * s;
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, s] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
      };
    return t;
  }

  // |x| with subgradient 0 at 0.
  Tensor abs(Tensor a) {
    Node out;
    out.shape = node(a.id).shape;
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (std::size_t i = 0; i < av.size(); ++i) {
      kink_margin_ = std::min(kink_margin_, std::fabs(av[i]));
      out.value[i] = std::fabs(av[i]);
    }
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a] {
        const auto& g = node(t.id).grad;
        const auto& av2 = node(a.id).value;
        auto& ga = node(a.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += av2[i] > 0.0 ? g[i] : (av2[i] < 0.0 ? -g[i] : 0.0);
      };
    return t;
  }

  // max(x, 0) with subgradient 0 at 0.
  Tensor relu(Tensor a) {
    Node out;
    out.shape = node(a.id).shape;
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (std::size_t i = 0; i < av.size(); ++i) {
      kink_margin_ = std::min(kink_margin_, std::fabs(av[i]));
      out.value[i] = av[i] > 0.0 ? av[i] : 0.0;
    }
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a] {
        const auto& g = node(t.id).grad;
        const auto& av2 = node(a.id).value;
        auto& ga = node(a.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av2[i] > 0.0) ga[i] += g[i];
      };
    return t;
  }

  // --- linear algebra ----------------------------------------------------

  // (m x k) * (k x n). The k-loop order is fixed per output row, so row
  // results do not depend on the presence or order of other rows.
  Tensor matmul(Tensor a, Tensor b) {
    const Shape sa = node(a.id).shape, sb = node(b.id).shape;
    if (sa.cols != sb.rows) throw std::runtime_error("matmul: inner dimension mismatch");
    Node out;
    out.shape = {sa.rows, sb.cols};
    out.value.assign(out.shape.size(), 0.0);
    matmul_accumulate(node(a.id).value.data(), node(b.id).value.data(), out.value.data(), sa.rows,
                      sa.cols, sb.cols);
    out.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, b, sa, sb] {
        const double* g = node(t.id).grad.data();
        if (node(a.id).requires_grad) {
          // dA[i,p] += sum_j dC[i,j] * B[p,j]
          double* ga = node(a.id).grad.data();
          const double* bv = node(b.id).value.data();
          for (int i = 0; i < sa.rows; ++i)
            for (int p = 0; p < sa.cols; ++p) {
              const double* grow = g + static_cast<std::size_t>(i) * sb.cols;
              const double* brow = bv + static_cast<std::size_t>(p) * sb.cols;
              double acc = 0.0;
              for (int j = 0; j < sb.cols; ++j) acc += grow[j] * brow[j];
              ga[static_cast<std::size_t>(i) * sa.cols + p] += acc;
            }
        }
        if (node(b.id).requires_grad) {
          // dB[p,j] += sum_i A[i,p] * dC[i,j]
          double* gb = node(b.id).grad.data();
          const double* av = node(a.id).value.data();
          for (int i = 0; i < sa.rows; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * sb.cols;
            const double* arow = av + static_cast<std::size_t>(i) * sa.cols;
            for (int p = 0; p < sa.cols; ++p) {
              const double s = arow[p];
              if (s == 0.0) continue;
              double* gbrow = gb + static_cast<std::size_t>(p) * sb.cols;
              for (int j = 0; j < sb.cols; ++j) gbrow[j] += s * grow[j];
            }
          }
        }
      };
    return t;
  }

  // Broadcast-add a 1 x d bias row onto every row of a.
  Tensor add_bias(Tensor a, Tensor bias) {
    const Shape sa = node(a.id).shape, sb = node(bias.id).shape;
    if (sb.rows != 1 || sb.cols != sa.cols) throw std::runtime_error("add_bias: shape mismatch");
    Node out;
    out.shape = sa;
    out.value.resize(sa.size());
    const auto& av = node(a.id).value;
    const auto& bv = node(bias.id).value;
    for (int i = 0; i < sa.rows; ++i)
      for (int j = 0; j < sa.cols; ++j)
        out.value[static_cast<std::size_t>(i) * sa.cols + j] =
            av[static_cast<std::size_t>(i) * sa.cols + j] + bv[j];
    out.requires_grad = node(a.id).requires_grad || node(bias.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, bias, sa] {
        const auto& g = node(t.id).grad;
        if (node(a.id).requires_grad) {
          auto& ga = node(a.id).grad;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (node(bias.id).requires_grad) {
          auto& gb = node(bias.id).grad;
          for (int i = 0; i < sa.rows; ++i)
            for (int j = 0; j < sa.cols; ++j)
              gb[j] += g[static_cast<std::size_t>(i) * sa.cols + j];
        }
      };
    return t;
  }

  // --- structure ops -----------------------------------------------------

  Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::runtime_error("concat_cols: no inputs");
    const int rows = node(parts[0].id).shape.rows;
    int cols = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
      if (node(p.id).shape.rows != rows) throw std::runtime_error("concat_cols: row mismatch");
      cols += node(p.id).shape.cols;
      rg = rg || node(p.id).requires_grad;
    }
    Node out;
    out.shape = {rows, cols};
    out.value.resize(out.shape.size());
    int offset = 0;
    for (const Tensor& p : parts) {
      const Shape sp = node(p.id).shape;
      const auto& pv = node(p.id).value;
      for (int i = 0; i < rows; ++i)
        std::memcpy(out.value.data() + static_cast<std::size_t>(i) * cols + offset,
                    pv.data() + static_cast<std::size_t>(i) * sp.cols,
                    sizeof(double) * sp.cols);
      offset += sp.cols;
    }
    out.requires_grad = rg;
    Tensor t = push(std::move(out));
    if (rg) {
      std::vector<Tensor> held(parts.begin(), parts.end());
      node(t.id).backward = [this, t, held, rows, cols] {
        const auto& g = node(t.id).grad;
        int off = 0;
        for (const Tensor& p : held) {
          const Shape sp = node(p.id).shape;
          if (node(p.id).requires_grad) {
            auto& gp = node(p.id).grad;
            for (int i = 0; i < rows; ++i)
              for (int j = 0; j < sp.cols; ++j)
                gp[static_cast<std::size_t>(i) * sp.cols + j] +=
                    g[static_cast<std::size_t>(i) * cols + off + j];
          }
          off += sp.cols;
        }
      };
    }
    return t;
  }

  Tensor concat_cols(std::initializer_list<Tensor> parts) {
    return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
  }

  Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::runtime_error("concat_rows: no inputs");
    const int cols = node(parts[0].id).shape.cols;
    int rows = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
      if (node(p.id).shape.cols != cols) throw std::runtime_error("concat_rows: column mismatch");
      rows += node(p.id).shape.rows;
      rg = rg || node(p.id).requires_grad;
    }
    Node out;
    out.shape = {rows, cols};
    out.value.resize(out.shape.size());
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      const auto& pv = node(p.id).value;
      std::memcpy(out.value.data() + offset, pv.data(), sizeof(double) * pv.size());
      offset += pv.size();
    }
    out.requires_grad = rg;
    Tensor t = push(std::move(out));
    if (rg) {
      std::vector<Tensor> held(parts.begin(), parts.end());
      node(t.id).backward = [this, t, held] {
        const auto& g = node(t.id).grad;
        std::size_t off = 0;
        for (const Tensor& p : held) {
          auto& np = node(p.id);
          if (np.requires_grad)
            for (std::size_t i = 0; i < np.value.size(); ++i) np.grad[i] += g[off + i];
          off += np.value.size();
        }
      };
    }
    return t;
  }

  Tensor concat_rows(std::initializer_list<Tensor> parts) {
    return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
  }

  // Output row r = input row indices[r]; indices may repeat.
  Tensor gather_rows(Tensor a, std::span<const int> indices) {
    const Shape sa = node(a.id).shape;
    for (int idx : indices)
      if (idx < 0 || idx >= sa.rows) throw std::runtime_error("gather_rows: index out of range");
    Node out;
    out.shape = {static_cast<int>(indices.size()), sa.cols};
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (std::size_t r = 0; r < indices.size(); ++r)
      std::memcpy(out.value.data() + r * sa.cols,
                  av.data() + static_cast<std::size_t>(indices[r]) * sa.cols,
                  sizeof(double) * sa.cols);
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad) {
      std::vector<int> held(indices.begin(), indices.end());
      node(t.id).backward = [this, t, a, held, sa] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        for (std::size_t r = 0; r < held.size(); ++r)
          for (int j = 0; j < sa.cols; ++j)
            ga[static_cast<std::size_t>(held[r]) * sa.cols + j] += g[r * sa.cols + j];
      };
    }
    return t;
  }

  Tensor slice_cols(Tensor a, int first, int last) {
    const Shape sa = node(a.id).shape;
    if (first < 0 || last > sa.cols || first >= last)
      throw std::runtime_error("slice_cols: bad range");
    Node out;
    out.shape = {sa.rows, last - first};
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (int i = 0; i < sa.rows; ++i)
      std::memcpy(out.value.data() + static_cast<std::size_t>(i) * (last - first),
                  av.data() + static_cast<std::size_t>(i) * sa.cols + first,
                  sizeof(double) * (last - first));
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, sa, first, last] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        const int w = last - first;
        for (int i = 0; i < sa.rows; ++i)
          for (int j = 0; j < w; ++j)
            ga[static_cast<std::size_t>(i) * sa.cols + first + j] +=
                g[static_cast<std::size_t>(i) * w + j];
      };
    return t;
  }

  // Repeat a 1 x d row m times.
  Tensor repeat_row(Tensor a, int m) {
    const Shape sa = node(a.id).shape;
    if (sa.rows != 1) throw std::runtime_error("repeat_row: input must be a single row");
    Node out;
    out.shape = {m, sa.cols};
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (int i = 0; i < m; ++i)
      std::memcpy(out.value.data() + static_cast<std::size_t>(i) * sa.cols, av.data(),
                  sizeof(double) * sa.cols);
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, m, sa] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < sa.cols; ++j) ga[j] += g[static_cast<std::size_t>(i) * sa.cols + j];
      };
    return t;
  }

  // --- reductions --------------------------------------------------------

  Tensor sum_all(Tensor a) { return reduce_all(a, false); }
  Tensor mean_all(Tensor a) { return reduce_all(a, true); }

  // Column means over all rows, order-invariant (1 x d output).
  Tensor mean_rows_exact(Tensor a) {
    const Shape sa = node(a.id).shape;
    if (sa.rows < 1) throw std::runtime_error("mean_rows_exact: empty input");
    Node out;
    out.shape = {1, sa.cols};
    out.value.resize(sa.cols);
    const auto& av = node(a.id).value;
    for (int j = 0; j < sa.cols; ++j) {
      ExactSum acc;
      for (int i = 0; i < sa.rows; ++i) acc.add(av[static_cast<std::size_t>(i) * sa.cols + j]);
      out.value[j] = acc.result() / sa.rows;
    }
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, sa] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        const double inv = 1.0 / sa.rows;
        for (int i = 0; i < sa.rows; ++i)
          for (int j = 0; j < sa.cols; ++j) ga[static_cast<std::size_t>(i) * sa.cols + j] += g[j] * inv;
      };
    return t;
  }

  // Per-group column means; groups index rows of a and must not overlap.
  // Group g of size k produces output row g = exact mean of its k rows.
  Tensor group_mean_rows(Tensor a, const std::vector<std::vector<int>>& groups) {
    const Shape sa = node(a.id).shape;
    Node out;
    out.shape = {static_cast<int>(groups.size()), sa.cols};
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].empty()) throw std::runtime_error("group_mean_rows: empty group");
      for (int j = 0; j < sa.cols; ++j) {
        ExactSum acc;
        for (int r : groups[g]) acc.add(av[static_cast<std::size_t>(r) * sa.cols + j]);
        out.value[g * sa.cols + j] = acc.result() / static_cast<double>(groups[g].size());
      }
    }
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad) {
      std::vector<std::vector<int>> held = groups;
      node(t.id).backward = [this, t, a, held, sa] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        for (std::size_t gi = 0; gi < held.size(); ++gi) {
          const double inv = 1.0 / static_cast<double>(held[gi].size());
          for (int r : held[gi])
            for (int j = 0; j < sa.cols; ++j)
              ga[static_cast<std::size_t>(r) * sa.cols + j] += g[gi * sa.cols + j] * inv;
        }
      };
    }
    return t;
  }

  // Mean of each face's 4 children (fixed child order): (4m x d) -> (m x d).
  Tensor pool_children(Tensor a, const std::vector<std::array<int, 4>>& child_faces) {
    const Shape sa = node(a.id).shape;
    const int m = static_cast<int>(child_faces.size());
    if (sa.rows != 4 * m) throw std::runtime_error("pool_children: row count mismatch");
    Node out;
    out.shape = {m, sa.cols};
    out.value.resize(out.shape.size());
    const auto& av = node(a.id).value;
    for (int f = 0; f < m; ++f)
      for (int j = 0; j < sa.cols; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k)
          acc += av[static_cast<std::size_t>(child_faces[f][k]) * sa.cols + j];
        out.value[static_cast<std::size_t>(f) * sa.cols + j] = acc * 0.25;
      }
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad) {
      std::vector<std::array<int, 4>> held = child_faces;
      node(t.id).backward = [this, t, a, held, sa] {
        const auto& g = node(t.id).grad;
        auto& ga = node(a.id).grad;
        for (std::size_t f = 0; f < held.size(); ++f)
          for (int k = 0; k < 4; ++k)
            for (int j = 0; j < sa.cols; ++j)
              ga[static_cast<std::size_t>(held[f][k]) * sa.cols + j] +=
                  0.25 * g[f * sa.cols + j];
      };
    }
    return t;
  }

  // --- driver ------------------------------------------------------------

  void backward(Tensor root) {
    if (node(root.id).shape.size() != 1)
      throw std::runtime_error("backward: root must be scalar");
    for (Node& n : nodes_) {
      if (n.requires_grad)
        n.grad.assign(n.shape.size(), 0.0);
    }
    if (!node(root.id).requires_grad)
      throw std::runtime_error("backward: root does not depend on any parameter");
    node(root.id).grad[0] = 1.0;
    for (int id = root.id; id >= 0; --id)
      if (nodes_[id].backward && nodes_[id].requires_grad) nodes_[id].backward();
  }

  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Smallest |x| seen at any abs/relu input since reset; finite-difference
  // checks use it to reject samples too close to a kink.
  double kink_margin() const { return kink_margin_; }
  void reset_kink_margin() { kink_margin_ = std::numeric_limits<double>::infinity(); }

 private:
  template <typename F, typename DA, typename DB>
  Tensor binary(Tensor a, Tensor b, const char* name, F f, DA, DB db) {
    check_same_shape(a, b, name);
    const Shape s = node(a.id).shape;
    Node out;
    out.shape = s;
    out.value.resize(s.size());
    const auto& av = node(a.id).value;
    const auto& bv = node(b.id).value;
    for (std::size_t i = 0; i < s.size(); ++i) out.value[i] = f(av[i], bv[i]);
    out.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad) {
      const double sign_b = db(0.0);
      node(t.id).backward = [this, t, a, b, sign_b] {
        const auto& g = node(t.id).grad;
        if (node(a.id).requires_grad) {
          auto& ga = node(a.id).grad;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (node(b.id).requires_grad) {
          auto& gb = node(b.id).grad;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign_b * g[i];
        }
      };
    }
    return t;
  }

  Tensor reduce_all(Tensor a, bool mean) {
    const Shape sa = node(a.id).shape;
    if (sa.size() == 0) throw std::runtime_error("reduce: empty input");
    Node out;
    out.shape = {1, 1};
    ExactSum acc;
    for (double v : node(a.id).value) acc.add(v);
    const double denom = mean ? static_cast<double>(sa.size()) : 1.0;
    out.value = {acc.result() / denom};
    out.requires_grad = node(a.id).requires_grad;
    Tensor t = push(std::move(out));
    if (node(t.id).requires_grad)
      node(t.id).backward = [this, t, a, denom] {
        const double g = node(t.id).grad[0] / denom;
        auto& ga = node(a.id).grad;
        for (double& v : ga) v += g;
      };
    return t;
  }

  static void matmul_accumulate(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<std::size_t>(i) * n;
      const double* arow = a + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const double s = arow[p];
        if (s == 0.0) continue;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  }

  void check_same_shape(Tensor a, Tensor b, const char* what) {
    if (!(node(a.id).shape == node(b.id).shape))
      throw std::runtime_error(std::string(what) + ": shape mismatch");
  }

  Tensor push(Node&& node) {
    nodes_.push_back(std::move(node));
    return Tensor{this, static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

inline Shape Tensor::shape() const { return tape->node(id).shape; }
inline std::span<const double> Tensor::value() const { return tape->node(id).value; }
inline std::span<const double> Tensor::grad() const { return tape->node(id).grad; }
inline double Tensor::scalar() const {
  if (shape().size() != 1) throw std::runtime_error("scalar(): tensor is not 1x1");
  return tape->node(id).value[0];
}

}  // namespace wrapnet
