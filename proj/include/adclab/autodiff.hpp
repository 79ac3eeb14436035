#pragma once

// Reverse-mode differentiation over dense double tensors. Forward values are
// computed eagerly when an op is recorded; backward() sweeps the tape in
// reverse order. Tensors used here are scalars (rank 0), vectors (rank 1, only
// as affine biases) or row-major matrices (rank 2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adclab/errors.hpp"

namespace adclab::ad {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ShapeMismatch("shape " + shape_string(shape_) + " needs " +
                          std::to_string(shape_size(shape_)) + " values, got " +
                          std::to_string(data_.size()));
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor(Shape{rows, cols}, std::move(data));
  }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return rank() == 0 ? 1 : shape_.back(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const { return data_.front(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class Op {
  leaf,
  add,
  sub,
  mul,
  matmul,
  affine,
  leaky_relu,
  tanh,
  exp,
  log,
  sigmoid,
  square,
  sum,
  mean,
  logsumexp,
  gather_rows,
  select_column,
  concat,
  scale,
};

using NodeId = std::size_t;

namespace kernel {

// out (m x n) += a (m x k) * b (k x n)
inline void matmul_acc(const double* a, const double* b, double* out, std::size_t m,
                       std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
}

// out (m x n) += a (m x k) * b^T where b is (n x k)
inline void matmul_bt_acc(const double* a, const double* b, double* out, std::size_t m,
                          std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  matmul_acc(a, bt.data(), out, m, k, n);
}

// out (k x n) += a^T * g where a is (m x k), g is (m x n)
inline void matmul_at_acc(const double* a, const double* g, double* out, std::size_t m,
                          std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a[i * k + p];
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * grow[j];
    }
  }
}

inline double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace kernel

class Tape;

/// Gradient of one scalar output with respect to every node of a tape.
class Gradients {
 public:
  const Tensor& operator[](NodeId id) const { return grads_[id]; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    double param = 0.0;               // slope for leaky_relu, factor for scale
    std::vector<std::size_t> index;   // gather_rows / select_column
  };

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  // Invalidated by any later node push; copy if more nodes follow.
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }

  NodeId leaf(Tensor t) { return push(Op::leaf, {}, std::move(t)); }
  NodeId constant(Tensor t) { return leaf(std::move(t)); }

  NodeId add(NodeId a, NodeId b) { return elementwise(Op::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return elementwise(Op::sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return elementwise(Op::mul, a, b); }

  /// (m x k) * (k x n)
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows())
      throw ShapeMismatch("matmul " + shape_string(va.shape()) + " x " + shape_string(vb.shape()));
    Tensor out(Shape{va.rows(), vb.cols()});
    kernel::matmul_acc(va.data().data(), vb.data().data(), out.data().data(), va.rows(),
                       va.cols(), vb.cols());
    return push(Op::matmul, {a, b}, std::move(out));
  }

  /// x (batch x in) * W^T + bias, with W (out x in) and bias (out).
  NodeId affine(NodeId x, NodeId weight, NodeId bias) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(weight);
    const Tensor& vb = value(bias);
    if (vx.rank() != 2 || vw.rank() != 2 || vb.rank() != 1 || vw.cols() != vx.cols() ||
        vb.size() != vw.rows())
      throw ShapeMismatch("affine x" + shape_string(vx.shape()) + " W" +
                          shape_string(vw.shape()) + " b" + shape_string(vb.shape()));
    const std::size_t batch = vx.rows();
    const std::size_t out_dim = vw.rows();
    Tensor out(Shape{batch, out_dim});
    for (std::size_t i = 0; i < batch; ++i)
      std::copy(vb.data().begin(), vb.data().end(), out.data().begin() + i * out_dim);
    kernel::matmul_bt_acc(vx.data().data(), vw.data().data(), out.data().data(), batch,
                          vx.cols(), out_dim);
    return push(Op::affine, {x, weight, bias}, std::move(out));
  }

  NodeId leaky_relu(NodeId a, double slope = 0.2) {
    Tensor out = value(a);
    for (double& v : out.data()) v = v > 0.0 ? v : slope * v;
    NodeId id = push(Op::leaky_relu, {a}, std::move(out));
    nodes_[id].param = slope;
    return id;
  }

  NodeId tanh(NodeId a) { return unary(Op::tanh, a, [](double v) { return std::tanh(v); }); }
  NodeId exp(NodeId a) { return unary(Op::exp, a, [](double v) { return std::exp(v); }); }
  NodeId log(NodeId a) { return unary(Op::log, a, [](double v) { return std::log(v); }); }
  NodeId sigmoid(NodeId a) { return unary(Op::sigmoid, a, kernel::stable_sigmoid); }
  NodeId square(NodeId a) { return unary(Op::square, a, [](double v) { return v * v; }); }

  NodeId sum(NodeId a) {
    const auto d = value(a).data();
    return push(Op::sum, {a}, Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0)));
  }

  NodeId mean(NodeId a) {
    const auto d = value(a).data();
    const double s = std::accumulate(d.begin(), d.end(), 0.0);
    return push(Op::mean, {a}, Tensor::scalar(s / static_cast<double>(d.size())));
  }

  /// Row-wise log-sum-exp of an (m x n) matrix, giving (m x 1).
  NodeId logsumexp(NodeId a) {
    const Tensor& va = value(a);
    require_matrix(va, "logsumexp");
    const std::size_t m = va.rows(), n = va.cols();
    Tensor out(Shape{m, 1});
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = va.data().data() + i * n;
      const double mx = *std::max_element(row, row + n);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
      out[i] = mx + std::log(s);
    }
    return push(Op::logsumexp, {a}, std::move(out));
  }

  /// Rows of an (r x d) table picked by index, giving (indices.size() x d).
  NodeId gather_rows(NodeId table, std::vector<std::size_t> indices) {
    const Tensor& vt = value(table);
    require_matrix(vt, "gather_rows");
    const std::size_t d = vt.cols();
    Tensor out(Shape{indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= vt.rows())
        throw ShapeMismatch("gather_rows index " + std::to_string(indices[i]) + " >= " +
                            std::to_string(vt.rows()));
      std::copy_n(vt.data().begin() + indices[i] * d, d, out.data().begin() + i * d);
    }
    NodeId id = push(Op::gather_rows, {table}, std::move(out));
    nodes_[id].index = std::move(indices);
    return id;
  }

  /// One entry per row of an (m x n) matrix, giving (m x 1).
  NodeId select_column(NodeId a, std::vector<std::size_t> columns) {
    const Tensor& va = value(a);
    require_matrix(va, "select_column");
    if (columns.size() != va.rows())
      throw ShapeMismatch("select_column needs " + std::to_string(va.rows()) + " indices, got " +
                          std::to_string(columns.size()));
    Tensor out(Shape{va.rows(), 1});
    for (std::size_t i = 0; i < va.rows(); ++i) {
      if (columns[i] >= va.cols())
        throw ShapeMismatch("select_column index " + std::to_string(columns[i]) + " >= " +
                            std::to_string(va.cols()));
      out[i] = va.at(i, columns[i]);
    }
    NodeId id = push(Op::select_column, {a}, std::move(out));
    nodes_[id].index = std::move(columns);
    return id;
  }

  /// (m x p) ++ (m x q) along the last axis.
  NodeId concat(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_matrix(va, "concat");
    require_matrix(vb, "concat");
    if (va.rows() != vb.rows())
      throw ShapeMismatch("concat " + shape_string(va.shape()) + " with " +
                          shape_string(vb.shape()));
    const std::size_t m = va.rows(), p = va.cols(), q = vb.cols();
    Tensor out(Shape{m, p + q});
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(va.data().begin() + i * p, p, out.data().begin() + i * (p + q));
      std::copy_n(vb.data().begin() + i * q, q, out.data().begin() + i * (p + q) + p);
    }
    return push(Op::concat, {a, b}, std::move(out));
  }

  NodeId scale(NodeId a, double factor) {
    Tensor out = value(a);
    for (double& v : out.data()) v *= factor;
    NodeId id = push(Op::scale, {a}, std::move(out));
    nodes_[id].param = factor;
    return id;
  }

  /// Reverse sweep from a scalar node. Nodes that do not reach `output` get
  /// zero gradients.
  Gradients backward(NodeId output) const {
    if (value(output).size() != 1)
      throw NonScalarOutput("output node has shape " + shape_string(value(output).shape()));
    Gradients g;
    g.grads_.reserve(nodes_.size());
    for (const auto& n : nodes_) g.grads_.emplace_back(n.value.shape());
    std::vector<char> live(nodes_.size(), 0);
    g.grads_[output][0] = 1.0;
    live[output] = 1;
    for (NodeId id = output + 1; id-- > 0;) {
      if (!live[id]) continue;
      const Node& n = nodes_[id];
      for (NodeId in : n.inputs) live[in] = 1;
      propagate(n, g.grads_[id], g.grads_);
    }
    return g;
  }

 private:
  std::vector<Node> nodes_;

  NodeId push(Op op, std::vector<NodeId> inputs, Tensor value) {
    for (NodeId in : inputs)
      if (in >= nodes_.size()) throw ShapeMismatch("input node " + std::to_string(in) + " missing");
    nodes_.push_back(Node{op, std::move(inputs), std::move(value), 0.0, {}});
    return nodes_.size() - 1;
  }

  static void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeMismatch(std::string(op) + " needs a matrix, got " +
                                           shape_string(t.shape()));
  }

  NodeId elementwise(Op op, NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.shape() != vb.shape())
      throw ShapeMismatch("elementwise " + shape_string(va.shape()) + " vs " +
                          shape_string(vb.shape()));
    Tensor out = va;
    auto o = out.data();
    const auto d = vb.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (op == Op::add) o[i] += d[i];
      else if (op == Op::sub) o[i] -= d[i];
      else o[i] *= d[i];
    }
    return push(op, {a, b}, std::move(out));
  }

  template <typename F>
  NodeId unary(Op op, NodeId a, F f) {
    Tensor out = value(a);
    for (double& v : out.data()) v = f(v);
    return push(op, {a}, std::move(out));
  }

  void propagate(const Node& n, const Tensor& gout, std::vector<Tensor>& grads) const {
    const auto go = gout.data();
    switch (n.op) {
      case Op::leaf:
        return;
      case Op::add:
      case Op::sub: {
        auto ga = grads[n.inputs[0]].data();
        auto gb = grads[n.inputs[1]].data();
        const double sign = n.op == Op::add ? 1.0 : -1.0;
        for (std::size_t i = 0; i < go.size(); ++i) {
          ga[i] += go[i];
          gb[i] += sign * go[i];
        }
        return;
      }
      case Op::mul: {
        const auto a = value(n.inputs[0]).data();
        const auto b = value(n.inputs[1]).data();
        auto ga = grads[n.inputs[0]].data();
        auto gb = grads[n.inputs[1]].data();
        for (std::size_t i = 0; i < go.size(); ++i) {
          ga[i] += go[i] * b[i];
          gb[i] += go[i] * a[i];
        }
        return;
      }
      case Op::matmul: {
        const Tensor& a = value(n.inputs[0]);
        const Tensor& b = value(n.inputs[1]);
        const std::size_t m = a.rows(), k = a.cols(), nn = b.cols();
        kernel::matmul_bt_acc(go.data(), b.data().data(), grads[n.inputs[0]].data().data(), m,
                              nn, k);
        kernel::matmul_at_acc(a.data().data(), go.data(), grads[n.inputs[1]].data().data(), m,
                              k, nn);
        return;
      }
      case Op::affine: {
        const Tensor& x = value(n.inputs[0]);
        const Tensor& w = value(n.inputs[1]);
        const std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
        // dx = g * W ; dW = g^T * x ; db = column sums of g
        kernel::matmul_acc(go.data(), w.data().data(), grads[n.inputs[0]].data().data(), batch,
                           out, in);
        kernel::matmul_at_acc(go.data(), x.data().data(), grads[n.inputs[1]].data().data(),
                              batch, out, in);
        auto gb = grads[n.inputs[2]].data();
        for (std::size_t i = 0; i < batch; ++i)
          for (std::size_t j = 0; j < out; ++j) gb[j] += go[i * out + j];
        return;
      }
      case Op::leaky_relu: {
        const auto a = value(n.inputs[0]).data();
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += a[i] > 0.0 ? go[i] : n.param * go[i];
        return;
      }
      case Op::tanh: {
        const auto y = n.value.data();
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
        return;
      }
      case Op::exp: {
        const auto y = n.value.data();
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
        return;
      }
      case Op::log: {
        const auto a = value(n.inputs[0]).data();
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / a[i];
        return;
      }
      case Op::sigmoid: {
        const auto y = n.value.data();
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
        return;
      }
      case Op::square: {
        const auto a = value(n.inputs[0]).data();
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += 2.0 * go[i] * a[i];
        return;
      }
      case Op::sum:
      case Op::mean: {
        auto ga = grads[n.inputs[0]].data();
        const double s = n.op == Op::sum ? go[0] : go[0] / static_cast<double>(ga.size());
        for (double& v : ga) v += s;
        return;
      }
      case Op::logsumexp: {
        const Tensor& a = value(n.inputs[0]);
        auto ga = grads[n.inputs[0]].data();
        const std::size_t m = a.rows(), cols = a.cols();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            ga[i * cols + j] += go[i] * std::exp(a.at(i, j) - n.value[i]);
        return;
      }
      case Op::gather_rows: {
        auto gt = grads[n.inputs[0]].data();
        const std::size_t d = n.value.cols();
        for (std::size_t i = 0; i < n.index.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) gt[n.index[i] * d + j] += go[i * d + j];
        return;
      }
      case Op::select_column: {
        auto ga = grads[n.inputs[0]].data();
        const std::size_t cols = value(n.inputs[0]).cols();
        for (std::size_t i = 0; i < n.index.size(); ++i) ga[i * cols + n.index[i]] += go[i];
        return;
      }
      case Op::concat: {
        auto ga = grads[n.inputs[0]].data();
        auto gb = grads[n.inputs[1]].data();
        const std::size_t p = value(n.inputs[0]).cols(), q = value(n.inputs[1]).cols();
        const std::size_t m = n.value.rows();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += go[i * (p + q) + j];
          for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += go[i * (p + q) + p + j];
        }
        return;
      }
      case Op::scale: {
        auto ga = grads[n.inputs[0]].data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += n.param * go[i];
        return;
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct ValueAndGradient {
  double value;
  std::vector<double> gradient;
};

enum class FdMode { central, forward };

/// max_i |g_i - fd_i| / max(1, |g_i|, |fd_i|) between the analytic gradient
/// reported by `f` at `point` and a finite-difference estimate.
inline double grad_check(const std::function<ValueAndGradient(std::span<const double>)>& f,
                         std::span<const double> point, double step = 1e-6,
                         FdMode mode = FdMode::central) {
  const auto finite = [](double v) {
    if (!std::isfinite(v)) throw NonFinite("function evaluated to a non-finite value");
    return v;
  };
  std::vector<double> x(point.begin(), point.end());
  const ValueAndGradient base = f(x);
  finite(base.value);
  if (base.gradient.size() != x.size())
    throw ShapeMismatch("gradient has " + std::to_string(base.gradient.size()) +
                        " entries for a point of dimension " + std::to_string(x.size()));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    double fd;
    x[i] = orig + step;
    const double up = finite(f(x).value);
    if (mode == FdMode::central) {
      x[i] = orig - step;
      const double down = finite(f(x).value);
      fd = (up - down) / (2.0 * step);
    } else {
      fd = (up - base.value) / step;
    }
    x[i] = orig;
    const double g = finite(base.gradient[i]);
    const double err = std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace adclab::ad
