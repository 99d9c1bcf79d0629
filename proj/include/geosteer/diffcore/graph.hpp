#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace geosteer::diff {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Graph* graph() const { return graph_; }

private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape-based reverse-mode differentiation over a fixed primitive set.
///
/// Nodes are appended in evaluation order, so inputs always precede their
/// consumers and the reverse of the append order is a valid reverse
/// topological order. Every recorded value is checked for finiteness; the
/// first offending node raises NumericError naming its id and primitive.
class Graph {
public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    std::string op;
    std::string name;
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf whose gradient is accumulated by backward().
  Var parameter(Matrix value, std::string name = {}) {
    auto v = push("parameter", std::move(value), {}, nullptr, true);
    nodes_[v.id_].name = std::move(name);
    return v;
  }

  Var constant(Matrix value) { return push("constant", std::move(value), {}, nullptr, false); }

  /// Used by the primitive implementations below.
  Var record(std::string op, Matrix value, std::vector<std::size_t> inputs, BackwardFn backward) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_[i].requires_grad;
    return push(std::move(op), std::move(value), std::move(inputs), needs ? std::move(backward) : nullptr, needs);
  }

  /// Reverse pass from a 1x1 output node.
  void backward(Var output) {
    require(output.graph_ == this, "backward: output belongs to another graph");
    const Node& out = nodes_[output.id_];
    require(out.value.rows() == 1 && out.value.cols() == 1,
            "backward: output must be scalar, got " + shape_str(out.value));
    for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
    visit_order_.clear();
    nodes_[output.id_].grad(0, 0) = 1.0;
    for (std::size_t k = output.id_ + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (!n.requires_grad) continue;
      visit_order_.push_back(k);
      if (!n.grad.allFinite())
        throw NumericError("non-finite gradient at node #" + std::to_string(k) + " (" + n.op + ")");
      if (n.backward) n.backward(*this, k);
    }
  }

  const Node& node(std::size_t id) const { return nodes_[id]; }
  Node& node(std::size_t id) { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Node ids in the order the last backward() visited them.
  const std::vector<std::size_t>& visit_order() const { return visit_order_; }

  /// Accumulates `g` into the gradient of node `id` if it participates.
  void accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (n.requires_grad) n.grad += g;
  }

private:
  Var push(std::string op, Matrix value, std::vector<std::size_t> inputs, BackwardFn backward, bool requires_grad) {
    const std::size_t id = nodes_.size();
    if (!value.allFinite())
      throw NumericError("non-finite value at node #" + std::to_string(id) + " (" + op + ")");
    nodes_.push_back(Node{std::move(op), {}, std::move(value), Matrix(), std::move(inputs), std::move(backward), requires_grad});
    return Var(this, id);
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> visit_order_;
};

inline const Matrix& Var::value() const { return graph_->node(id_).value; }
inline const Matrix& Var::grad() const { return graph_->node(id_).grad; }

namespace detail {

enum class Broadcast { same, row, col, scalar };

inline Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (same_shape(a, b)) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw ContractViolation(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

inline Matrix expand(const Matrix& b, Broadcast kind, Index rows, Index cols) {
  switch (kind) {
    case Broadcast::same: return b;
    case Broadcast::scalar: return Matrix::Constant(rows, cols, b(0, 0));
    case Broadcast::row: return b.replicate(rows, 1);
    case Broadcast::col: return b.replicate(1, cols);
  }
  return b;
}

inline Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::same: return g;
    case Broadcast::scalar: return Matrix::Constant(1, 1, g.sum());
    case Broadcast::row: return g.colwise().sum();
    case Broadcast::col: return g.rowwise().sum();
  }
  return g;
}

inline Graph& same_graph(Var a, Var b) {
  require(a.graph() != nullptr && a.graph() == b.graph(), "operands belong to different graphs");
  return *a.graph();
}

}  // namespace detail

// ---------------------------------------------------------------- primitives

/// a * b, or a * b^T when `transpose_b` is set.
inline Var matmul(Var a, Var b, bool transpose_b = false) {
  Graph& g = detail::same_graph(a, b);
  const Index inner_b = transpose_b ? b.cols() : b.rows();
  require(a.cols() == inner_b, "matmul: inner dimensions differ (" + shape_str(a.value()) + ", " +
                                   shape_str(b.value()) + (transpose_b ? "^T)" : ")"));
  Matrix v = transpose_b ? Matrix(a.value() * b.value().transpose()) : Matrix(a.value() * b.value());
  const auto ia = a.id(), ib = b.id();
  return g.record("matmul", std::move(v), {ia, ib}, [ia, ib, transpose_b](Graph& gr, std::size_t self) {
    const Matrix& dy = gr.node(self).grad;
    const Matrix& av = gr.node(ia).value;
    const Matrix& bv = gr.node(ib).value;
    if (gr.node(ia).requires_grad)
      gr.accumulate(ia, transpose_b ? Matrix(dy * bv) : Matrix(dy * bv.transpose()));
    if (gr.node(ib).requires_grad)
      gr.accumulate(ib, transpose_b ? Matrix(dy.transpose() * av) : Matrix(av.transpose() * dy));
  });
}

/// Elementwise a + b; b may be same-shaped, a row (1 x cols), a column
/// (rows x 1) or a scalar (1 x 1).
inline Var add(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const auto kind = detail::broadcast_kind(a.value(), b.value(), "add");
  Matrix v = a.value() + detail::expand(b.value(), kind, a.rows(), a.cols());
  const auto ia = a.id(), ib = b.id();
  return g.record("add", std::move(v), {ia, ib}, [ia, ib, kind](Graph& gr, std::size_t self) {
    const Matrix& dy = gr.node(self).grad;
    gr.accumulate(ia, dy);
    if (gr.node(ib).requires_grad) gr.accumulate(ib, detail::reduce(dy, kind));
  });
}

/// Elementwise a * b with the same broadcasting rules as add().
inline Var mul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const auto kind = detail::broadcast_kind(a.value(), b.value(), "mul");
  Matrix bx = detail::expand(b.value(), kind, a.rows(), a.cols());
  Matrix v = a.value().cwiseProduct(bx);
  const auto ia = a.id(), ib = b.id();
  return g.record("mul", std::move(v), {ia, ib}, [ia, ib, kind](Graph& gr, std::size_t self) {
    const Matrix& dy = gr.node(self).grad;
    const Matrix& av = gr.node(ia).value;
    const Matrix& bv = gr.node(ib).value;
    if (gr.node(ia).requires_grad)
      gr.accumulate(ia, dy.cwiseProduct(detail::expand(bv, kind, av.rows(), av.cols())));
    if (gr.node(ib).requires_grad) gr.accumulate(ib, detail::reduce(dy.cwiseProduct(av), kind));
  });
}

inline Var relu(Var a) {
  Graph& g = *a.graph();
  Matrix v = a.value().cwiseMax(0.0);
  const auto ia = a.id();
  return g.record("relu", std::move(v), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& x = gr.node(ia).value;
    gr.accumulate(ia, gr.node(self).grad.cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

inline Var sqrt(Var a) {
  Graph& g = *a.graph();
  require((a.value().array() >= 0.0).all(), "sqrt: negative input");
  Matrix v = a.value().cwiseSqrt();
  const auto ia = a.id();
  return g.record("sqrt", std::move(v), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& y = gr.node(self).value;
    gr.accumulate(ia, (0.5 * gr.node(self).grad.array() / y.array()).matrix());
  });
}

inline Var exp(Var a) {
  Graph& g = *a.graph();
  Matrix v = exp_elementwise(a.value().array()).matrix();
  const auto ia = a.id();
  return g.record("exp", std::move(v), {ia}, [ia](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.node(self).grad.cwiseProduct(gr.node(self).value));
  });
}

inline Var reciprocal(Var a) {
  Graph& g = *a.graph();
  Matrix v = a.value().cwiseInverse();
  const auto ia = a.id();
  return g.record("reciprocal", std::move(v), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& y = gr.node(self).value;
    gr.accumulate(ia, (-gr.node(self).grad.array() * y.array().square()).matrix());
  });
}

inline Var scale(Var a, double c) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.record("scale", Matrix(c * a.value()), {ia},
                  [ia, c](Graph& gr, std::size_t self) { gr.accumulate(ia, c * gr.node(self).grad); });
}

inline Var add_scalar(Var a, double c) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  Matrix v = (a.value().array() + c).matrix();
  return g.record("add_scalar", std::move(v), {ia},
                  [ia](Graph& gr, std::size_t self) { gr.accumulate(ia, gr.node(self).grad); });
}

inline Var transpose(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.record("transpose", Matrix(a.value().transpose()), {ia}, [ia](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.node(self).grad.transpose());
  });
}

/// Rows of `a` picked by index (multiplication by a row-selection matrix).
inline Var select_rows(Var a, std::vector<Index> rows) {
  Graph& g = *a.graph();
  Matrix v(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < a.rows(), "select_rows: index out of range");
    v.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  const auto ia = a.id();
  return g.record("select_rows", std::move(v), {ia}, [ia, rows = std::move(rows)](Graph& gr, std::size_t self) {
    const Matrix& dy = gr.node(self).grad;
    Matrix dx = Matrix::Zero(gr.node(ia).value.rows(), gr.node(ia).value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) dx.row(rows[i]) += dy.row(static_cast<Index>(i));
    gr.accumulate(ia, dx);
  });
}

/// Sum of all entries, as a 1x1 node.
inline Var sum(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.record("sum", Matrix::Constant(1, 1, a.value().sum()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& x = gr.node(ia).value;
    gr.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), gr.node(self).grad(0, 0)));
  });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Sum of squared entries, as a 1x1 node.
inline Var squared_norm(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.record("squared_norm", Matrix::Constant(1, 1, a.value().squaredNorm()), {ia},
                  [ia](Graph& gr, std::size_t self) {
                    gr.accumulate(ia, 2.0 * gr.node(self).grad(0, 0) * gr.node(ia).value);
                  });
}

/// Per-row sum of squares, as a rows x 1 node.
inline Var row_squared_norm(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  Matrix v = a.value().rowwise().squaredNorm();
  return g.record("row_squared_norm", std::move(v), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& x = gr.node(ia).value;
    const Matrix& dy = gr.node(self).grad;
    gr.accumulate(ia, Matrix(2.0 * (x.array().colwise() * dy.col(0).array()).matrix()));
  });
}

/// Row-wise softmax of a / temperature.
inline Var softmax_rows(Var a, double temperature) {
  require(temperature > 0.0, "softmax_rows: temperature must be positive");
  Graph& g = *a.graph();
  Matrix z = a.value() / temperature;
  Matrix v(z.rows(), z.cols());
  for (Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    RowVector e = exp_elementwise(z.row(r).array() - m).matrix();
    v.row(r) = e / e.sum();
  }
  const auto ia = a.id();
  return g.record("softmax", std::move(v), {ia}, [ia, temperature](Graph& gr, std::size_t self) {
    const Matrix& y = gr.node(self).value;
    const Matrix& dy = gr.node(self).grad;
    Matrix dx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double inner = dy.row(r).dot(y.row(r));
      dx.row(r) = (y.row(r).array() * (dy.row(r).array() - inner)).matrix() / temperature;
    }
    gr.accumulate(ia, dx);
  });
}

/// Result of a training-mode normalization: the output node plus the batch
/// statistics used, for running-statistic updates.
struct NormalizationOut {
  Var y;
  RowVector batch_mean;
  RowVector batch_var;  // biased (divides by batch size)
};

/// Batch normalization with batch statistics:
/// y = gamma * (x - mean) / sqrt(var + eps) + beta, column-wise over rows.
inline NormalizationOut batch_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
  Graph& g = detail::same_graph(x, gamma);
  require(x.rows() >= 2, "batch_norm: batch must hold at least two rows");
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && same_shape(gamma.value(), beta.value()),
          "batch_norm: scale/shift must be 1 x features");
  const Matrix& xv = x.value();
  const double n = static_cast<double>(xv.rows());
  RowVector mu = xv.colwise().mean();
  Matrix centered = xv.rowwise() - mu;
  RowVector var = centered.colwise().squaredNorm() / n;
  RowVector inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  Var out = g.record("batch_norm", std::move(y), {ix, ig, ib},
                     [ix, ig, ib, xhat, inv_std, n](Graph& gr, std::size_t self) {
                       const Matrix& dy = gr.node(self).grad;
                       const RowVector gam = gr.node(ig).value.row(0);
                       if (gr.node(ig).requires_grad) gr.accumulate(ig, dy.cwiseProduct(xhat).colwise().sum());
                       if (gr.node(ib).requires_grad) gr.accumulate(ib, dy.colwise().sum());
                       if (gr.node(ix).requires_grad) {
                         Matrix dxhat = dy.array().rowwise() * gam.array();
                         RowVector s1 = dxhat.colwise().sum();
                         RowVector s2 = dxhat.cwiseProduct(xhat).colwise().sum();
                         Matrix dx = (n * dxhat.array()).rowwise() - s1.array();
                         dx -= Matrix(xhat.array().rowwise() * s2.array());
                         dx = (dx.array().rowwise() * (inv_std.array() / n)).matrix();
                         gr.accumulate(ix, dx);
                       }
                     });
  return {out, mu, var};
}

// Convenience compositions.
inline Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }
inline Var square(Var a) { return mul(a, a); }

}  // namespace geosteer::diff
