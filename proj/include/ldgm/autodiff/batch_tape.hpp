#pragma once

// Reverse-mode tape whose nodes are dense arrays (typically one column per
// sample point). Same adjoint semantics as the scalar Tape; used on the
// training path where per-scalar bookkeeping would dominate the cost.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ldgm/errors.hpp"

namespace ldgm::ad {

using Array = Eigen::ArrayXXd;

enum class BatchOp : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kScale,
  kShift,
  kMatMul,
  kAddColumn,  // a (r x c) + b (r x 1) broadcast over columns
  kTanh,
  kSigmoid,
  kExp,
  kElu,
  kRelu,
  kSelect,  // aux * a + (1 - aux) * b, aux a constant 0/1 mask
  kRow,     // row `index` of a
  kMean,    // mean of all entries, 1 x 1
  kSum,     // sum of all entries, 1 x 1
};

class BatchTape;

class BatchVar {
 public:
  BatchVar() = default;

  BatchTape* tape() const { return tape_; }
  std::int32_t node() const { return node_; }
  bool valid() const { return tape_ != nullptr; }
  inline const Array& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1 x 1 variable.
  double scalar() const { return value()(0, 0); }

 private:
  friend class BatchTape;
  BatchVar(BatchTape* tape, std::int32_t node) : tape_(tape), node_(node) {}

  BatchTape* tape_ = nullptr;
  std::int32_t node_ = -1;
};

class BatchTape {
 public:
  struct Node {
    BatchOp op = BatchOp::kConstant;
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    double aux = 0.0;
    bool needs_grad = false;
    Array value;
    Array mask;
  };

  BatchTape() { nodes_.reserve(1024); }
  BatchTape(const BatchTape&) = delete;
  BatchTape& operator=(const BatchTape&) = delete;

  BatchVar constant(Array v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
  }
  BatchVar constant(Eigen::Index rows, Eigen::Index cols, double v) {
    return constant(Array::Constant(rows, cols, v));
  }
  BatchVar parameter(Array v) {
    Node n;
    n.op = BatchOp::kParameter;
    n.needs_grad = true;
    n.value = std::move(v);
    return push(std::move(n));
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::int32_t id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)];
  }

  BatchVar add(const BatchVar& a, const BatchVar& b) {
    same_shape(a, b, "add");
    return binary(BatchOp::kAdd, a, b, val(a) + val(b));
  }
  BatchVar sub(const BatchVar& a, const BatchVar& b) {
    same_shape(a, b, "sub");
    return binary(BatchOp::kSub, a, b, val(a) - val(b));
  }
  BatchVar mul(const BatchVar& a, const BatchVar& b) {
    same_shape(a, b, "mul");
    return binary(BatchOp::kMul, a, b, val(a) * val(b));
  }
  BatchVar scale(const BatchVar& a, double c) {
    return unary(BatchOp::kScale, a, c, val(a) * c);
  }
  BatchVar shift(const BatchVar& a, double c) {
    return unary(BatchOp::kShift, a, c, val(a) + c);
  }
  BatchVar matmul(const BatchVar& a, const BatchVar& b) {
    if (val(a).cols() != val(b).rows()) {
      throw ShapeError("matmul: inner dimensions " +
                       std::to_string(val(a).cols()) + " and " +
                       std::to_string(val(b).rows()) + " differ");
    }
    Array out = (val(a).matrix() * val(b).matrix()).array();
    return binary(BatchOp::kMatMul, a, b, std::move(out));
  }
  BatchVar add_column(const BatchVar& a, const BatchVar& column) {
    if (val(column).cols() != 1 || val(column).rows() != val(a).rows()) {
      throw ShapeError("add_column: bias shape mismatch");
    }
    Array out = val(a).colwise() + val(column).col(0);
    return binary(BatchOp::kAddColumn, a, column, std::move(out));
  }
  BatchVar tanh(const BatchVar& a) {
    return unary(BatchOp::kTanh, a, 0.0, val(a).tanh());
  }
  BatchVar sigmoid(const BatchVar& a) {
    return unary(BatchOp::kSigmoid, a, 0.0, 1.0 / (1.0 + (-val(a)).exp()));
  }
  BatchVar exp(const BatchVar& a) {
    return unary(BatchOp::kExp, a, 0.0, val(a).exp());
  }
  BatchVar elu(const BatchVar& a, double alpha) {
    const Array& x = val(a);
    Array out = (x > 0.0).select(x, alpha * (x.exp() - 1.0));
    return unary(BatchOp::kElu, a, alpha, std::move(out));
  }
  BatchVar relu(const BatchVar& a) {
    return unary(BatchOp::kRelu, a, 0.0, val(a).max(0.0));
  }
  /// Elementwise mask ? a : b. The mask is treated as a constant.
  BatchVar select(const Array& mask, const BatchVar& a, const BatchVar& b) {
    same_shape(a, b, "select");
    if (mask.rows() != val(a).rows() || mask.cols() != val(a).cols()) {
      throw ShapeError("select: mask shape mismatch");
    }
    Array out = mask * val(a) + (1.0 - mask) * val(b);
    BatchVar r = binary(BatchOp::kSelect, a, b, std::move(out));
    nodes_.back().mask = mask;
    return r;
  }
  BatchVar row(const BatchVar& a, Eigen::Index index) {
    if (index < 0 || index >= val(a).rows()) {
      throw ShapeError("row index " + std::to_string(index) + " out of range");
    }
    Array out = val(a).row(index);
    return unary(BatchOp::kRow, a, static_cast<double>(index), std::move(out));
  }
  BatchVar mean(const BatchVar& a) {
    Array out(1, 1);
    out(0, 0) = val(a).size() > 0 ? val(a).mean() : 0.0;
    return unary(BatchOp::kMean, a, 0.0, std::move(out));
  }
  BatchVar sum(const BatchVar& a) {
    Array out(1, 1);
    out(0, 0) = val(a).sum();
    return unary(BatchOp::kSum, a, 0.0, std::move(out));
  }

  /// Gradient arrays for the given parameter nodes, in the given order.
  /// `output` must be 1 x 1.
  std::vector<Array> gradient(const BatchVar& output,
                              const std::vector<BatchVar>& params) const {
    auto adj = leaf_adjoints(output);
    std::vector<Array> out;
    out.reserve(params.size());
    for (const auto& p : params) {
      auto& a = adj[static_cast<std::size_t>(p.node())];
      const auto& v = nodes_[static_cast<std::size_t>(p.node())].value;
      out.push_back(a.size() ? std::move(a) : Array::Zero(v.rows(), v.cols()));
    }
    return out;
  }

 private:
  friend class BatchVar;

  // Interior adjoints are released once pushed to their inputs, so only
  // leaf entries survive.
  std::vector<Array> leaf_adjoints(const BatchVar& output) const {
    if (output.tape() != this) {
      throw InvalidNodeError("output does not live on this tape");
    }
    check(output.node());
    const auto& out_node = nodes_[static_cast<std::size_t>(output.node())];
    if (out_node.value.size() != 1) {
      throw ShapeError("backward requires a scalar (1 x 1) output");
    }
    std::vector<Array> adj(nodes_.size());
    adj[static_cast<std::size_t>(output.node())] = Array::Ones(1, 1);
    for (std::int32_t i = output.node(); i >= 0; --i) {
      auto& g = adj[static_cast<std::size_t>(i)];
      if (g.size() == 0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.lhs < 0) continue;
      propagate(n, g, adj);
      g.resize(0, 0);
    }
    return adj;
  }

  const Array& val(const BatchVar& v) const {
    if (v.tape() != this) {
      throw InvalidNodeError("variable does not live on this tape");
    }
    return nodes_[static_cast<std::size_t>(v.node())].value;
  }

  void check(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      throw InvalidNodeError("node id " + std::to_string(id) +
                             " out of range (tape size " +
                             std::to_string(nodes_.size()) + ")");
    }
  }

  void same_shape(const BatchVar& a, const BatchVar& b, const char* what) const {
    const Array& x = val(a);
    const Array& y = val(b);
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
      throw ShapeError(std::string(what) + ": shapes " +
                       std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()) + " and " +
                       std::to_string(y.rows()) + "x" +
                       std::to_string(y.cols()) + " differ");
    }
  }

  BatchVar push(Node n) {
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  bool grad(const BatchVar& v) const {
    return nodes_[static_cast<std::size_t>(v.node())].needs_grad;
  }

  BatchVar unary(BatchOp op, const BatchVar& a, double aux, Array value) {
    Node n;
    n.op = op;
    n.lhs = a.node();
    n.aux = aux;
    n.needs_grad = grad(a);
    n.value = std::move(value);
    if (!n.needs_grad) n.op = BatchOp::kConstant, n.lhs = -1;
    return push(std::move(n));
  }

  BatchVar binary(BatchOp op, const BatchVar& a, const BatchVar& b,
                  Array value) {
    Node n;
    n.op = op;
    n.lhs = a.node();
    n.rhs = b.node();
    n.needs_grad = grad(a) || grad(b);
    n.value = std::move(value);
    if (!n.needs_grad) n.op = BatchOp::kConstant, n.lhs = n.rhs = -1;
    return push(std::move(n));
  }

  static void accumulate(std::vector<Array>& adj, std::int32_t id,
                         const Array& contribution) {
    auto& slot = adj[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
      slot = contribution;
    } else {
      slot += contribution;
    }
  }

  void propagate(const Node& n, const Array& g, std::vector<Array>& adj) const {
    const auto& a = nodes_[static_cast<std::size_t>(n.lhs)];
    const bool ga = a.needs_grad;
    const bool gb =
        n.rhs >= 0 && nodes_[static_cast<std::size_t>(n.rhs)].needs_grad;
    const Array* bv =
        n.rhs >= 0 ? &nodes_[static_cast<std::size_t>(n.rhs)].value : nullptr;
    switch (n.op) {
      case BatchOp::kAdd:
        if (ga) accumulate(adj, n.lhs, g);
        if (gb) accumulate(adj, n.rhs, g);
        break;
      case BatchOp::kSub:
        if (ga) accumulate(adj, n.lhs, g);
        if (gb) accumulate(adj, n.rhs, -g);
        break;
      case BatchOp::kMul:
        if (ga) accumulate(adj, n.lhs, g * *bv);
        if (gb) accumulate(adj, n.rhs, g * a.value);
        break;
      case BatchOp::kScale:
        accumulate(adj, n.lhs, g * n.aux);
        break;
      case BatchOp::kShift:
        accumulate(adj, n.lhs, g);
        break;
      case BatchOp::kMatMul:
        if (ga) {
          accumulate(adj, n.lhs,
                     (g.matrix() * bv->matrix().transpose()).array());
        }
        if (gb) {
          accumulate(adj, n.rhs,
                     (a.value.matrix().transpose() * g.matrix()).array());
        }
        break;
      case BatchOp::kAddColumn:
        if (ga) accumulate(adj, n.lhs, g);
        if (gb) accumulate(adj, n.rhs, g.rowwise().sum());
        break;
      case BatchOp::kTanh:
        accumulate(adj, n.lhs, g * (1.0 - n.value.square()));
        break;
      case BatchOp::kSigmoid:
        accumulate(adj, n.lhs, g * n.value * (1.0 - n.value));
        break;
      case BatchOp::kExp:
        accumulate(adj, n.lhs, g * n.value);
        break;
      case BatchOp::kElu:
        accumulate(adj, n.lhs,
                   g * (a.value > 0.0).select(Array::Ones(g.rows(), g.cols()),
                                              n.value + n.aux));
        break;
      case BatchOp::kRelu:
        accumulate(adj, n.lhs, g * (a.value > 0.0).cast<double>());
        break;
      case BatchOp::kSelect:
        if (ga) accumulate(adj, n.lhs, g * n.mask);
        if (gb) accumulate(adj, n.rhs, g * (1.0 - n.mask));
        break;
      case BatchOp::kRow: {
        Array full = Array::Zero(a.value.rows(), a.value.cols());
        full.row(static_cast<Eigen::Index>(n.aux)) = g;
        accumulate(adj, n.lhs, full);
        break;
      }
      case BatchOp::kMean:
        accumulate(adj, n.lhs,
                   Array::Constant(a.value.rows(), a.value.cols(),
                                   g(0, 0) / static_cast<double>(
                                                 std::max<Eigen::Index>(
                                                     a.value.size(), 1))));
        break;
      case BatchOp::kSum:
        accumulate(adj, n.lhs,
                   Array::Constant(a.value.rows(), a.value.cols(), g(0, 0)));
        break;
      case BatchOp::kConstant:
      case BatchOp::kParameter:
        break;
    }
  }

  std::vector<Node> nodes_;
};

inline const Array& BatchVar::value() const {
  if (!tape_) throw InvalidNodeError("unbound batch variable");
  return tape_->val(*this);
}

inline BatchVar operator+(const BatchVar& a, const BatchVar& b) {
  return a.tape()->add(a, b);
}
inline BatchVar operator-(const BatchVar& a, const BatchVar& b) {
  return a.tape()->sub(a, b);
}
inline BatchVar operator*(const BatchVar& a, const BatchVar& b) {
  return a.tape()->mul(a, b);
}
inline BatchVar operator-(const BatchVar& a) { return a.tape()->scale(a, -1.0); }
inline BatchVar operator*(double c, const BatchVar& a) {
  return a.tape()->scale(a, c);
}
inline BatchVar operator*(const BatchVar& a, double c) {
  return a.tape()->scale(a, c);
}
inline BatchVar operator+(const BatchVar& a, double c) {
  return a.tape()->shift(a, c);
}
inline BatchVar operator+(double c, const BatchVar& a) {
  return a.tape()->shift(a, c);
}
inline BatchVar operator-(const BatchVar& a, double c) {
  return a.tape()->shift(a, -c);
}
inline BatchVar operator-(double c, const BatchVar& a) {
  return a.tape()->shift(a.tape()->scale(a, -1.0), c);
}

inline BatchVar square(const BatchVar& a) { return a * a; }
inline BatchVar mean(const BatchVar& a) { return a.tape()->mean(a); }
inline BatchVar sum(const BatchVar& a) { return a.tape()->sum(a); }
inline BatchVar tanh(const BatchVar& a) { return a.tape()->tanh(a); }
inline BatchVar sigmoid(const BatchVar& a) { return a.tape()->sigmoid(a); }
inline BatchVar exp(const BatchVar& a) { return a.tape()->exp(a); }
inline BatchVar elu(const BatchVar& a, double alpha) {
  return a.tape()->elu(a, alpha);
}
inline BatchVar relu(const BatchVar& a) { return a.tape()->relu(a); }

}  // namespace ldgm::ad
