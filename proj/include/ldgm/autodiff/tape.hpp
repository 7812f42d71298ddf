#pragma once

// Scalar reverse-mode tape. Every arithmetic operation on a TrackedScalar
// appends one node holding the operation kind, its inputs and the local
// partial derivatives; backward() accumulates adjoints in reverse id order.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ldgm/errors.hpp"

namespace ldgm::ad {

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,  // aux * a
  kShift,  // a + aux
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSin,
  kCos,
  kSqrt,
  kElu,  // aux = alpha
  kRelu,
};

struct Node {
  Op op = Op::kConstant;
  std::int32_t lhs = -1;
  std::int32_t rhs = -1;
  double aux = 0.0;
  double value = 0.0;
  double d_lhs = 0.0;
  double d_rhs = 0.0;
};

namespace detail {

struct Evaluated {
  double value;
  double d_lhs;
  double d_rhs;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double elu(double x, double alpha) {
  return x > 0.0 ? x : alpha * std::expm1(x);
}

// Shared by recording and replay so both produce identical bits.
inline Evaluated evaluate(Op op, double a, double b, double aux) {
  switch (op) {
    case Op::kAdd:
      return {a + b, 1.0, 1.0};
    case Op::kSub:
      return {a - b, 1.0, -1.0};
    case Op::kMul:
      return {a * b, b, a};
    case Op::kDiv:
      return {a / b, 1.0 / b, -a / (b * b)};
    case Op::kNeg:
      return {-a, -1.0, 0.0};
    case Op::kScale:
      return {aux * a, aux, 0.0};
    case Op::kShift:
      return {a + aux, 1.0, 0.0};
    case Op::kTanh: {
      const double y = std::tanh(a);
      return {y, 1.0 - y * y, 0.0};
    }
    case Op::kSigmoid: {
      const double y = sigmoid(a);
      return {y, y * (1.0 - y), 0.0};
    }
    case Op::kExp: {
      const double y = std::exp(a);
      return {y, y, 0.0};
    }
    case Op::kLog:
      return {std::log(a), 1.0 / a, 0.0};
    case Op::kSin:
      return {std::sin(a), std::cos(a), 0.0};
    case Op::kCos:
      return {std::cos(a), -std::sin(a), 0.0};
    case Op::kSqrt: {
      const double y = std::sqrt(a);
      return {y, 0.5 / y, 0.0};
    }
    case Op::kElu: {
      const double y = elu(a, aux);
      return {y, a > 0.0 ? 1.0 : y + aux, 0.0};
    }
    case Op::kRelu:
      return {a > 0.0 ? a : 0.0, a > 0.0 ? 1.0 : 0.0, 0.0};
    case Op::kConstant:
    case Op::kParameter:
      break;
  }
  throw InvalidNodeError("leaf nodes are not evaluated");
}

inline bool is_unary(Op op) {
  return op != Op::kAdd && op != Op::kSub && op != Op::kMul && op != Op::kDiv;
}

}  // namespace detail

class Tape;

/// A real value together with the id of the tape node that produced it.
/// A default or double-constructed scalar has no tape and acts as a
/// constant; mixing it with a tracked scalar records it on that tape.
class TrackedScalar {
 public:
  TrackedScalar() = default;
  TrackedScalar(double v) : value_(v) {}  // NOLINT: implicit constant promotion

  double value() const { return value_; }
  std::int32_t node() const { return node_; }
  Tape* tape() const { return tape_; }
  bool tracked() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  TrackedScalar(Tape* tape, std::int32_t node, double value)
      : tape_(tape), node_(node), value_(value) {}

  Tape* tape_ = nullptr;
  std::int32_t node_ = -1;
  double value_ = 0.0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  TrackedScalar constant(double v) { return leaf(Op::kConstant, v); }
  TrackedScalar parameter(double v) { return leaf(Op::kParameter, v); }

  TrackedScalar apply(Op op, const TrackedScalar& a, double aux = 0.0) {
    const std::int32_t ia = attach(a);
    const auto e = detail::evaluate(op, a.value(), 0.0, aux);
    return push({op, ia, -1, aux, e.value, e.d_lhs, 0.0});
  }

  TrackedScalar apply(Op op, const TrackedScalar& a, const TrackedScalar& b) {
    const std::int32_t ia = attach(a);
    const std::int32_t ib = attach(b);
    const auto e = detail::evaluate(op, a.value(), b.value(), 0.0);
    return push({op, ia, ib, 0.0, e.value, e.d_lhs, e.d_rhs});
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::int32_t id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)];
  }
  bool is_parameter(std::int32_t id) const {
    return node(id).op == Op::kParameter;
  }

  /// Overwrite a leaf value; call replay() to propagate.
  void set_leaf(std::int32_t id, double v) {
    check(id);
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op != Op::kConstant && n.op != Op::kParameter) {
      throw InvalidNodeError("node " + std::to_string(id) + " is not a leaf");
    }
    n.value = v;
  }

  /// Re-evaluate every interior node from the leaves in id order.
  std::vector<double> replay() {
    std::vector<double> values(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      auto& n = nodes_[i];
      if (n.op != Op::kConstant && n.op != Op::kParameter) {
        const double a = values[static_cast<std::size_t>(n.lhs)];
        const double b =
            n.rhs >= 0 ? values[static_cast<std::size_t>(n.rhs)] : 0.0;
        const auto e = detail::evaluate(n.op, a, b, n.aux);
        n.value = e.value;
        n.d_lhs = e.d_lhs;
        n.d_rhs = e.d_rhs;
      }
      values[i] = n.value;
    }
    return values;
  }

  /// Adjoints of every node with respect to `output`.
  std::vector<double> adjoints(const TrackedScalar& output) const {
    if (output.tape() != this) {
      throw InvalidNodeError("output does not live on this tape");
    }
    check(output.node());
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[static_cast<std::size_t>(output.node())] = 1.0;
    for (std::int32_t i = output.node(); i >= 0; --i) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      const double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0 || n.lhs < 0) continue;
      adj[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
      if (n.rhs >= 0) adj[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
    }
    return adj;
  }

 private:
  void check(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      throw InvalidNodeError("node id " + std::to_string(id) +
                             " out of range (tape size " +
                             std::to_string(nodes_.size()) + ")");
    }
  }

  TrackedScalar leaf(Op op, double v) { return push({op, -1, -1, 0.0, v, 0, 0}); }

  TrackedScalar push(Node n) {
    nodes_.push_back(n);
    return {this, static_cast<std::int32_t>(nodes_.size() - 1), n.value};
  }

  std::int32_t attach(const TrackedScalar& s) {
    if (s.tape() == this) return s.node();
    if (s.tape() != nullptr) {
      throw InvalidNodeError("scalars from different tapes cannot be mixed");
    }
    return constant(s.value()).node();
  }

  std::vector<Node> nodes_;
};

/// d(output)/d(p) for every parameter node p on the tape; parameters not
/// reachable from `output` map to zero.
inline std::map<std::int32_t, double> backward(const Tape& tape,
                                               const TrackedScalar& output) {
  const auto adj = tape.adjoints(output);
  std::map<std::int32_t, double> grads;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    if (tape.node(static_cast<std::int32_t>(i)).op == Op::kParameter) {
      grads.emplace(static_cast<std::int32_t>(i), adj[i]);
    }
  }
  return grads;
}

namespace detail {

inline Tape* common_tape(const TrackedScalar& a, const TrackedScalar& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    throw InvalidNodeError("scalars from different tapes cannot be mixed");
  }
  return a.tape() ? a.tape() : b.tape();
}

inline TrackedScalar binary(Op op, const TrackedScalar& a,
                            const TrackedScalar& b) {
  if (Tape* t = common_tape(a, b)) return t->apply(op, a, b);
  return evaluate(op, a.value(), b.value(), 0.0).value;
}

inline TrackedScalar unary(Op op, const TrackedScalar& a, double aux = 0.0) {
  if (a.tape()) return a.tape()->apply(op, a, aux);
  return evaluate(op, a.value(), 0.0, aux).value;
}

}  // namespace detail

inline TrackedScalar operator+(const TrackedScalar& a, const TrackedScalar& b) {
  if (!b.tracked()) return detail::unary(Op::kShift, a, b.value());
  if (!a.tracked()) return detail::unary(Op::kShift, b, a.value());
  return detail::binary(Op::kAdd, a, b);
}
inline TrackedScalar operator-(const TrackedScalar& a, const TrackedScalar& b) {
  if (!b.tracked()) return detail::unary(Op::kShift, a, -b.value());
  return detail::binary(Op::kSub, a, b);
}
inline TrackedScalar operator*(const TrackedScalar& a, const TrackedScalar& b) {
  if (!b.tracked()) return detail::unary(Op::kScale, a, b.value());
  if (!a.tracked()) return detail::unary(Op::kScale, b, a.value());
  return detail::binary(Op::kMul, a, b);
}
inline TrackedScalar operator/(const TrackedScalar& a, const TrackedScalar& b) {
  if (!b.tracked()) return detail::unary(Op::kScale, a, 1.0 / b.value());
  return detail::binary(Op::kDiv, a, b);
}
inline TrackedScalar operator-(const TrackedScalar& a) {
  return detail::unary(Op::kNeg, a);
}
inline TrackedScalar operator+(double a, const TrackedScalar& b) {
  return TrackedScalar(a) + b;
}
inline TrackedScalar operator-(double a, const TrackedScalar& b) {
  return TrackedScalar(a) - b;
}
inline TrackedScalar operator*(double a, const TrackedScalar& b) {
  return TrackedScalar(a) * b;
}

inline TrackedScalar tanh(const TrackedScalar& a) {
  return detail::unary(Op::kTanh, a);
}
inline TrackedScalar sigmoid(const TrackedScalar& a) {
  return detail::unary(Op::kSigmoid, a);
}
inline TrackedScalar exp(const TrackedScalar& a) {
  return detail::unary(Op::kExp, a);
}
inline TrackedScalar log(const TrackedScalar& a) {
  return detail::unary(Op::kLog, a);
}
inline TrackedScalar sin(const TrackedScalar& a) {
  return detail::unary(Op::kSin, a);
}
inline TrackedScalar cos(const TrackedScalar& a) {
  return detail::unary(Op::kCos, a);
}
inline TrackedScalar sqrt(const TrackedScalar& a) {
  return detail::unary(Op::kSqrt, a);
}
inline TrackedScalar elu(const TrackedScalar& a, double alpha) {
  return detail::unary(Op::kElu, a, alpha);
}
inline TrackedScalar relu(const TrackedScalar& a) {
  return detail::unary(Op::kRelu, a);
}

}  // namespace ldgm::ad
