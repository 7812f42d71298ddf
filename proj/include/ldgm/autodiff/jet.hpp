#pragma once

// Truncated Taylor jets along one input direction. Coefficient j holds
// (1/j!) d^j f / ds^j. The coefficient type T is a scalar-like value
// (double, TrackedScalar or BatchVar); when T is tape-tracked, every
// coefficient stays differentiable with respect to the tape parameters.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ldgm/autodiff/activation.hpp"
#include "ldgm/autodiff/batch_tape.hpp"
#include "ldgm/autodiff/tape.hpp"
#include "ldgm/errors.hpp"

namespace ldgm::ad {

inline constexpr int kMaxJetOrder = 6;

/// Smallest |pre-activation| at which elu may be expanded past first order.
inline constexpr double kKinkMargin = 1e-3;

template <class T>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static double constant_like(double, double v) { return v; }
  static double select_positive(double x, double a, double b) {
    return x > 0.0 ? a : b;
  }
  static double min_abs(double x) { return std::abs(x); }
  static double tanh(double x) { return std::tanh(x); }
  static double sigmoid(double x) { return detail::sigmoid(x); }
  static double elu(double x, double alpha) { return detail::elu(x, alpha); }
  static double relu(double x) { return x > 0.0 ? x : 0.0; }
};

template <>
struct ScalarTraits<TrackedScalar> {
  using S = TrackedScalar;
  static S constant_like(const S&, double v) { return S(v); }
  static S select_positive(const S& x, const S& a, const S& b) {
    return x.value() > 0.0 ? a : b;
  }
  static double min_abs(const S& x) { return std::abs(x.value()); }
  static S tanh(const S& x) { return ad::tanh(x); }
  static S sigmoid(const S& x) { return ad::sigmoid(x); }
  static S elu(const S& x, double alpha) { return ad::elu(x, alpha); }
  static S relu(const S& x) { return ad::relu(x); }
};

template <>
struct ScalarTraits<BatchVar> {
  using S = BatchVar;
  static S constant_like(const S& ref, double v) {
    return ref.tape()->constant(ref.rows(), ref.cols(), v);
  }
  static S select_positive(const S& x, const S& a, const S& b) {
    const Array mask = (x.value() > 0.0).cast<double>();
    return x.tape()->select(mask, a, b);
  }
  static double min_abs(const S& x) { return x.value().abs().minCoeff(); }
  static S tanh(const S& x) { return ad::tanh(x); }
  static S sigmoid(const S& x) { return ad::sigmoid(x); }
  static S elu(const S& x, double alpha) { return ad::elu(x, alpha); }
  static S relu(const S& x) { return ad::relu(x); }
};

inline void check_jet_order(int order, int cap = kMaxJetOrder) {
  if (order < 0) throw UnsupportedOrderError("negative jet order");
  if (order > cap || order > kMaxJetOrder) {
    throw UnsupportedOrderError(
        "derivative order " + std::to_string(order) +
        " exceeds the jet cap of " +
        std::to_string(std::min(cap, kMaxJetOrder)));
  }
}

template <class T>
class Jet {
 public:
  using Coeff = std::optional<T>;  // nullopt marks a structural zero

  Jet() = default;
  explicit Jet(std::vector<Coeff> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty() || !coeffs_[0]) {
      throw ShapeError("jet needs a primal coefficient");
    }
  }

  /// Order-0 jet of a primal value.
  static Jet constant(T primal) { return Jet({std::move(primal)}); }

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  const T& primal() const { return *coeffs_[0]; }
  bool is_zero(int j) const { return !coeffs_.at(static_cast<std::size_t>(j)); }
  const Coeff& raw(int j) const { return coeffs_.at(static_cast<std::size_t>(j)); }

  /// Coefficient j, materializing structural zeros.
  T coeff(int j) const {
    const auto& c = coeffs_.at(static_cast<std::size_t>(j));
    return c ? *c : ScalarTraits<T>::constant_like(primal(), 0.0);
  }

  /// j-th directional derivative, j! * coeff(j).
  T derivative(int j) const {
    double f = 1.0;
    for (int i = 2; i <= j; ++i) f *= i;
    if (j <= 1) return coeff(j);
    return f * coeff(j);
  }

 private:
  std::vector<Coeff> coeffs_;
};

namespace detail {

template <class T>
std::optional<T> add_opt(const std::optional<T>& a, const std::optional<T>& b) {
  if (a && b) return *a + *b;
  return a ? a : b;
}

template <class T>
std::optional<T> cauchy(const Jet<T>& a, const Jet<T>& b, int j) {
  std::optional<T> acc;
  for (int i = 0; i <= j; ++i) {
    if (a.is_zero(i) || b.is_zero(j - i)) continue;
    T term = *a.raw(i) * *b.raw(j - i);
    acc = acc ? std::optional<T>(*acc + term) : std::optional<T>(term);
  }
  return acc;
}

// Coefficient m of y*y using the symmetric pairing.
template <class T>
std::optional<T> self_cauchy(const std::vector<std::optional<T>>& y, int m) {
  std::optional<T> acc;
  auto push = [&acc](T term) {
    acc = acc ? std::optional<T>(*acc + term) : std::optional<T>(term);
  };
  for (int i = 0; 2 * i < m; ++i) {
    const auto& a = y[static_cast<std::size_t>(i)];
    const auto& b = y[static_cast<std::size_t>(m - i)];
    if (a && b) push(2.0 * (*a * *b));
  }
  if (m % 2 == 0) {
    const auto& c = y[static_cast<std::size_t>(m / 2)];
    if (c) push(*c * *c);
  }
  return acc;
}

}  // namespace detail

template <class T>
Jet<T> operator+(const Jet<T>& a, const Jet<T>& b) {
  if (a.order() != b.order()) throw ShapeError("jet order mismatch");
  std::vector<std::optional<T>> c;
  for (int j = 0; j <= a.order(); ++j) c.push_back(detail::add_opt(a.raw(j), b.raw(j)));
  return Jet<T>(std::move(c));
}

template <class T>
Jet<T> operator*(double s, const Jet<T>& a) {
  std::vector<std::optional<T>> c;
  for (int j = 0; j <= a.order(); ++j) {
    c.push_back(a.is_zero(j) ? std::nullopt : std::optional<T>(s * *a.raw(j)));
  }
  return Jet<T>(std::move(c));
}

template <class T>
Jet<T> operator-(const Jet<T>& a, const Jet<T>& b) {
  return a + (-1.0) * b;
}

/// Truncated product: coefficients are the Cauchy convolution.
template <class T>
Jet<T> operator*(const Jet<T>& a, const Jet<T>& b) {
  if (a.order() != b.order()) throw ShapeError("jet order mismatch");
  std::vector<std::optional<T>> c;
  for (int j = 0; j <= a.order(); ++j) c.push_back(detail::cauchy(a, b, j));
  return Jet<T>(std::move(c));
}

/// Lift an input value into an order-k jet moving along `direction_seed`.
template <class T>
Jet<T> jet_lift(const T& x, double direction_seed, int order) {
  check_jet_order(order);
  std::vector<std::optional<T>> c{x};
  if (order >= 1) c.push_back(ScalarTraits<T>::constant_like(x, direction_seed));
  for (int j = 2; j <= order; ++j) c.push_back(std::nullopt);
  return Jet<T>(std::move(c));
}

/// Primal activation value y0 and its derivative factor g0 = sigma'(x0),
/// shared by all jets through the same pre-activation.
template <class T>
struct ActivationPrimal {
  T value;
  std::optional<T> slope;
};

template <class T>
ActivationPrimal<T> activation_primal(const T& x, const Activation& act) {
  using Tr = ScalarTraits<T>;
  switch (act.kind) {
    case ActivationKind::kIdentity:
      return {x, std::nullopt};
    case ActivationKind::kTanh: {
      T y = Tr::tanh(x);
      return {y, 1.0 - y * y};
    }
    case ActivationKind::kSigmoid: {
      T y = Tr::sigmoid(x);
      return {y, y - y * y};
    }
    case ActivationKind::kElu: {
      T y = Tr::elu(x, act.alpha);
      return {y, Tr::select_positive(x, Tr::constant_like(x, 1.0), y + act.alpha)};
    }
    case ActivationKind::kRelu: {
      T y = Tr::relu(x);
      return {y, Tr::select_positive(x, Tr::constant_like(x, 1.0),
                                     Tr::constant_like(x, 0.0))};
    }
  }
  throw ShapeError("unknown activation");
}

/// Compose an activation with a jet using y' = g(y) x', where g is the
/// polynomial (or piecewise affine) derivative law of the activation:
///   y_j = (1/j) sum_{i=1..j} i x_i g_{j-i}.
template <class T>
Jet<T> activate(const Jet<T>& x, const Activation& act,
                 const ActivationPrimal<T>& primal) {
  using Tr = ScalarTraits<T>;
  const int k = x.order();
  if (act.kind == ActivationKind::kIdentity) return x;
  if (k >= 2) {
    if (act.kind == ActivationKind::kRelu) {
      throw SmoothnessError("relu has no derivatives beyond order 1");
    }
    if (act.kind == ActivationKind::kElu &&
        Tr::min_abs(x.primal()) < kKinkMargin) {
      throw SmoothnessError(
          "elu expanded to order " + std::to_string(k) +
          " at a point within the kink margin of 0");
    }
  }
  std::vector<std::optional<T>> y{primal.value};
  std::vector<std::optional<T>> g{primal.slope};
  for (int j = 1; j <= k; ++j) {
    if (j >= 2) {
      const int m = j - 1;  // g_m needs y_0..y_m
      std::optional<T> gm;
      switch (act.kind) {
        case ActivationKind::kTanh: {
          auto sq = detail::self_cauchy(y, m);
          if (sq) gm = -1.0 * *sq;
          break;
        }
        case ActivationKind::kSigmoid: {
          auto sq = detail::self_cauchy(y, m);
          if (y[static_cast<std::size_t>(m)] && sq) {
            gm = *y[static_cast<std::size_t>(m)] - *sq;
          } else if (sq) {
            gm = -1.0 * *sq;
          } else {
            gm = y[static_cast<std::size_t>(m)];
          }
          break;
        }
        case ActivationKind::kElu:
          if (y[static_cast<std::size_t>(m)]) {
            const T& ym = *y[static_cast<std::size_t>(m)];
            gm = Tr::select_positive(x.primal(), Tr::constant_like(ym, 0.0), ym);
          }
          break;
        default:
          break;
      }
      g.push_back(gm);
    }
    std::optional<T> acc;
    for (int i = 1; i <= j; ++i) {
      const auto& gi = g[static_cast<std::size_t>(j - i)];
      if (x.is_zero(i) || !gi) continue;
      T term = *x.raw(i) * *gi;
      if (i != j) term = (static_cast<double>(i) / j) * term;
      acc = acc ? std::optional<T>(*acc + term) : std::optional<T>(term);
    }
    y.push_back(acc);
  }
  return Jet<T>(std::move(y));
}

template <class T>
Jet<T> activate(const Jet<T>& x, const Activation& act) {
  if (act.kind == ActivationKind::kIdentity) return x;
  return activate(x, act, activation_primal(x.primal(), act));
}

}  // namespace ldgm::ad
