#pragma once

#include <climits>
#include <string>
#include <string_view>

#include "ldgm/errors.hpp"

namespace ldgm::ad {

enum class ActivationKind { kIdentity, kTanh, kSigmoid, kElu, kRelu };

struct Activation {
  ActivationKind kind = ActivationKind::kTanh;
  double alpha = 1.0;  // elu only

  static Activation identity() { return {ActivationKind::kIdentity, 1.0}; }
  static Activation tanh() { return {ActivationKind::kTanh, 1.0}; }
  static Activation sigmoid() { return {ActivationKind::kSigmoid, 1.0}; }
  static Activation elu(double alpha = 1.0) {
    return {ActivationKind::kElu, alpha};
  }
  static Activation relu() { return {ActivationKind::kRelu, 1.0}; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

/// Highest derivative order that is continuous everywhere.
inline int smoothness(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::kElu:
      return a.alpha == 1.0 ? 1 : 0;
    case ActivationKind::kRelu:
      return 0;
    default:
      return INT_MAX;
  }
}

inline std::string to_string(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::kIdentity:
      return "identity";
    case ActivationKind::kTanh:
      return "tanh";
    case ActivationKind::kSigmoid:
      return "sigmoid";
    case ActivationKind::kRelu:
      return "relu";
    case ActivationKind::kElu:
      if (a.alpha == 1.0) return "elu";
      return "elu(" + std::to_string(a.alpha) + ")";
  }
  return "?";
}

/// Accepts identity, tanh, sigmoid, relu, elu and elu(<alpha>).
inline Activation parse_activation(std::string_view s) {
  if (s == "identity" || s == "linear") return Activation::identity();
  if (s == "tanh") return Activation::tanh();
  if (s == "sigmoid") return Activation::sigmoid();
  if (s == "relu") return Activation::relu();
  if (s == "elu") return Activation::elu();
  if (s.starts_with("elu(") && s.ends_with(")")) {
    const std::string inner(s.substr(4, s.size() - 5));
    std::size_t used = 0;
    double alpha = 0.0;
    try {
      alpha = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == inner.size() && used > 0) return Activation::elu(alpha);
  }
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

}  // namespace ldgm::ad
