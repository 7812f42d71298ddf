#pragma once

// PDE benchmarks on axis-aligned boxes. A problem states its strong form as a
// residual over a SolutionView, which hides whether derivatives come from
// network jets (DGM) or from roster variables of an order-reduced system.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldgm/autodiff/batch_tape.hpp"
#include "ldgm/errors.hpp"

namespace ldgm {

using ad::BatchTape;
using ad::BatchVar;

struct Box {
  std::vector<double> lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double width(int a) const {
    return hi[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)];
  }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= width(a);
    return v;
  }
  /// Area of one face orthogonal to `axis` (1 in one dimension).
  double face_area(int axis) const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) {
      if (a != axis) v *= width(a);
    }
    return v;
  }
  double boundary_area() const {
    double s = 0.0;
    for (int a = 0; a < dim(); ++a) s += 2.0 * face_area(a);
    return s;
  }
  static Box cube(int d, double lo, double hi) {
    return {std::vector<double>(static_cast<std::size_t>(d), lo),
            std::vector<double>(static_cast<std::size_t>(d), hi)};
  }
};

enum class BoundaryKind { kDirichlet, kNeumann, kPeriodic };

inline std::string to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::kDirichlet:
      return "dirichlet";
    case BoundaryKind::kNeumann:
      return "neumann";
    case BoundaryKind::kPeriodic:
      return "periodic";
  }
  return "?";
}

struct LossWeights {
  double equation = 1.0;
  double initial = 1.0;
  double boundary = 1.0;
};

/// Read access to a candidate solution u on a batch of points. Every value
/// is a 1 x N row on the tape.
class SolutionView {
 public:
  virtual ~SolutionView() = default;
  virtual BatchVar u() const = 0;
  /// d^order u / dx_axis^order over spatial axes.
  virtual BatchVar dx(int axis, int order) const = 0;
  virtual BatchVar dt() const = 0;

  BatchTape& tape() const { return *tape_; }
  const Eigen::MatrixXd& points() const { return *points_; }
  /// Outward face axis of each point (boundary batches only).
  const std::vector<int>& face_axis() const { return *face_axis_; }
  BatchVar coord(int axis) const {
    return tape_->constant(points_->row(axis).array());
  }
  /// Constant row built from the sample coordinates.
  BatchVar data(const std::function<double(std::span<const double>)>& f) const {
    ad::Array a(1, points_->cols());
    std::vector<double> p(static_cast<std::size_t>(points_->rows()));
    for (Eigen::Index c = 0; c < points_->cols(); ++c) {
      for (Eigen::Index r = 0; r < points_->rows(); ++r) p[static_cast<std::size_t>(r)] = (*points_)(r, c);
      a(0, c) = f(p);
    }
    return tape_->constant(std::move(a));
  }

 protected:
  SolutionView(BatchTape& tape, const Eigen::MatrixXd& points,
               const std::vector<int>* face_axis)
      : tape_(&tape), points_(&points), face_axis_(face_axis ? face_axis : &kNoFaces) {}

 private:
  static inline const std::vector<int> kNoFaces{};
  BatchTape* tape_;
  const Eigen::MatrixXd* points_;
  const std::vector<int>* face_axis_;
};

using Residual = std::function<BatchVar(const SolutionView&)>;

/// Exact mixed derivative d^{orders} u*(x, t); orders has one entry per
/// spatial axis followed by the time order.
using ExactDerivative =
    std::function<double(std::span<const double> x, double t, std::span<const int> orders)>;

struct BoundaryCondition {
  std::string label;
  Residual residual;
  int order = 0;  // highest normal derivative order involved
};

struct ProblemSpec {
  std::string name;
  int dim = 1;
  Box domain;
  std::optional<double> horizon;  // absent for stationary problems
  /// Highest pure derivative order along each spatial axis.
  std::vector<int> axis_order;
  Residual evolution;  // strong form, zero on the solution
  std::function<double(std::span<const double>)> initial;
  BoundaryKind boundary = BoundaryKind::kDirichlet;
  std::vector<BoundaryCondition> boundary_conditions;
  std::optional<ExactDerivative> exact;
  LossWeights weights;
  std::map<std::string, double> params;

  int pde_order() const {
    int k = 0;
    for (int o : axis_order) k = std::max(k, o);
    return k;
  }
  int input_dim() const { return dim + (horizon ? 1 : 0); }
  int time_axis() const { return dim; }
  bool has_exact() const { return exact.has_value(); }

  double exact_value(std::span<const double> x, double t) const {
    if (!exact) throw UnavailableError("problem '" + name + "' has no exact solution");
    std::vector<int> zero(static_cast<std::size_t>(dim + 1), 0);
    return (*exact)(x, t, zero);
  }
  double exact_derivative(std::span<const double> x, double t,
                          std::span<const int> orders) const {
    if (!exact) throw UnavailableError("problem '" + name + "' has no exact solution");
    return (*exact)(x, t, orders);
  }
  int boundary_order() const {
    int k = 0;
    for (const auto& b : boundary_conditions) k = std::max(k, b.order);
    return k;
  }
};

/// Exact value u*(x, t).
inline double exact_solution(const ProblemSpec& spec, std::span<const double> x, double t) {
  return spec.exact_value(x, t);
}

namespace detail {

// d^n/dz^n tanh(z) as a polynomial in y = tanh(z).
inline double tanh_derivative(double z, int n) {
  std::vector<double> p{0.0, 1.0};  // y
  for (int k = 0; k < n; ++k) {
    // d/dz P(y) = P'(y) (1 - y^2)
    std::vector<double> dp(std::max<std::size_t>(p.size() - 1, 1), 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) dp[i - 1] = static_cast<double>(i) * p[i];
    std::vector<double> q(dp.size() + 2, 0.0);
    for (std::size_t i = 0; i < dp.size(); ++i) {
      q[i] += dp[i];
      q[i + 2] -= dp[i];
    }
    p = std::move(q);
  }
  const double y = std::tanh(z);
  double acc = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) acc = acc * y + p[i];
  return acc;
}

inline double sin_derivative(double x, int n) {
  switch (n % 4) {
    case 0:
      return std::sin(x);
    case 1:
      return std::cos(x);
    case 2:
      return -std::sin(x);
    default:
      return -std::cos(x);
  }
}

inline double cube_f(double u) { return u - u * u * u; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Builtin problems

/// u_t = -u_xxxx on [0, 2pi] x [0, 1]; u = u_xx = 0 on the boundary.
inline ProblemSpec beam() {
  ProblemSpec p;
  p.name = "beam";
  p.dim = 1;
  p.domain = {{0.0}, {2.0 * std::numbers::pi}};
  p.horizon = 1.0;
  p.axis_order = {4};
  p.evolution = [](const SolutionView& v) { return v.dt() + v.dx(0, 4); };
  p.initial = [](std::span<const double> x) { return std::sin(x[0]); };
  p.boundary = BoundaryKind::kDirichlet;
  p.boundary_conditions = {
      {"u", [](const SolutionView& v) { return v.u(); }, 0},
      {"u_xx", [](const SolutionView& v) { return v.dx(0, 2); }, 2},
  };
  p.exact = [](std::span<const double> x, double t, std::span<const int> o) {
    const double time = (o[1] % 2 ? -1.0 : 1.0) * std::exp(-t);
    return time * detail::sin_derivative(x[0], o[0]);
  };
  return p;
}

/// u_t - 6 u^2 u_x + u_xxx = 0 on [-2, 2] x [0, 1] with the kink solution.
inline ProblemSpec mkdv() {
  ProblemSpec p;
  p.name = "mkdv";
  p.dim = 1;
  p.domain = {{-2.0}, {2.0}};
  p.horizon = 1.0;
  p.axis_order = {3};
  p.evolution = [](const SolutionView& v) {
    const BatchVar u = v.u();
    return v.dt() - 6.0 * (u * u * v.dx(0, 1)) + v.dx(0, 3);
  };
  p.initial = [](std::span<const double> x) { return std::tanh(x[0] - 1.0); };
  p.boundary = BoundaryKind::kDirichlet;
  p.boundary_conditions = {
      {"u", [](const SolutionView& v) {
         return v.u() - v.data([](std::span<const double> q) {
                  return std::tanh(q[0] + 2.0 * q[1] - 1.0);
                });
       }, 0},
  };
  p.exact = [](std::span<const double> x, double t, std::span<const int> o) {
    return std::pow(2.0, o[1]) * detail::tanh_derivative(x[0] + 2.0 * t - 1.0, o[0] + o[1]);
  };
  return p;
}

/// u_t + 6 u u_x + u_xxx = 0 on [-4, 4] x [0, 1], one-soliton solution
/// 2 sech^2(x - 4t) (property-suite entry).
inline ProblemSpec kdv() {
  ProblemSpec p;
  p.name = "kdv";
  p.dim = 1;
  p.domain = {{-4.0}, {4.0}};
  p.horizon = 1.0;
  p.axis_order = {3};
  p.evolution = [](const SolutionView& v) {
    return v.dt() + 6.0 * (v.u() * v.dx(0, 1)) + v.dx(0, 3);
  };
  // 2 sech^2 z = 2 (1 - tanh^2 z) = 2 d/dz tanh z
  p.exact = [](std::span<const double> x, double t, std::span<const int> o) {
    return 2.0 * std::pow(-4.0, o[1]) * detail::tanh_derivative(x[0] - 4.0 * t, 1 + o[0] + o[1]);
  };
  const auto exact = *p.exact;
  p.initial = [exact](std::span<const double> x) {
    const int zero[2] = {0, 0};
    return exact(x, 0.0, zero);
  };
  p.boundary = BoundaryKind::kDirichlet;
  p.boundary_conditions = {
      {"u", [exact](const SolutionView& v) {
         return v.u() - v.data([&exact](std::span<const double> q) {
                  const int zero[2] = {0, 0};
                  return exact(q.first(1), q[1], zero);
                });
       }, 0},
  };
  return p;
}

/// u_t - Laplace(u) = f on [0, 1]^d x [0, 1] with u* = sum x_i (1 - x_i) (t + 1).
inline ProblemSpec heat_nd(int d) {
  if (d < 1) throw ShapeError("heat_nd needs d >= 1");
  ProblemSpec p;
  p.name = "heat_nd";
  p.dim = d;
  p.params["d"] = d;
  p.domain = Box::cube(d, 0.0, 1.0);
  p.horizon = 1.0;
  p.axis_order.assign(static_cast<std::size_t>(d), 2);
  auto exact = [d](std::span<const double> x, double t, std::span<const int> o) {
    int nonzero = -1, total = 0;
    for (int a = 0; a < d; ++a) {
      if (o[static_cast<std::size_t>(a)] > 0) {
        if (nonzero >= 0) return 0.0;  // no mixed spatial terms
        nonzero = a;
      }
      total += o[static_cast<std::size_t>(a)];
    }
    const int ot = o[static_cast<std::size_t>(d)];
    if (ot > 1) return 0.0;
    const double tf = ot == 1 ? 1.0 : t + 1.0;
    if (nonzero < 0) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += x[static_cast<std::size_t>(a)] * (1.0 - x[static_cast<std::size_t>(a)]);
      return s * tf;
    }
    const double xa = x[static_cast<std::size_t>(nonzero)];
    if (total == 1) return (1.0 - 2.0 * xa) * tf;
    if (total == 2) return -2.0 * tf;
    return 0.0;
  };
  p.exact = exact;
  auto source = [d](std::span<const double> q) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += q[static_cast<std::size_t>(a)] * (1.0 - q[static_cast<std::size_t>(a)]);
    return 2.0 * d * (q[static_cast<std::size_t>(d)] + 1.0) + s;
  };
  p.evolution = [d, source](const SolutionView& v) {
    BatchVar r = v.dt() - v.data(source);
    for (int a = 0; a < d; ++a) r = r - v.dx(a, 2);
    return r;
  };
  p.initial = [d](std::span<const double> x) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += x[static_cast<std::size_t>(a)] * (1.0 - x[static_cast<std::size_t>(a)]);
    return s;
  };
  p.boundary = BoundaryKind::kDirichlet;
  p.boundary_conditions = {
      {"u", [d, exact](const SolutionView& v) {
         return v.u() - v.data([d, &exact](std::span<const double> q) {
                  const std::vector<int> zero(static_cast<std::size_t>(d + 1), 0);
                  return exact(q.first(static_cast<std::size_t>(d)), q[static_cast<std::size_t>(d)], zero);
                });
       }, 0},
  };
  return p;
}

/// u_t + eps u_xxxx + f(u)_xx = 0, f(u) = u - u^3, on [0, 2pi] x [0, 1],
/// u0 = cos x, zero flux of u and of phi = -eps u_xx - f(u).
inline ProblemSpec cahn_hilliard(double eps) {
  ProblemSpec p;
  p.name = "cahn_hilliard";
  p.dim = 1;
  p.params["epsilon"] = eps;
  p.domain = {{0.0}, {2.0 * std::numbers::pi}};
  p.horizon = 1.0;
  p.axis_order = {4};
  p.evolution = [eps](const SolutionView& v) {
    const BatchVar u = v.u();
    const BatchVar ux = v.dx(0, 1);
    // f(u)_xx = (1 - 3u^2) u_xx - 6 u u_x^2
    return v.dt() + eps * v.dx(0, 4) + (1.0 - 3.0 * (u * u)) * v.dx(0, 2) -
           6.0 * (u * ux * ux);
  };
  p.initial = [](std::span<const double> x) { return std::cos(x[0]); };
  p.boundary = BoundaryKind::kNeumann;
  p.boundary_conditions = {
      {"u_x", [](const SolutionView& v) { return v.dx(0, 1); }, 1},
      {"phi_x", [eps](const SolutionView& v) {
         const BatchVar u = v.u();
         return -1.0 * (eps * v.dx(0, 3) + (1.0 - 3.0 * (u * u)) * v.dx(0, 1));
       }, 3},
  };
  return p;
}

/// u_t = eps u_xx + f(u) on [0, 2pi] x [0, 1], periodic, u0 = cos x.
inline ProblemSpec allen_cahn(double eps) {
  ProblemSpec p;
  p.name = "allen_cahn";
  p.dim = 1;
  p.params["epsilon"] = eps;
  p.domain = {{0.0}, {2.0 * std::numbers::pi}};
  p.horizon = 1.0;
  p.axis_order = {2};
  p.evolution = [eps](const SolutionView& v) {
    const BatchVar u = v.u();
    return v.dt() - eps * v.dx(0, 2) - (u - u * u * u);
  };
  p.initial = [](std::span<const double> x) { return std::cos(x[0]); };
  p.boundary = BoundaryKind::kPeriodic;
  return p;
}

/// Clamped bi-Laplacian on [0, 1]^d with u* = prod sin^2(pi x_i).
inline ProblemSpec bilaplacian_ritz(int d) {
  if (d < 1) throw ShapeError("bilaplacian_ritz needs d >= 1");
  ProblemSpec p;
  p.name = "bilaplacian_ritz";
  p.dim = d;
  p.params["d"] = d;
  p.domain = Box::cube(d, 0.0, 1.0);
  p.axis_order.assign(static_cast<std::size_t>(d), 4);
  p.boundary = BoundaryKind::kDirichlet;
  p.exact = [d](std::span<const double> x, double, std::span<const int> o) {
    // sin^2(pi x) = (1 - cos(2 pi x)) / 2
    const double w = 2.0 * std::numbers::pi;
    double prod = 1.0;
    for (int a = 0; a < d; ++a) {
      const int n = o[static_cast<std::size_t>(a)];
      const double xa = x[static_cast<std::size_t>(a)];
      const double f = n == 0 ? 0.5 * (1.0 - std::cos(w * xa))
                              : -0.5 * std::pow(w, n) * detail::sin_derivative(w * xa + std::numbers::pi / 2, n);
      prod *= f;
    }
    return prod;
  };
  return p;
}

/// Source of the manufactured bi-Laplacian instance, Laplace^2 u*.
inline double bilaplacian_source(const ProblemSpec& p, std::span<const double> x) {
  double s = 0.0;
  std::vector<int> o(static_cast<std::size_t>(p.dim + 1), 0);
  for (int a = 0; a < p.dim; ++a) {
    for (int b = 0; b < p.dim; ++b) {
      std::fill(o.begin(), o.end(), 0);
      o[static_cast<std::size_t>(a)] += 2;
      o[static_cast<std::size_t>(b)] += 2;
      s += p.exact_derivative(x, 0.0, o);
    }
  }
  return s;
}

inline std::vector<std::string> builtin_problem_names() {
  return {"beam", "cahn_hilliard", "mkdv", "heat_nd", "bilaplacian_ritz", "allen_cahn", "kdv"};
}

/// Registry lookup. Parameters: epsilon (cahn_hilliard, allen_cahn), d
/// (heat_nd, bilaplacian_ritz).
inline ProblemSpec make_problem(const std::string& name,
                                const std::map<std::string, double>& params = {}) {
  auto get = [&params](const std::string& k, double def) {
    auto it = params.find(k);
    return it == params.end() ? def : it->second;
  };
  if (name == "beam") return beam();
  if (name == "mkdv") return mkdv();
  if (name == "kdv") return kdv();
  if (name == "cahn_hilliard") return cahn_hilliard(get("epsilon", 0.1));
  if (name == "allen_cahn") return allen_cahn(get("epsilon", 0.1));
  if (name == "heat_nd") return heat_nd(static_cast<int>(get("d", 5)));
  if (name == "bilaplacian_ritz") return bilaplacian_ritz(static_cast<int>(get("d", 1)));
  throw ConfigError("unknown problem '" + name + "'");
}

/// The benchmark problems with their default parameters.
inline std::vector<ProblemSpec> builtin_problems() {
  return {beam(), cahn_hilliard(0.1), mkdv(), heat_nd(5), bilaplacian_ritz(1)};
}

}  // namespace ldgm
