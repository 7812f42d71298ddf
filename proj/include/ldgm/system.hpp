#pragma once

// Order-reduced systems. A SystemForm names one network output per roster
// variable and lists residual equations that use at most first (or second)
// derivatives of those outputs.

#include <string>
#include <utility>
#include <vector>

#include "ldgm/network.hpp"
#include "ldgm/problem.hpp"

namespace ldgm {

/// Network outputs on a batch, addressed by roster index. Output 0 plays u.
class FieldView : public SolutionView {
 public:
  FieldView(const NetworkOutput<BatchVar>& out, BatchTape& tape,
            const Eigen::MatrixXd& points, int time_axis,
            const std::vector<int>* face_axis = nullptr)
      : SolutionView(tape, points, face_axis), out_(&out), time_axis_(time_axis) {}

  int outputs() const { return static_cast<int>(out_->values.size()); }
  BatchVar value(int i) const { return out_->values.at(static_cast<std::size_t>(i)); }
  BatchVar d(int i, int axis, int order = 1) const { return out_->derivative(i, axis, order); }
  BatchVar dt(int i) const { return out_->derivative(i, time_axis_, 1); }

  BatchVar u() const override { return value(0); }
  BatchVar dx(int axis, int order) const override { return d(0, axis, order); }
  BatchVar dt() const override { return dt(0); }

 private:
  const NetworkOutput<BatchVar>* out_;
  int time_axis_;
};

/// Linear combination of exact-solution derivatives; each multi-index lists
/// spatial orders then the time order.
using ExactCombination = std::vector<std::pair<double, std::vector<int>>>;

struct RosterEntry {
  std::string role;
  /// How the variable follows from u*; empty when it is not linear in u*.
  ExactCombination exact;
};

struct Equation {
  std::string label;
  std::function<BatchVar(const FieldView&)> residual;
};

struct SystemForm {
  std::string problem;
  int order = 1;  // highest derivative order of roster variables used
  std::vector<RosterEntry> roster;
  Equation evolution;
  std::vector<Equation> constraints;
  std::vector<Equation> boundary;
  DerivativeRequest interior_needs;
  DerivativeRequest boundary_needs;

  int output_dim() const { return static_cast<int>(roster.size()); }
  int index(const std::string& role) const {
    for (std::size_t i = 0; i < roster.size(); ++i) {
      if (roster[i].role == role) return static_cast<int>(i);
    }
    throw ShapeError("no roster variable '" + role + "'");
  }
};

namespace detail {

inline std::string derivative_role(int dim, int axis, int order) {
  if (order == 0) return "u";
  if (dim == 1) return "u_" + std::string(static_cast<std::size_t>(order), 'x');
  std::string s = "u_x" + std::to_string(axis + 1);
  if (order > 1) s += "^" + std::to_string(order);
  return s;
}

inline std::vector<int> unit_index(int dim, int axis, int order) {
  std::vector<int> o(static_cast<std::size_t>(dim + 1), 0);
  o[static_cast<std::size_t>(axis)] = order;
  return o;
}

// SolutionView whose spatial derivatives are resolved through a roster map.
class ReducedView : public SolutionView {
 public:
  using Map = std::function<BatchVar(const FieldView&, int, int)>;
  ReducedView(const FieldView& f, Map map)
      : SolutionView(f.tape(), f.points(), &f.face_axis()), f_(&f), map_(std::move(map)) {}
  BatchVar u() const override { return f_->value(0); }
  BatchVar dx(int axis, int order) const override {
    if (order == 0) return u();
    return map_(*f_, axis, order);
  }
  BatchVar dt() const override { return f_->dt(0); }

 private:
  const FieldView* f_;
  Map map_;
};

inline void require_evolution(const ProblemSpec& spec) {
  if (!spec.horizon || !spec.evolution) {
    throw OrderError("problem '" + spec.name + "' is stationary and has no evolution system");
  }
}

inline DerivativeRequest time_needs(const ProblemSpec& spec) {
  DerivativeRequest r = DerivativeRequest::none(spec.input_dim());
  r.order[static_cast<std::size_t>(spec.time_axis())] = 1;
  return r;
}

// Roster wiring shared by the generic rewrites: index[a][j] is the roster
// slot of D_a^j u, or -1.
inline SystemForm assemble(const ProblemSpec& spec, int order,
                           std::vector<RosterEntry> roster,
                           const std::vector<std::vector<int>>& index,
                           ReducedView::Map map, std::vector<Equation> constraints) {
  SystemForm s;
  s.problem = spec.name;
  s.order = order;
  s.roster = std::move(roster);
  s.constraints = std::move(constraints);
  const Residual evo = spec.evolution;
  s.evolution = {"evolution", [evo, map](const FieldView& f) { return evo(ReducedView(f, map)); }};
  for (const auto& bc : spec.boundary_conditions) {
    const Residual r = bc.residual;
    s.boundary.push_back({bc.label, [r, map](const FieldView& f) { return r(ReducedView(f, map)); }});
  }
  s.interior_needs = time_needs(spec);
  s.boundary_needs = DerivativeRequest::none(spec.input_dim());
  for (int a = 0; a < spec.dim; ++a) {
    const int ka = spec.axis_order[static_cast<std::size_t>(a)];
    if (ka == 0) continue;
    s.interior_needs.order[static_cast<std::size_t>(a)] = std::min(order, ka);
    // boundary derivatives that are not roster variables need jets
    for (const auto& bc : spec.boundary_conditions) {
      if (bc.order > 0 && index[static_cast<std::size_t>(a)][static_cast<std::size_t>(std::min(bc.order, ka))] < 0) {
        s.boundary_needs.order[static_cast<std::size_t>(a)] = std::min(order, ka);
      }
    }
  }
  return s;
}

}  // namespace detail

/// (u, D u, ..., D^{k-1} u) per axis; the top derivative is the first
/// derivative of the last roster variable.
inline SystemForm generic_first_order(const ProblemSpec& spec) {
  detail::require_evolution(spec);
  const int d = spec.dim;
  std::vector<RosterEntry> roster{{"u", {{1.0, std::vector<int>(static_cast<std::size_t>(d + 1), 0)}}}};
  std::vector<std::vector<int>> index(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const int ka = spec.axis_order[static_cast<std::size_t>(a)];
    auto& ia = index[static_cast<std::size_t>(a)];
    ia.assign(static_cast<std::size_t>(ka + 1), -1);
    ia[0] = 0;
    for (int j = 1; j < ka; ++j) {
      ia[static_cast<std::size_t>(j)] = static_cast<int>(roster.size());
      roster.push_back({detail::derivative_role(d, a, j), {{1.0, detail::unit_index(d, a, j)}}});
    }
  }
  auto map = [index](const FieldView& f, int axis, int order) -> BatchVar {
    const auto& ia = index.at(static_cast<std::size_t>(axis));
    if (order >= static_cast<int>(ia.size())) {
      throw UnsupportedOrderError("derivative order " + std::to_string(order) +
                                  " is outside the system");
    }
    const int slot = ia[static_cast<std::size_t>(order)];
    if (slot >= 0) return f.value(slot);
    return f.d(ia[static_cast<std::size_t>(order - 1)], axis, 1);
  };
  std::vector<Equation> constraints;
  for (int a = 0; a < d; ++a) {
    const auto& ia = index[static_cast<std::size_t>(a)];
    for (std::size_t j = 1; j + 1 < ia.size(); ++j) {
      const int lhs = ia[j], rhs = ia[j - 1];
      constraints.push_back({roster[static_cast<std::size_t>(lhs)].role + " - D " +
                                 roster[static_cast<std::size_t>(rhs)].role,
                             [lhs, rhs, a](const FieldView& f) { return f.value(lhs) - f.d(rhs, a, 1); }});
    }
  }
  return detail::assemble(spec, 1, std::move(roster), index, map, std::move(constraints));
}

/// (u, D^2 u, D^4 u, ...) per axis; odd derivatives are first derivatives of
/// the even roster variables.
inline SystemForm generic_second_order(const ProblemSpec& spec) {
  detail::require_evolution(spec);
  if (spec.pde_order() < 2) {
    throw OrderError("a second-order system needs a PDE of order >= 2, got " +
                     std::to_string(spec.pde_order()));
  }
  const int d = spec.dim;
  std::vector<RosterEntry> roster{{"u", {{1.0, std::vector<int>(static_cast<std::size_t>(d + 1), 0)}}}};
  std::vector<std::vector<int>> even(static_cast<std::size_t>(d));  // slot of D^{2i}
  std::vector<std::vector<int>> index(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const int ka = spec.axis_order[static_cast<std::size_t>(a)];
    auto& ea = even[static_cast<std::size_t>(a)];
    auto& ia = index[static_cast<std::size_t>(a)];
    ia.assign(static_cast<std::size_t>(ka + 1), -1);
    ea.push_back(0);
    ia[0] = 0;
    for (int i = 1; 2 * i <= ka; ++i) {
      ea.push_back(static_cast<int>(roster.size()));
      ia[static_cast<std::size_t>(2 * i)] = static_cast<int>(roster.size());
      roster.push_back({detail::derivative_role(d, a, 2 * i), {{1.0, detail::unit_index(d, a, 2 * i)}}});
    }
  }
  auto map = [even](const FieldView& f, int axis, int order) -> BatchVar {
    const auto& ea = even.at(static_cast<std::size_t>(axis));
    const auto i = static_cast<std::size_t>(order / 2);
    if (i >= ea.size()) {
      throw UnsupportedOrderError("derivative order " + std::to_string(order) +
                                  " is outside the system");
    }
    if (order % 2 == 0) return f.value(ea[i]);
    return f.d(ea[i], axis, 1);
  };
  std::vector<Equation> constraints;
  for (int a = 0; a < d; ++a) {
    const auto& ea = even[static_cast<std::size_t>(a)];
    for (std::size_t i = 1; i < ea.size(); ++i) {
      const int lhs = ea[i], rhs = ea[i - 1];
      constraints.push_back({roster[static_cast<std::size_t>(lhs)].role + " - D^2 " +
                                 roster[static_cast<std::size_t>(rhs)].role,
                             [lhs, rhs, a](const FieldView& f) { return f.value(lhs) - f.d(rhs, a, 2); }});
    }
  }
  return detail::assemble(spec, 2, std::move(roster), index, map, std::move(constraints));
}

/// Four-variable Cahn-Hilliard system (u, u_x, phi, phi_x) with
/// phi = -eps u_xx - f(u).
inline SystemForm cahn_hilliard_first_order(const ProblemSpec& spec) {
  const double eps = spec.params.at("epsilon");
  SystemForm s;
  s.problem = spec.name;
  s.order = 1;
  s.roster = {{"u", {{1.0, {0, 0}}}}, {"u_x", {{1.0, {1, 0}}}}, {"phi", {}}, {"phi_x", {}}};
  s.evolution = {"u_t - phi_xx", [](const FieldView& f) { return f.dt(0) - f.d(3, 0); }};
  s.constraints = {
      {"phi + eps u_xx + f(u)", [eps](const FieldView& f) {
         const BatchVar u = f.value(0);
         return f.value(2) + eps * f.d(1, 0) + (u - u * u * u);
       }},
      {"u_x - D u", [](const FieldView& f) { return f.value(1) - f.d(0, 0); }},
      {"phi_x - D phi", [](const FieldView& f) { return f.value(3) - f.d(2, 0); }},
  };
  s.boundary = {
      {"u_x", [](const FieldView& f) { return f.value(1); }},
      {"phi_x", [](const FieldView& f) { return f.value(3); }},
  };
  s.interior_needs = DerivativeRequest{{1, 1}};
  s.boundary_needs = DerivativeRequest::none(2);
  return s;
}

/// Cahn-Hilliard as u_t = -v_xx, v = eps u_xx + f(u).
inline SystemForm cahn_hilliard_second_order(const ProblemSpec& spec) {
  const double eps = spec.params.at("epsilon");
  SystemForm s;
  s.problem = spec.name;
  s.order = 2;
  s.roster = {{"u", {{1.0, {0, 0}}}}, {"v", {}}};
  s.evolution = {"u_t + v_xx", [](const FieldView& f) { return f.dt(0) + f.d(1, 0, 2); }};
  s.constraints = {
      {"v - eps u_xx - f(u)", [eps](const FieldView& f) {
         const BatchVar u = f.value(0);
         return f.value(1) - eps * f.d(0, 0, 2) - (u - u * u * u);
       }},
  };
  s.boundary = {
      {"u_x", [](const FieldView& f) { return f.d(0, 0); }},
      {"v_x", [](const FieldView& f) { return f.d(1, 0); }},
  };
  s.interior_needs = DerivativeRequest{{2, 1}};
  s.boundary_needs = DerivativeRequest{{1, 0}};
  return s;
}

/// Heat as u_t = v + f, v = Laplace(u).
inline SystemForm heat_second_order(const ProblemSpec& spec) {
  const int d = spec.dim;
  ExactCombination lap;
  for (int a = 0; a < d; ++a) lap.push_back({1.0, detail::unit_index(d, a, 2)});
  std::vector<std::vector<int>> index(static_cast<std::size_t>(d), std::vector<int>{0, -1, -1});
  auto map = [](const FieldView& f, int axis, int order) -> BatchVar { return f.d(0, axis, order); };
  std::vector<Equation> constraints{
      {"v - Laplace u", [d](const FieldView& f) {
         BatchVar r = f.value(1);
         for (int a = 0; a < d; ++a) r = r - f.d(0, a, 2);
         return r;
       }},
  };
  SystemForm s = detail::assemble(spec, 2, {{"u", {{1.0, std::vector<int>(static_cast<std::size_t>(d + 1), 0)}}}, {"v", lap}},
                                  index, map, std::move(constraints));
  // evolution written on v directly
  const auto source = [d](std::span<const double> q) {
    double acc = 0.0;
    for (int a = 0; a < d; ++a) acc += q[static_cast<std::size_t>(a)] * (1.0 - q[static_cast<std::size_t>(a)]);
    return 2.0 * d * (q[static_cast<std::size_t>(d)] + 1.0) + acc;
  };
  s.evolution = {"u_t - v - f", [source](const FieldView& f) { return f.dt(0) - f.value(1) - f.data(source); }};
  for (int a = 0; a < d; ++a) s.interior_needs.order[static_cast<std::size_t>(a)] = 2;
  return s;
}

/// First-order system of `spec`.
inline SystemForm rewrite_first_order(const ProblemSpec& spec) {
  if (spec.name == "cahn_hilliard") return cahn_hilliard_first_order(spec);
  return generic_first_order(spec);
}

/// Second-order system of `spec`.
inline SystemForm rewrite_second_order(const ProblemSpec& spec) {
  if (spec.pde_order() < 2) {
    throw OrderError("a second-order system needs a PDE of order >= 2, got " +
                     std::to_string(spec.pde_order()));
  }
  if (spec.name == "cahn_hilliard") return cahn_hilliard_second_order(spec);
  if (spec.name == "heat_nd") return heat_second_order(spec);
  return generic_second_order(spec);
}

inline SystemForm rewrite(const ProblemSpec& spec, int order) {
  if (order == 1) return rewrite_first_order(spec);
  if (order == 2) return rewrite_second_order(spec);
  throw OrderError("system order must be 1 or 2, got " + std::to_string(order));
}

}  // namespace ldgm
