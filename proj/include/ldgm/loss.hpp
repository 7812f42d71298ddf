#pragma once

// DGM and LDGM losses on the batched tape. Everything is a mean over the
// sampled points, so each term estimates the normalized integral.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ldgm/network.hpp"
#include "ldgm/problem.hpp"
#include "ldgm/sampling.hpp"
#include "ldgm/system.hpp"

namespace ldgm {

/// Source of candidate outputs and input jets on a tape.
class Field {
 public:
  virtual ~Field() = default;
  virtual int outputs() const = 0;
  virtual BatchTape& tape() const = 0;
  virtual NetworkOutput<BatchVar> evaluate(const Eigen::MatrixXd& points,
                                           const DerivativeRequest& req) const = 0;
};

/// The network with its parameters bound once on `tape`.
class NetworkField : public Field {
 public:
  NetworkField(ParameterSet params, BatchTape& tape, bool as_parameters = true)
      : params_(std::make_unique<ParameterSet>(std::move(params))),
        net_(*params_, tape, as_parameters) {}
  int outputs() const override { return net_.parameters().config.output_dim; }
  BatchTape& tape() const override { return net_.tape(); }
  NetworkOutput<BatchVar> evaluate(const Eigen::MatrixXd& points,
                                   const DerivativeRequest& req) const override {
    return net_.forward(points, req);
  }
  const BatchNetwork& network() const { return net_; }

 private:
  std::unique_ptr<ParameterSet> params_;
  BatchNetwork net_;
};

/// Outputs computed from exact-solution derivatives, for residual checks.
class MockField : public Field {
 public:
  MockField(const ProblemSpec& spec, std::vector<ExactCombination> outputs, BatchTape& tape)
      : spec_(&spec), outputs_(std::move(outputs)), tape_(&tape) {
    for (const auto& c : outputs_) {
      if (c.empty()) throw UnavailableError("roster variable has no exact counterpart");
    }
  }
  /// Every roster variable of `system`.
  static MockField of_system(const ProblemSpec& spec, const SystemForm& system, BatchTape& tape) {
    std::vector<ExactCombination> out;
    for (const auto& r : system.roster) out.push_back(r.exact);
    return MockField(spec, std::move(out), tape);
  }
  /// u alone.
  static MockField of_solution(const ProblemSpec& spec, BatchTape& tape) {
    return MockField(spec, {{{1.0, std::vector<int>(static_cast<std::size_t>(spec.dim + 1), 0)}}}, tape);
  }

  int outputs() const override { return static_cast<int>(outputs_.size()); }
  BatchTape& tape() const override { return *tape_; }

  NetworkOutput<BatchVar> evaluate(const Eigen::MatrixXd& points,
                                   const DerivativeRequest& req) const override {
    const auto axes = detail::requested_axes(req, ad::kMaxJetOrder);
    NetworkOutput<BatchVar> out;
    out.axes = axes;
    for (const auto& combo : outputs_) {
      out.values.push_back(tape_->constant(sample(combo, points, -1, 0)));
      std::vector<ad::Jet<BatchVar>> jets;
      for (int a : axes) {
        std::vector<std::optional<BatchVar>> c;
        double fact = 1.0;
        for (int j = 0; j <= req.order[static_cast<std::size_t>(a)]; ++j) {
          if (j > 1) fact *= j;
          c.push_back(tape_->constant(sample(combo, points, a, j) / fact));
        }
        jets.emplace_back(std::move(c));
      }
      out.input_jets.push_back(std::move(jets));
    }
    return out;
  }

 private:
  ad::Array sample(const ExactCombination& combo, const Eigen::MatrixXd& points, int axis,
                   int order) const {
    const int d = spec_->dim;
    const bool timed = spec_->horizon.has_value();
    ad::Array v(1, points.cols());
    std::vector<double> x(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = points(a, c);
      const double t = timed ? points(d, c) : 0.0;
      double acc = 0.0;
      for (const auto& [coef, idx] : combo) {
        std::vector<int> o = idx;
        if (axis >= 0) o[static_cast<std::size_t>(axis)] += order;
        acc += coef * spec_->exact_derivative(x, t, o);
      }
      v(0, c) = acc;
    }
    return v;
  }

  const ProblemSpec* spec_;
  std::vector<ExactCombination> outputs_;
  BatchTape* tape_;
};

struct LossValues {
  double total = 0.0, equation = 0.0, initial = 0.0, boundary = 0.0;
};

struct LossBreakdown {
  BatchVar total;
  BatchVar equation;
  BatchVar initial;
  BatchVar boundary;
  /// Mean squared residual of every equation in the order assembled.
  std::vector<std::pair<std::string, BatchVar>> terms;

  LossValues values() const {
    return {total.scalar(), equation.scalar(), initial.scalar(), boundary.scalar()};
  }
};

namespace detail {

inline BatchVar zero_scalar(BatchTape& tape) { return tape.constant(1, 1, 0.0); }

inline BatchVar initial_data(const ProblemSpec& spec, BatchTape& tape, const Eigen::MatrixXd& pts) {
  ad::Array v(1, pts.cols());
  std::vector<double> x(static_cast<std::size_t>(spec.dim));
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    for (int a = 0; a < spec.dim; ++a) x[static_cast<std::size_t>(a)] = pts(a, c);
    v(0, c) = spec.initial(x);
  }
  return tape.constant(std::move(v));
}

inline LossBreakdown combine(const ProblemSpec& spec, BatchVar je, BatchVar ji, BatchVar jb,
                             std::vector<std::pair<std::string, BatchVar>> terms) {
  const auto& w = spec.weights;
  LossBreakdown l;
  l.total = w.equation * je + w.initial * ji + w.boundary * jb;
  l.equation = je;
  l.initial = ji;
  l.boundary = jb;
  l.terms = std::move(terms);
  return l;
}

// Rows selecting boundary points whose face normal is `axis`.
inline ad::Array face_mask(const SampleBatch& b, int axis) {
  ad::Array m(1, static_cast<Eigen::Index>(b.boundary_axis.size()));
  for (std::size_t c = 0; c < b.boundary_axis.size(); ++c) {
    m(0, static_cast<Eigen::Index>(c)) = b.boundary_axis[c] == axis ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace detail

/// Local loss on the order-reduced system.
inline LossBreakdown ldgm_loss(const ProblemSpec& spec, const SystemForm& system,
                               const Field& field, const SampleBatch& batch) {
  if (field.outputs() != system.output_dim()) {
    throw ShapeError("field has " + std::to_string(field.outputs()) +
                     " outputs, the system roster has " + std::to_string(system.output_dim()));
  }
  BatchTape& tape = field.tape();
  std::vector<std::pair<std::string, BatchVar>> terms;

  const auto inner = field.evaluate(batch.interior, system.interior_needs);
  const FieldView iv(inner, tape, batch.interior, spec.time_axis());
  BatchVar je = ad::mean(ad::square(system.evolution.residual(iv)));
  terms.emplace_back(system.evolution.label, je);
  for (const auto& c : system.constraints) {
    BatchVar t = ad::mean(ad::square(c.residual(iv)));
    terms.emplace_back(c.label, t);
    je = je + t;
  }

  BatchVar ji = detail::zero_scalar(tape);
  if (spec.horizon) {
    const auto init = field.evaluate(batch.initial, DerivativeRequest::none(spec.input_dim()));
    ji = ad::mean(ad::square(init.values[0] - detail::initial_data(spec, tape, batch.initial)));
  }

  BatchVar jb = detail::zero_scalar(tape);
  if (spec.boundary == BoundaryKind::kPeriodic) {
    const auto a = field.evaluate(batch.boundary, DerivativeRequest::none(spec.input_dim()));
    const auto b = field.evaluate(mirror_boundary(batch, spec), DerivativeRequest::none(spec.input_dim()));
    for (std::size_t o = 0; o < a.values.size(); ++o) {
      jb = jb + ad::mean(ad::square(a.values[o] - b.values[o]));
    }
  } else {
    const auto bnd = field.evaluate(batch.boundary, system.boundary_needs);
    const FieldView bv(bnd, tape, batch.boundary, spec.time_axis(), &batch.boundary_axis);
    for (const auto& eq : system.boundary) {
      jb = jb + ad::mean(ad::square(eq.residual(bv)));
    }
  }
  return detail::combine(spec, je, ji, jb, std::move(terms));
}

/// Strong-form loss with derivatives of the single network output taken by
/// jets up to the PDE order.
inline LossBreakdown dgm_loss(const ProblemSpec& spec, const Field& field,
                              const SampleBatch& batch, int jet_cap = ad::kMaxJetOrder) {
  if (!spec.horizon || !spec.evolution) {
    throw OrderError("problem '" + spec.name + "' has no evolution equation");
  }
  if (field.outputs() != 1) throw ShapeError("the DGM loss needs a single-output field");
  BatchTape& tape = field.tape();
  DerivativeRequest req = DerivativeRequest::none(spec.input_dim());
  for (int a = 0; a < spec.dim; ++a) {
    req.order[static_cast<std::size_t>(a)] = spec.axis_order[static_cast<std::size_t>(a)];
  }
  req.order[static_cast<std::size_t>(spec.time_axis())] = 1;
  detail::requested_axes(req, jet_cap);

  const auto inner = field.evaluate(batch.interior, req);
  const FieldView iv(inner, tape, batch.interior, spec.time_axis());
  BatchVar je = ad::mean(ad::square(spec.evolution(iv)));
  std::vector<std::pair<std::string, BatchVar>> terms{{"evolution", je}};

  const auto init = field.evaluate(batch.initial, DerivativeRequest::none(spec.input_dim()));
  BatchVar ji = ad::mean(ad::square(init.values[0] - detail::initial_data(spec, tape, batch.initial)));

  BatchVar jb = detail::zero_scalar(tape);
  if (spec.boundary == BoundaryKind::kPeriodic) {
    // u and its normal derivatives below the PDE order match across faces
    DerivativeRequest breq = DerivativeRequest::none(spec.input_dim());
    for (int a = 0; a < spec.dim; ++a) {
      breq.order[static_cast<std::size_t>(a)] = spec.axis_order[static_cast<std::size_t>(a)] - 1;
    }
    detail::requested_axes(breq, jet_cap);
    const auto a = field.evaluate(batch.boundary, breq);
    const auto b = field.evaluate(mirror_boundary(batch, spec), breq);
    jb = ad::mean(ad::square(a.values[0] - b.values[0]));
    for (int axis = 0; axis < spec.dim; ++axis) {
      const ad::Array mask = detail::face_mask(batch, axis);
      if (mask.sum() == 0.0) continue;
      const BatchVar m = tape.constant(mask);
      for (int j = 1; j < spec.axis_order[static_cast<std::size_t>(axis)]; ++j) {
        const BatchVar diff = a.derivative(0, axis, j) - b.derivative(0, axis, j);
        jb = jb + ad::mean(ad::square(m * diff));
      }
    }
  } else {
    DerivativeRequest breq = DerivativeRequest::none(spec.input_dim());
    const int bo = spec.boundary_order();
    for (int a = 0; a < spec.dim; ++a) breq.order[static_cast<std::size_t>(a)] = bo;
    detail::requested_axes(breq, jet_cap);
    const auto bnd = field.evaluate(batch.boundary, breq);
    const FieldView bv(bnd, tape, batch.boundary, spec.time_axis(), &batch.boundary_axis);
    for (const auto& bc : spec.boundary_conditions) {
      BatchVar t = ad::mean(ad::square(bc.residual(bv)));
      jb = jb + t;
    }
  }
  return detail::combine(spec, je, ji, jb, std::move(terms));
}

}  // namespace ldgm
