#pragma once

// Deep Ritz energies for the clamped bi-Laplacian. Means over the samples are
// scaled by |Omega| and |dOmega| so each term estimates its integral.

#include <functional>
#include <span>

#include "ldgm/loss.hpp"

namespace ldgm {

struct RitzConfig {
  double penalty = 500.0;   // boundary weight lambda
  double coupling = 1.0;    // weight of |grad p - q|^2 in the local energy
  std::function<double(std::span<const double>)> source;  // f; zero if empty
};

namespace detail {

inline BatchVar source_row(const RitzConfig& cfg, BatchTape& tape, const Eigen::MatrixXd& pts) {
  ad::Array v = ad::Array::Zero(1, pts.cols());
  if (cfg.source) {
    std::vector<double> x(static_cast<std::size_t>(pts.rows()));
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      for (Eigen::Index r = 0; r < pts.rows(); ++r) x[static_cast<std::size_t>(r)] = pts(r, c);
      v(0, c) = cfg.source(x);
    }
  }
  return tape.constant(std::move(v));
}

inline void check_ritz(const ProblemSpec& spec, const RitzConfig& cfg) {
  if (spec.horizon) throw ShapeError("Ritz losses need a stationary problem");
  if (!(cfg.penalty > 0.0)) throw ConfigError("ritz penalty must be > 0");
}

}  // namespace detail

/// Local energy with p = output 0 and q = outputs 1..d; first derivatives only.
inline LossBreakdown ldrm_loss(const ProblemSpec& spec, const Field& field,
                               const SampleBatch& batch, const RitzConfig& cfg) {
  detail::check_ritz(spec, cfg);
  const int d = spec.dim;
  if (field.outputs() != d + 1) {
    throw ShapeError("local Ritz needs " + std::to_string(d + 1) + " outputs, field has " +
                     std::to_string(field.outputs()));
  }
  BatchTape& tape = field.tape();
  const auto in = field.evaluate(batch.interior, DerivativeRequest::uniform(d, [d] {
                                   std::vector<int> a;
                                   for (int i = 0; i < d; ++i) a.push_back(i);
                                   return a;
                                 }(), 1));
  const BatchVar p = in.values[0];
  BatchVar div = in.derivative(1, 0, 1);
  for (int a = 1; a < d; ++a) div = div + in.derivative(a + 1, a, 1);
  BatchVar mismatch = ad::square(in.derivative(0, 0, 1) - in.values[1]);
  for (int a = 1; a < d; ++a) {
    mismatch = mismatch + ad::square(in.derivative(0, a, 1) - in.values[static_cast<std::size_t>(a + 1)]);
  }
  const BatchVar integrand = 0.5 * ad::square(div) - detail::source_row(cfg, tape, batch.interior) * p +
                             cfg.coupling * mismatch;
  const BatchVar je = spec.domain.volume() * ad::mean(integrand);

  const auto bd = field.evaluate(batch.boundary, DerivativeRequest::none(d));
  BatchVar qn = tape.constant(1, batch.boundary.cols(), 0.0);
  for (int a = 0; a < d; ++a) {
    qn = qn + tape.constant(detail::face_mask(batch, a)) * bd.values[static_cast<std::size_t>(a + 1)];
  }
  const BatchVar jb = cfg.penalty * spec.domain.boundary_area() *
                      ad::mean(ad::square(bd.values[0]) + ad::square(qn));
  LossBreakdown l;
  l.equation = je;
  l.initial = detail::zero_scalar(tape);
  l.boundary = jb;
  l.total = je + jb;
  l.terms = {{"energy", je}};
  return l;
}

/// Standard energy on a single output with its Laplacian from order-2 jets.
inline LossBreakdown drm_loss(const ProblemSpec& spec, const Field& field,
                              const SampleBatch& batch, const RitzConfig& cfg) {
  detail::check_ritz(spec, cfg);
  const int d = spec.dim;
  if (field.outputs() != 1) throw ShapeError("deep Ritz needs a single-output field");
  BatchTape& tape = field.tape();
  std::vector<int> axes;
  for (int i = 0; i < d; ++i) axes.push_back(i);
  const auto in = field.evaluate(batch.interior, DerivativeRequest::uniform(d, axes, 2));
  BatchVar lap = in.derivative(0, 0, 2);
  for (int a = 1; a < d; ++a) lap = lap + in.derivative(0, a, 2);
  const BatchVar integrand =
      0.5 * ad::square(lap) - detail::source_row(cfg, tape, batch.interior) * in.values[0];
  const BatchVar je = spec.domain.volume() * ad::mean(integrand);

  const auto bd = field.evaluate(batch.boundary, DerivativeRequest::uniform(d, axes, 1));
  BatchVar dn = tape.constant(1, batch.boundary.cols(), 0.0);
  for (int a = 0; a < d; ++a) {
    dn = dn + tape.constant(detail::face_mask(batch, a)) * bd.derivative(0, a, 1);
  }
  const BatchVar jb = cfg.penalty * spec.domain.boundary_area() *
                      ad::mean(ad::square(bd.values[0]) + ad::square(dn));
  LossBreakdown l;
  l.equation = je;
  l.initial = detail::zero_scalar(tape);
  l.boundary = jb;
  l.total = je + jb;
  l.terms = {{"energy", je}};
  return l;
}

/// Configuration for the manufactured instance u* = prod sin^2(pi x_i).
inline RitzConfig manufactured_ritz(const ProblemSpec& spec, double penalty = 500.0) {
  RitzConfig c;
  c.penalty = penalty;
  c.source = [spec](std::span<const double> x) { return bilaplacian_source(spec, x); };
  return c;
}

}  // namespace ldgm
