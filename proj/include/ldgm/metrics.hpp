#pragma once

// Error measurement on fixed evaluation sets.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ldgm/network.hpp"
#include "ldgm/problem.hpp"
#include "ldgm/reference.hpp"
#include "ldgm/sampling.hpp"

namespace ldgm {

/// ||candidate - truth|| / ||truth|| with optional nonnegative weights.
inline double relative_l2(const Eigen::VectorXd& candidate, const Eigen::VectorXd& truth,
                          const Eigen::VectorXd& weights = {}) {
  if (candidate.size() != truth.size()) throw ShapeError("relative_l2: size mismatch");
  const Eigen::ArrayXd w =
      weights.size() ? Eigen::ArrayXd(weights.array()) : Eigen::ArrayXd::Ones(truth.size());
  const double den = (w * truth.array().square()).sum();
  if (!(den > 0.0)) throw UndefinedMetricError("relative L2 error of a zero truth");
  return std::sqrt((w * (candidate - truth).array().square()).sum() / den);
}

struct GridConfig {
  int space_points = 256;   // per axis for d = 1
  int time_slices = 11;
  int monte_carlo = 10000;  // total space-time points for d >= 2
  std::uint64_t seed = 20240917;
};

/// Points (input_dim x M) where errors are measured.
struct EvaluationGrid {
  Eigen::MatrixXd points;
};

inline EvaluationGrid make_evaluation_grid(const ProblemSpec& spec, const GridConfig& cfg = {}) {
  EvaluationGrid g;
  if (spec.dim >= 2) {
    g.points = draw_interior(spec, cfg.monte_carlo, cfg.seed, 0, Region::kMetric);
    return g;
  }
  const int nx = cfg.space_points;
  const int nt = spec.horizon ? cfg.time_slices : 1;
  g.points.resize(spec.input_dim(), nx * nt);
  const double lo = spec.domain.lo[0], w = spec.domain.width(0);
  for (int k = 0; k < nt; ++k) {
    const double t = nt > 1 ? *spec.horizon * k / (nt - 1) : 0.0;
    for (int i = 0; i < nx; ++i) {
      const Eigen::Index c = k * nx + i;
      g.points(0, c) = lo + w * i / (nx - 1);
      if (spec.horizon) g.points(1, c) = t;
    }
  }
  return g;
}

/// Truth values at the columns of a point matrix.
using TruthProvider = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

inline TruthProvider exact_truth(const ProblemSpec& spec) {
  if (!spec.exact) throw UnavailableError("problem '" + spec.name + "' has no exact solution");
  return [spec](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd v(pts.cols());
    std::vector<double> x(static_cast<std::size_t>(spec.dim));
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      for (int a = 0; a < spec.dim; ++a) x[static_cast<std::size_t>(a)] = pts(a, c);
      v[c] = spec.exact_value(x, spec.horizon ? pts(spec.dim, c) : 0.0);
    }
    return v;
  };
}

inline TruthProvider reference_truth(std::shared_ptr<const ReferenceField> ref) {
  return [ref](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd v(pts.cols());
    for (Eigen::Index c = 0; c < pts.cols(); ++c) v[c] = ref->interpolate(pts(0, c), pts(1, c));
    return v;
  };
}

/// Relative L2 error of network output 0 on a fixed grid.
class Evaluator {
 public:
  Evaluator(EvaluationGrid grid, const TruthProvider& truth)
      : grid_(std::move(grid)), truth_(truth(grid_.points)) {}

  const EvaluationGrid& grid() const { return grid_; }
  const Eigen::VectorXd& truth() const { return truth_; }
  Eigen::VectorXd predict(const ParameterSet& p) const {
    return evaluate(p, grid_.points).row(0).transpose();
  }
  double operator()(const ParameterSet& p) const { return relative_l2(predict(p), truth_); }

 private:
  EvaluationGrid grid_;
  Eigen::VectorXd truth_;
};

/// Exact truth where available, the spectral reference for Cahn-Hilliard.
inline std::unique_ptr<Evaluator> default_evaluator(const ProblemSpec& spec,
                                                    const GridConfig& cfg = {},
                                                    std::shared_ptr<const ReferenceField> ref = nullptr) {
  if (spec.exact) return std::make_unique<Evaluator>(make_evaluation_grid(spec, cfg), exact_truth(spec));
  if (spec.name == "cahn_hilliard") {
    if (!ref) ref = std::make_shared<ReferenceField>(ch_reference(spec.params.at("epsilon")));
    return std::make_unique<Evaluator>(make_evaluation_grid(spec, cfg), reference_truth(ref));
  }
  return nullptr;
}

/// Fraction of points where prediction and truth share a sign (zeros of
/// the truth excluded).
inline double sign_agreement(const Eigen::VectorXd& candidate, const Eigen::VectorXd& truth) {
  int agree = 0, total = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0.0) continue;
    ++total;
    if ((candidate[i] > 0) == (truth[i] > 0)) ++agree;
  }
  if (total == 0) throw UndefinedMetricError("sign agreement of a zero truth");
  return static_cast<double>(agree) / total;
}

// ---------------------------------------------------------------------------
// Derivative-scale diagnostic

struct DerivativeScaleRow {
  int order = 0;
  double discrepancy = 0.0;  // ||D^k phi - D^k u||
  double truth_norm = 0.0;   // ||D^k u||
  double relative() const { return discrepancy / truth_norm; }
};

struct DerivativeScaleReport {
  bool skipped = false;  // the fit precondition was not met
  double fit_error = 0.0;
  std::vector<DerivativeScaleRow> rows;
};

/// Compare jets of a 1-D stationary network with the derivatives of a
/// reference function on `points` (1 x M).
inline DerivativeScaleReport derivative_scale_diagnostic(
    const ParameterSet& params, const Eigen::MatrixXd& points,
    const std::function<double(double, int)>& target, int max_order = 4,
    double fit_threshold = 0.01) {
  if (params.config.input_dim != 1) throw ShapeError("diagnostic needs a 1-D stationary network");
  ad::BatchTape tape;
  BatchNetwork net(params, tape, false);
  const auto out = net.forward(points, DerivativeRequest{{max_order}});
  DerivativeScaleReport rep;
  Eigen::VectorXd phi = out.values[0].value().row(0).transpose();
  Eigen::VectorXd u(points.cols());
  for (Eigen::Index c = 0; c < points.cols(); ++c) u[c] = target(points(0, c), 0);
  rep.fit_error = relative_l2(phi, u);
  rep.skipped = !(rep.fit_error < fit_threshold);
  for (int k = 0; k <= max_order; ++k) {
    Eigen::VectorXd dk = out.derivative(0, 0, k).value().row(0).transpose();
    Eigen::VectorXd uk(points.cols());
    for (Eigen::Index c = 0; c < points.cols(); ++c) uk[c] = target(points(0, c), k);
    rep.rows.push_back({k, (dk - uk).norm() / std::sqrt(static_cast<double>(uk.size())),
                        uk.norm() / std::sqrt(static_cast<double>(uk.size()))});
  }
  return rep;
}

}  // namespace ldgm
