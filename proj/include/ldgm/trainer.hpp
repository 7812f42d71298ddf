#pragma once

// The two-level training loop: s1 sampling stages, each followed by s2 Adam
// steps on the fixed batch.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ldgm/loss.hpp"
#include "ldgm/metrics.hpp"
#include "ldgm/network.hpp"
#include "ldgm/ritz.hpp"
#include "ldgm/sampling.hpp"
#include "ldgm/system.hpp"

namespace ldgm {

enum class Method { kLdgm, kDgm, kLdrm, kDrm };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kLdgm:
      return "ldgm";
    case Method::kDgm:
      return "dgm";
    case Method::kLdrm:
      return "ldrm";
    case Method::kDrm:
      return "drm";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "ldgm") return Method::kLdgm;
  if (s == "dgm") return Method::kDgm;
  if (s == "ldrm") return Method::kLdrm;
  if (s == "drm") return Method::kDrm;
  throw ConfigError("unknown method '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int stages = 1000;          // s1
  int steps_per_stage = 5;    // s2
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// r_k = r * 10^-max(0, floor(log10 k) - piecewise_offset) when enabled.
  bool piecewise = false;
  int piecewise_offset = 3;
  int system_order = 1;       // LDGM rewrite
  int jet_cap = ad::kMaxJetOrder;
  int eval_every = 1;         // stages between error evaluations

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (stages < 0) throw ConfigError("stages must be >= 0");
    if (steps_per_stage < 1) throw ConfigError("steps_per_stage must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  }

  double rate(long step) const {
    if (!piecewise || step < 1) return learning_rate;
    const int decade = static_cast<int>(std::floor(std::log10(static_cast<double>(step))));
    return learning_rate * std::pow(10.0, -std::max(0, decade - piecewise_offset));
  }
};

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;

  explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Bias-corrected Adam update of `theta` in place.
inline void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& s,
                      double rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (grad.size() != theta.size()) throw ShapeError("gradient and parameters differ in size");
  if (s.m.size() == 0) s = AdamState(theta.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NonFiniteError("non-finite gradient entry " + std::to_string(i) + " at step " +
                           std::to_string(s.step + 1));
    }
  }
  ++s.step;
  s.m = beta1 * s.m + (1.0 - beta1) * grad;
  s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
  theta.array() -= rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
}

struct ReportRow {
  long step = 0;
  double total = 0, equation = 0, initial = 0, boundary = 0;
  double rel_l2 = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
};

struct TrainReport {
  std::vector<ReportRow> rows;
  bool aborted = false;
  std::string reason;

  static constexpr const char* kHeader = "step,J_total,J_e,J_i,J_b,rel_l2,seconds";

  std::optional<double> final_error() const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
      if (!std::isnan(it->rel_l2)) return it->rel_l2;
    }
    return std::nullopt;
  }

  void write_csv(std::ostream& os) const {
    os << kHeader << '\n';
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.step, r.total,
                    r.equation, r.initial, r.boundary, r.rel_l2, r.seconds);
      os << buf;
    }
  }
  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    write_csv(f);
  }
  static TrainReport read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read " + path);
    std::string line;
    std::getline(f, line);
    if (line != kHeader) throw ConfigError(path + ": unexpected header '" + line + "'");
    TrainReport rep;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> v;
      while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
      if (v.size() != 7) throw ConfigError(path + ": bad row '" + line + "'");
      rep.rows.push_back({static_cast<long>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6]});
    }
    return rep;
  }
};

struct TrainResult {
  TrainReport report;
  ParameterSet params;
};

/// Everything one training run needs besides the initial parameters.
struct TrainSetup {
  ProblemSpec spec;
  Method method = Method::kLdgm;
  NetworkConfig network;
  SamplerConfig sampler;
  TrainConfig train;
  RitzConfig ritz;
  std::uint64_t init_seed = 0;
};

/// Output count the method needs for `spec`.
inline int required_outputs(const ProblemSpec& spec, Method m, int system_order = 1) {
  switch (m) {
    case Method::kLdgm:
      return rewrite(spec, system_order).output_dim();
    case Method::kLdrm:
      return spec.dim + 1;
    default:
      return 1;
  }
}

/// Loss of `params` on `batch`, recorded on `tape`.
inline LossBreakdown assemble_loss(const TrainSetup& s, const SystemForm* system,
                                   const Field& field, const SampleBatch& batch) {
  switch (s.method) {
    case Method::kLdgm:
      return ldgm_loss(s.spec, *system, field, batch);
    case Method::kDgm:
      return dgm_loss(s.spec, field, batch, s.train.jet_cap);
    case Method::kLdrm:
      return ldrm_loss(s.spec, field, batch, s.ritz);
    case Method::kDrm:
      return drm_loss(s.spec, field, batch, s.ritz);
  }
  throw ConfigError("unknown method");
}

/// Called after every logged stage; returning false stops training.
using StageCallback = std::function<bool(const ReportRow&)>;

inline TrainResult train(const TrainSetup& s, const Evaluator* eval = nullptr,
                         const StageCallback& on_stage = {}) {
  s.train.validate();
  s.sampler.validate();
  const int m = required_outputs(s.spec, s.method, s.train.system_order);
  if (s.network.output_dim != m) {
    throw ShapeError("network has " + std::to_string(s.network.output_dim) + " outputs, " +
                     to_string(s.method) + " on " + s.spec.name + " needs " + std::to_string(m));
  }
  if (s.network.input_dim != s.spec.input_dim()) {
    throw ShapeError("network input_dim " + std::to_string(s.network.input_dim) +
                     " does not match the problem (" + std::to_string(s.spec.input_dim()) + ")");
  }
  std::optional<SystemForm> system;
  if (s.method == Method::kLdgm) system = rewrite(s.spec, s.train.system_order);

  TrainResult res{{}, init_xavier(s.network, s.init_seed)};
  Eigen::VectorXd theta = res.params.flatten();
  AdamState adam(theta.size());
  double elapsed = 0.0;
  long step = 0;
  using Clock = std::chrono::steady_clock;

  for (int stage = 0; stage < s.train.stages; ++stage) {
    const auto t0 = Clock::now();
    const SampleBatch batch = draw_batch(s.sampler, s.spec, stage);
    LossValues last;
    for (int j = 0; j < s.train.steps_per_stage; ++j) {
      ad::BatchTape tape;
      NetworkField field(res.params, tape);
      const LossBreakdown loss = assemble_loss(s, system ? &*system : nullptr, field, batch);
      last = loss.values();
      if (!std::isfinite(last.total)) {
        res.report.aborted = true;
        res.report.reason = "non-finite loss at stage " + std::to_string(stage) + ", step " +
                            std::to_string(step + 1) + " (J_e=" + std::to_string(last.equation) +
                            ", J_i=" + std::to_string(last.initial) +
                            ", J_b=" + std::to_string(last.boundary) + ")";
        return res;
      }
      const Eigen::VectorXd g = field.network().gradient(loss.total);
      try {
        adam_step(theta, g, adam, s.train.rate(step + 1), s.train.beta1, s.train.beta2,
                  s.train.epsilon);
      } catch (const NonFiniteError& e) {
        res.report.aborted = true;
        res.report.reason = std::string(e.what()) + " (stage " + std::to_string(stage) + ")";
        return res;
      }
      res.params.assign(theta);
      ++step;
    }
    elapsed += std::chrono::duration<double>(Clock::now() - t0).count();
    ReportRow row{step, last.total, last.equation, last.initial, last.boundary,
                  std::numeric_limits<double>::quiet_NaN(), elapsed};
    const bool final_stage = stage + 1 == s.train.stages;
    if (eval && ((stage + 1) % s.train.eval_every == 0 || final_stage)) row.rel_l2 = (*eval)(res.params);
    res.report.rows.push_back(row);
    if (on_stage && !on_stage(row)) break;
  }
  return res;
}

/// Least-squares fit of a 1-D stationary network to `target` on uniform
/// samples of [lo, hi], used by the derivative-scale diagnostic.
inline ParameterSet fit_function(const NetworkConfig& cfg, const std::function<double(double)>& target,
                                 double lo, double hi, int steps, double rate, std::uint64_t seed,
                                 int batch = 256) {
  if (cfg.input_dim != 1 || cfg.output_dim != 1) throw ShapeError("fit_function needs a 1-in 1-out network");
  ParameterSet p = init_xavier(cfg, seed);
  Eigen::VectorXd theta = p.flatten();
  AdamState adam(theta.size());
  for (int k = 0; k < steps; ++k) {
    auto rng = region_stream(seed, static_cast<std::uint64_t>(k), Region::kInterior);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd x(1, batch);
    ad::Array y(1, batch);
    for (int c = 0; c < batch; ++c) {
      x(0, c) = u(rng);
      y(0, c) = target(x(0, c));
    }
    ad::BatchTape tape;
    BatchNetwork net(p, tape);
    const auto out = net.forward(x, DerivativeRequest::none(1));
    const BatchVar loss = ad::mean(ad::square(out.values[0] - tape.constant(y)));
    adam_step(theta, net.gradient(loss), adam, rate);
    p.assign(theta);
  }
  return p;
}

}  // namespace ldgm
