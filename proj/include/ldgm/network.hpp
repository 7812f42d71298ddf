#pragma once

// Feedforward multi-output networks
//   phi(x, t) = N_out o N_L o ... o N_1 o N_in (x, t)
// with an optional decoupled layout (shared trunk, independent branches per
// output group). Three evaluation paths share one parameter layout:
// plain doubles, the scalar tape and the batched tape.

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ldgm/autodiff/activation.hpp"
#include "ldgm/autodiff/batch_tape.hpp"
#include "ldgm/autodiff/jet.hpp"
#include "ldgm/autodiff/tape.hpp"
#include "ldgm/errors.hpp"

namespace ldgm {

using ad::Activation;

struct DecoupledLayout {
  int trunk_depth = 2;
  int branch_depth = 1;
  /// Partition of the output indices (0-based) into branch groups.
  std::vector<std::vector<int>> groups;

  friend bool operator==(const DecoupledLayout&,
                         const DecoupledLayout&) = default;
};

struct NetworkConfig {
  int input_dim = 2;  // space dimensions plus one for time when present
  int hidden_layers = 3;
  int width = 50;
  int output_dim = 1;
  Activation hidden_activation = Activation::tanh();
  /// One entry per output, or a single entry applied to all; empty means
  /// identity for every output.
  std::vector<Activation> output_activations;
  std::optional<DecoupledLayout> decoupled;

  Activation output_activation(int i) const {
    if (output_activations.empty()) return Activation::identity();
    if (output_activations.size() == 1) return output_activations[0];
    return output_activations.at(static_cast<std::size_t>(i));
  }

  void validate() const {
    if (input_dim < 1) throw ShapeError("input_dim must be >= 1");
    if (hidden_layers < 1) throw ShapeError("hidden_layers must be >= 1");
    if (width < 1) throw ShapeError("width must be >= 1");
    if (output_dim < 1) throw ShapeError("output_dim must be >= 1");
    if (output_activations.size() > 1 &&
        output_activations.size() != static_cast<std::size_t>(output_dim)) {
      throw ShapeError("need one output activation or one per output");
    }
    if (!decoupled) return;
    const auto& d = *decoupled;
    if (d.trunk_depth < 1 || d.branch_depth < 0 ||
        d.trunk_depth + d.branch_depth != hidden_layers) {
      throw ShapeError("decoupled trunk_depth + branch_depth must equal "
                       "hidden_layers");
    }
    std::vector<int> seen(static_cast<std::size_t>(output_dim), 0);
    for (const auto& g : d.groups) {
      if (g.empty()) throw ShapeError("empty branch group");
      for (int o : g) {
        if (o < 0 || o >= output_dim) {
          throw ShapeError("branch group references output " +
                           std::to_string(o + 1));
        }
        ++seen[static_cast<std::size_t>(o)];
      }
    }
    for (int s : seen) {
      if (s != 1) throw ShapeError("branch groups must partition the outputs");
    }
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct Layer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;
};

struct Branch {
  std::vector<int> outputs;
  std::vector<Layer> hidden;
  Layer out;
};

/// Trainable weights. Layer order: trunk layers, then for each branch its
/// hidden layers followed by its output layer.
struct ParameterSet {
  NetworkConfig config;
  std::vector<Layer> trunk;
  std::vector<Branch> branches;

  template <class F>
  void for_each_layer(F&& f) {
    for (auto& l : trunk) f(l);
    for (auto& b : branches) {
      for (auto& l : b.hidden) f(l);
      f(b.out);
    }
  }
  template <class F>
  void for_each_layer(F&& f) const {
    for (const auto& l : trunk) f(l);
    for (const auto& b : branches) {
      for (const auto& l : b.hidden) f(l);
      f(b.out);
    }
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each_layer([&n](const Layer& l) {
      n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    });
    return n;
  }

  /// Weights row-major, then bias, layer by layer.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(count()));
    Eigen::Index k = 0;
    for_each_layer([&](const Layer& l) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) v[k++] = l.weight(r, c);
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) v[k++] = l.bias[r];
    });
    return v;
  }

  void assign(const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != count()) {
      throw ShapeError("parameter vector has " + std::to_string(v.size()) +
                       " entries, expected " + std::to_string(count()));
    }
    Eigen::Index k = 0;
    for_each_layer([&](Layer& l) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = v[k++];
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = v[k++];
    });
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.config == b.config && a.count() == b.count() &&
           a.flatten() == b.flatten();
  }
};

namespace detail {

inline Layer zero_layer(int fan_out, int fan_in) {
  return {Eigen::MatrixXd::Zero(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
}

}  // namespace detail

/// Allocate the layer shapes for `config` with all weights zero.
inline ParameterSet zero_parameters(const NetworkConfig& config) {
  config.validate();
  ParameterSet p;
  p.config = config;
  const int n = config.width;
  const int trunk = config.decoupled ? config.decoupled->trunk_depth
                                     : config.hidden_layers;
  p.trunk.push_back(detail::zero_layer(n, config.input_dim));
  for (int i = 1; i < trunk; ++i) p.trunk.push_back(detail::zero_layer(n, n));
  if (!config.decoupled) {
    Branch b;
    for (int i = 0; i < config.output_dim; ++i) b.outputs.push_back(i);
    b.out = detail::zero_layer(config.output_dim, n);
    p.branches.push_back(std::move(b));
    return p;
  }
  for (const auto& g : config.decoupled->groups) {
    Branch b;
    b.outputs = g;
    for (int i = 0; i < config.decoupled->branch_depth; ++i) {
      b.hidden.push_back(detail::zero_layer(n, n));
    }
    b.out = detail::zero_layer(static_cast<int>(g.size()), n);
    p.branches.push_back(std::move(b));
  }
  return p;
}

/// Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline ParameterSet init_xavier(const NetworkConfig& config, std::uint64_t seed) {
  ParameterSet p = zero_parameters(config);
  std::mt19937_64 rng(seed);
  p.for_each_layer([&rng](Layer& l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(rng);
    }
  });
  return p;
}

// ---------------------------------------------------------------------------
// Plain evaluation

namespace detail {

inline Eigen::MatrixXd apply(const Activation& a, const Eigen::MatrixXd& z) {
  switch (a.kind) {
    case ad::ActivationKind::kIdentity:
      return z;
    case ad::ActivationKind::kTanh:
      return z.array().tanh().matrix();
    case ad::ActivationKind::kSigmoid:
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case ad::ActivationKind::kElu:
      return (z.array() > 0.0)
          .select(z.array(), a.alpha * (z.array().exp() - 1.0))
          .matrix();
    case ad::ActivationKind::kRelu:
      return z.array().max(0.0).matrix();
  }
  return z;
}

inline Eigen::MatrixXd dense(const Layer& l, const Eigen::MatrixXd& h) {
  return (l.weight * h).colwise() + l.bias;
}

}  // namespace detail

/// Outputs (output_dim x N) at the columns of `points` (input_dim x N).
inline Eigen::MatrixXd evaluate(const ParameterSet& p,
                                const Eigen::MatrixXd& points) {
  const auto& cfg = p.config;
  if (points.rows() != cfg.input_dim) {
    throw ShapeError("points have " + std::to_string(points.rows()) +
                     " rows, network expects " + std::to_string(cfg.input_dim));
  }
  Eigen::MatrixXd h = points;
  for (const auto& l : p.trunk) h = detail::apply(cfg.hidden_activation, detail::dense(l, h));
  Eigen::MatrixXd out(cfg.output_dim, points.cols());
  for (const auto& b : p.branches) {
    Eigen::MatrixXd hb = h;
    for (const auto& l : b.hidden) {
      hb = detail::apply(cfg.hidden_activation, detail::dense(l, hb));
    }
    const Eigen::MatrixXd z = detail::dense(b.out, hb);
    for (std::size_t r = 0; r < b.outputs.size(); ++r) {
      const int o = b.outputs[r];
      out.row(o) = detail::apply(cfg.output_activation(o),
                                 z.row(static_cast<Eigen::Index>(r)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derivative requests

/// Maximum derivative order wanted along each input axis (0 = none).
struct DerivativeRequest {
  std::vector<int> order;

  static DerivativeRequest none(int input_dim) {
    return {std::vector<int>(static_cast<std::size_t>(input_dim), 0)};
  }
  static DerivativeRequest uniform(int input_dim, std::span<const int> axes,
                                   int k) {
    auto r = none(input_dim);
    for (int a : axes) {
      if (a < 0 || a >= input_dim) {
        throw ShapeError("direction axis " + std::to_string(a) + " out of range");
      }
      r.order[static_cast<std::size_t>(a)] = k;
    }
    return r;
  }
  int max_order() const {
    int m = 0;
    for (int o : order) m = std::max(m, o);
    return m;
  }
  void merge(const DerivativeRequest& other) {
    if (order.size() < other.order.size()) order.resize(other.order.size(), 0);
    for (std::size_t i = 0; i < other.order.size(); ++i) {
      order[i] = std::max(order[i], other.order[i]);
    }
  }
};

/// Values of every output plus one jet per requested axis.
template <class T>
struct NetworkOutput {
  std::vector<T> values;
  std::vector<int> axes;  // axes carrying jets, ascending
  /// input_jets[output][k] is the jet along axes[k].
  std::vector<std::vector<ad::Jet<T>>> input_jets;

  const ad::Jet<T>& jet(int output, int axis) const {
    for (std::size_t k = 0; k < axes.size(); ++k) {
      if (axes[k] == axis) {
        return input_jets.at(static_cast<std::size_t>(output))[k];
      }
    }
    throw UnsupportedOrderError("no derivatives were requested along axis " +
                                std::to_string(axis));
  }
  /// d^order phi_output / d axis^order.
  T derivative(int output, int axis, int order) const {
    if (order == 0) return values.at(static_cast<std::size_t>(output));
    const auto& j = jet(output, axis);
    if (order > j.order()) {
      throw UnsupportedOrderError("derivative order " + std::to_string(order) +
                                  " was not requested along axis " +
                                  std::to_string(axis));
    }
    return j.derivative(order);
  }
};

namespace detail {

inline std::vector<int> requested_axes(const DerivativeRequest& req, int cap) {
  std::vector<int> axes;
  for (std::size_t a = 0; a < req.order.size(); ++a) {
    if (req.order[a] > 0) {
      ad::check_jet_order(req.order[a], cap);
      axes.push_back(static_cast<int>(a));
    }
  }
  return axes;
}

// Layer state of the batched path: one primal and one jet per axis, all jets
// sharing the primal node.
struct BatchState {
  ad::BatchVar primal;
  std::vector<ad::Jet<ad::BatchVar>> jets;
};

}  // namespace detail

/// Network bound to a batched tape. Binding registers every weight and bias
/// as a tape leaf once, so repeated forward calls accumulate gradients on the
/// same parameter nodes.
class BatchNetwork {
 public:
  BatchNetwork(const ParameterSet& params, ad::BatchTape& tape,
               bool as_parameters = true)
      : params_(&params), tape_(&tape) {
    params.for_each_layer([&](const Layer& l) {
      ad::Array w = l.weight.array();
      ad::Array b = l.bias.array();
      if (as_parameters) {
        vars_.push_back(tape.parameter(std::move(w)));
        vars_.push_back(tape.parameter(std::move(b)));
      } else {
        vars_.push_back(tape.constant(std::move(w)));
        vars_.push_back(tape.constant(std::move(b)));
      }
    });
  }

  const ParameterSet& parameters() const { return *params_; }
  ad::BatchTape& tape() const { return *tape_; }

  /// Outputs as 1 x N rows with jets along the requested axes.
  NetworkOutput<ad::BatchVar> forward(const Eigen::MatrixXd& points,
                                      const DerivativeRequest& req,
                                      int jet_cap = ad::kMaxJetOrder) const {
    const auto& cfg = params_->config;
    if (points.rows() != cfg.input_dim) {
      throw ShapeError("points have " + std::to_string(points.rows()) +
                       " rows, network expects " + std::to_string(cfg.input_dim));
    }
    if (req.order.size() != static_cast<std::size_t>(cfg.input_dim)) {
      throw ShapeError("derivative request does not match input_dim");
    }
    const auto axes = detail::requested_axes(req, jet_cap);
    const Eigen::Index n_pts = points.cols();

    std::size_t v = 0;
    // input layer
    detail::BatchState s;
    {
      const ad::BatchVar& w = vars_[v];
      const ad::BatchVar& b = vars_[v + 1];
      v += 2;
      ad::BatchVar x = tape_->constant(points.array());
      s.primal = tape_->add_column(tape_->matmul(w, x), b);
      for (int a : axes) {
        ad::Array seed = ad::Array::Zero(cfg.input_dim, n_pts);
        seed.row(a).setOnes();
        std::vector<std::optional<ad::BatchVar>> c{s.primal};
        c.push_back(tape_->matmul(w, tape_->constant(std::move(seed))));
        for (int j = 2; j <= req.order[static_cast<std::size_t>(a)]; ++j) {
          c.push_back(std::nullopt);
        }
        s.jets.emplace_back(std::move(c));
      }
      activate(s, cfg.hidden_activation);
    }
    for (std::size_t i = 1; i < params_->trunk.size(); ++i, v += 2) {
      s = dense(s, vars_[v], vars_[v + 1]);
      activate(s, cfg.hidden_activation);
    }

    NetworkOutput<ad::BatchVar> out;
    out.axes = axes;
    out.values.resize(static_cast<std::size_t>(cfg.output_dim));
    out.input_jets.resize(static_cast<std::size_t>(cfg.output_dim));
    for (const auto& branch : params_->branches) {
      detail::BatchState h = s;
      for (std::size_t i = 0; i < branch.hidden.size(); ++i, v += 2) {
        h = dense(h, vars_[v], vars_[v + 1]);
        activate(h, cfg.hidden_activation);
      }
      detail::BatchState z = dense(h, vars_[v], vars_[v + 1]);
      v += 2;
      for (std::size_t r = 0; r < branch.outputs.size(); ++r) {
        const int o = branch.outputs[r];
        const auto row = static_cast<Eigen::Index>(r);
        detail::BatchState y;
        y.primal = tape_->row(z.primal, row);
        for (const auto& jet : z.jets) {
          std::vector<std::optional<ad::BatchVar>> c{y.primal};
          for (int j = 1; j <= jet.order(); ++j) {
            if (jet.is_zero(j)) {
              c.push_back(std::nullopt);
            } else {
              c.push_back(tape_->row(*jet.raw(j), row));
            }
          }
          y.jets.emplace_back(std::move(c));
        }
        activate(y, cfg.output_activation(o));
        out.values[static_cast<std::size_t>(o)] = y.primal;
        out.input_jets[static_cast<std::size_t>(o)] = std::move(y.jets);
      }
    }
    return out;
  }

  /// Parameter leaves in layer order (weight, bias, weight, bias, ...).
  const std::vector<ad::BatchVar>& variables() const { return vars_; }

  /// Flattened gradient of a 1 x 1 output, in ParameterSet::flatten order.
  Eigen::VectorXd gradient(const ad::BatchVar& output) const {
    const auto grads = tape_->gradient(output, vars_);
    Eigen::VectorXd g(static_cast<Eigen::Index>(params_->count()));
    Eigen::Index k = 0;
    for (const auto& a : grads) {
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) g[k++] = a(r, c);
      }
    }
    return g;
  }

 private:
  detail::BatchState dense(const detail::BatchState& s, const ad::BatchVar& w,
                           const ad::BatchVar& b) const {
    detail::BatchState out;
    out.primal = tape_->add_column(tape_->matmul(w, s.primal), b);
    for (const auto& jet : s.jets) {
      std::vector<std::optional<ad::BatchVar>> c{out.primal};
      for (int j = 1; j <= jet.order(); ++j) {
        if (jet.is_zero(j)) {
          c.push_back(std::nullopt);
        } else {
          c.push_back(tape_->matmul(w, *jet.raw(j)));
        }
      }
      out.jets.emplace_back(std::move(c));
    }
    return out;
  }

  static void activate(detail::BatchState& s, const Activation& act) {
    if (act.kind == ad::ActivationKind::kIdentity) return;
    const auto primal = ad::activation_primal(s.primal, act);
    for (auto& jet : s.jets) jet = ad::activate(jet, act, primal);
    s.primal = primal.value;
  }

  const ParameterSet* params_;
  ad::BatchTape* tape_;
  std::vector<ad::BatchVar> vars_;
};

// ---------------------------------------------------------------------------
// Scalar tape path

/// Network bound to a scalar tape, one TrackedScalar per weight.
class TrackedNetwork {
 public:
  using S = ad::TrackedScalar;

  TrackedNetwork(const ParameterSet& params, ad::Tape& tape)
      : params_(&params), tape_(&tape) {
    params.for_each_layer([&](const Layer& l) {
      BoundLayer bl;
      bl.weight.resize(static_cast<std::size_t>(l.weight.rows()));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
          bl.weight[static_cast<std::size_t>(r)].push_back(tape.parameter(l.weight(r, c)));
        }
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
        bl.bias.push_back(tape.parameter(l.bias[r]));
      }
      layers_.push_back(std::move(bl));
    });
  }

  /// Parameter scalars in ParameterSet::flatten order.
  std::vector<S> parameters() const {
    std::vector<S> out;
    for (const auto& l : layers_) {
      for (const auto& row : l.weight) out.insert(out.end(), row.begin(), row.end());
      out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
  }

  NetworkOutput<S> forward(std::span<const double> point,
                           const DerivativeRequest& req,
                           int jet_cap = ad::kMaxJetOrder) const {
    const auto& cfg = params_->config;
    if (point.size() != static_cast<std::size_t>(cfg.input_dim) ||
        req.order.size() != point.size()) {
      throw ShapeError("point dimension does not match input_dim");
    }
    const auto axes = detail::requested_axes(req, jet_cap);
    // inputs as jets: one vector of per-axis jets per input coordinate
    State s;
    for (std::size_t i = 0; i < point.size(); ++i) {
      s.primal.push_back(tape_->constant(point[i]));
    }
    for (int a : axes) {
      std::vector<ad::Jet<S>> per_input;
      for (std::size_t i = 0; i < point.size(); ++i) {
        const double seed = static_cast<int>(i) == a ? 1.0 : 0.0;
        std::vector<std::optional<S>> c{s.primal[i]};
        c.push_back(seed == 0.0 ? std::nullopt : std::optional<S>(S(seed)));
        for (int j = 2; j <= req.order[static_cast<std::size_t>(a)]; ++j) {
          c.push_back(std::nullopt);
        }
        per_input.emplace_back(std::move(c));
      }
      s.jets.push_back(std::move(per_input));
    }

    std::size_t li = 0;
    for (std::size_t i = 0; i < params_->trunk.size(); ++i) {
      s = dense(s, layers_[li++]);
      activate(s, cfg.hidden_activation);
    }
    NetworkOutput<S> out;
    out.axes = axes;
    out.values.resize(static_cast<std::size_t>(cfg.output_dim));
    out.input_jets.resize(static_cast<std::size_t>(cfg.output_dim));
    for (const auto& branch : params_->branches) {
      State h = s;
      for (std::size_t i = 0; i < branch.hidden.size(); ++i) {
        h = dense(h, layers_[li++]);
        activate(h, cfg.hidden_activation);
      }
      State z = dense(h, layers_[li++]);
      for (std::size_t r = 0; r < branch.outputs.size(); ++r) {
        const int o = branch.outputs[r];
        State y;
        y.primal.push_back(z.primal[r]);
        for (const auto& per_axis : z.jets) y.jets.push_back({per_axis[r]});
        activate(y, cfg.output_activation(o));
        out.values[static_cast<std::size_t>(o)] = y.primal[0];
        for (auto& per_axis : y.jets) {
          out.input_jets[static_cast<std::size_t>(o)].push_back(per_axis[0]);
        }
      }
    }
    return out;
  }

 private:
  struct BoundLayer {
    std::vector<std::vector<S>> weight;
    std::vector<S> bias;
  };
  struct State {
    std::vector<S> primal;                       // one per unit
    std::vector<std::vector<ad::Jet<S>>> jets;   // [axis][unit]
  };

  static State dense(const State& s, const BoundLayer& l) {
    State out;
    for (std::size_t r = 0; r < l.weight.size(); ++r) {
      S acc = l.bias[r];
      for (std::size_t c = 0; c < s.primal.size(); ++c) {
        acc = acc + l.weight[r][c] * s.primal[c];
      }
      out.primal.push_back(acc);
    }
    for (const auto& per_unit : s.jets) {
      std::vector<ad::Jet<S>> next;
      const int k = per_unit.front().order();
      for (std::size_t r = 0; r < l.weight.size(); ++r) {
        std::vector<std::optional<S>> c{out.primal[r]};
        for (int j = 1; j <= k; ++j) {
          std::optional<S> acc;
          for (std::size_t u = 0; u < per_unit.size(); ++u) {
            if (per_unit[u].is_zero(j)) continue;
            S term = l.weight[r][u] * *per_unit[u].raw(j);
            acc = acc ? std::optional<S>(*acc + term) : std::optional<S>(term);
          }
          c.push_back(acc);
        }
        next.emplace_back(std::move(c));
      }
      out.jets.push_back(std::move(next));
    }
    return out;
  }

  static void activate(State& s, const Activation& act) {
    if (act.kind == ad::ActivationKind::kIdentity) return;
    for (std::size_t u = 0; u < s.primal.size(); ++u) {
      const auto primal = ad::activation_primal(s.primal[u], act);
      for (auto& per_unit : s.jets) per_unit[u] = ad::activate(per_unit[u], act, primal);
      s.primal[u] = primal.value;
    }
  }

  const ParameterSet* params_;
  ad::Tape* tape_;
  std::vector<BoundLayer> layers_;
};

/// Input vector (x, t) or x for stationary networks.
inline std::vector<double> make_input(std::span<const double> x,
                                      std::optional<double> t) {
  std::vector<double> in(x.begin(), x.end());
  if (t) in.push_back(*t);
  return in;
}

/// Outputs at one point, recorded on `tape` with fresh parameter leaves.
inline NetworkOutput<ad::TrackedScalar> forward(const ParameterSet& params,
                                                ad::Tape& tape,
                                                std::span<const double> x,
                                                std::optional<double> t) {
  TrackedNetwork net(params, tape);
  const auto in = make_input(x, t);
  return net.forward(in, DerivativeRequest::none(params.config.input_dim));
}

/// Outputs with jets of the given order along each listed input axis.
inline NetworkOutput<ad::TrackedScalar> forward_with_derivatives(
    const ParameterSet& params, ad::Tape& tape, std::span<const double> x,
    std::optional<double> t, std::span<const int> directions, int order) {
  ad::check_jet_order(order);
  TrackedNetwork net(params, tape);
  const auto in = make_input(x, t);
  return net.forward(in, DerivativeRequest::uniform(params.config.input_dim,
                                                    directions, order));
}

// ---------------------------------------------------------------------------
// Checkpoints: one header line of key=value pairs, then one value per line.

namespace detail {

inline std::string groups_to_string(const std::vector<std::vector<int>>& groups) {
  std::string s;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) s += '|';
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      if (i) s += ',';
      s += std::to_string(groups[g][i] + 1);
    }
  }
  return s;
}

inline std::vector<std::vector<int>> parse_groups(const std::string& s) {
  std::vector<std::vector<int>> groups;
  std::stringstream gs(s);
  std::string group;
  while (std::getline(gs, group, '|')) {
    std::vector<int> g;
    std::stringstream is(group);
    std::string item;
    while (std::getline(is, item, ',')) {
      try {
        g.push_back(std::stoi(item) - 1);
      } catch (const std::exception&) {
        throw ConfigError("bad branch group entry '" + item + "'");
      }
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace detail

inline std::string to_header(const NetworkConfig& c) {
  std::string s = "input_dim=" + std::to_string(c.input_dim) +
                  " hidden_layers=" + std::to_string(c.hidden_layers) +
                  " width=" + std::to_string(c.width) +
                  " output_dim=" + std::to_string(c.output_dim) +
                  " hidden_activation=" + ad::to_string(c.hidden_activation) +
                  " output_activation=";
  if (c.output_activations.empty()) {
    s += "identity";
  } else {
    for (std::size_t i = 0; i < c.output_activations.size(); ++i) {
      if (i) s += ',';
      s += ad::to_string(c.output_activations[i]);
    }
  }
  s += " decoupled=";
  if (!c.decoupled) {
    s += "none";
  } else {
    s += std::to_string(c.decoupled->trunk_depth) + "/" +
         std::to_string(c.decoupled->branch_depth) + ":" +
         detail::groups_to_string(c.decoupled->groups);
  }
  return s;
}

inline NetworkConfig parse_header(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("bad header token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto need = [&kv](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("checkpoint header lacks '" + k + "'");
    return it->second;
  };
  NetworkConfig c;
  c.input_dim = std::stoi(need("input_dim"));
  c.hidden_layers = std::stoi(need("hidden_layers"));
  c.width = std::stoi(need("width"));
  c.output_dim = std::stoi(need("output_dim"));
  c.hidden_activation = ad::parse_activation(need("hidden_activation"));
  {
    std::stringstream as(need("output_activation"));
    std::string a;
    std::vector<Activation> acts;
    while (std::getline(as, a, ',')) acts.push_back(ad::parse_activation(a));
    if (!(acts.size() == 1 && acts[0] == Activation::identity())) {
      c.output_activations = std::move(acts);
    }
  }
  const std::string& dec = need("decoupled");
  if (dec != "none") {
    const auto slash = dec.find('/');
    const auto colon = dec.find(':');
    if (slash == std::string::npos || colon == std::string::npos) {
      throw ConfigError("bad decoupled spec '" + dec + "'");
    }
    DecoupledLayout d;
    d.trunk_depth = std::stoi(dec.substr(0, slash));
    d.branch_depth = std::stoi(dec.substr(slash + 1, colon - slash - 1));
    d.groups = detail::parse_groups(dec.substr(colon + 1));
    c.decoupled = d;
  }
  c.validate();
  return c;
}

inline void save_checkpoint(const ParameterSet& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write checkpoint " + path);
  f << to_header(p.config) << '\n';
  const Eigen::VectorXd v = p.flatten();
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    f << buf << '\n';
  }
}

inline ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read checkpoint " + path);
  std::string header;
  std::getline(f, header);
  ParameterSet p = zero_parameters(parse_header(header));
  Eigen::VectorXd v(static_cast<Eigen::Index>(p.count()));
  std::string line;
  Eigen::Index i = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (i >= v.size()) throw ShapeError("checkpoint has too many values");
    v[i++] = std::strtod(line.c_str(), nullptr);
  }
  if (i != v.size()) throw ShapeError("checkpoint has too few values");
  p.assign(v);
  return p;
}

}  // namespace ldgm
