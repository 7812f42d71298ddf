#pragma once

// Experiment configuration as flat `key = value` text. Lines starting with
// '#' are comments. Keys carry a section prefix (problem., network., ...).

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ldgm/errors.hpp"
#include "ldgm/metrics.hpp"
#include "ldgm/trainer.hpp"

namespace ldgm {

struct ExperimentConfig {
  std::string problem = "beam";
  double epsilon = 0.1;  // cahn_hilliard, allen_cahn
  int dim = 5;           // heat_nd, bilaplacian_ritz
  Method method = Method::kLdgm;
  int layers = 3;
  int width = 50;
  std::string activation = "tanh";
  SamplerConfig sampler;
  TrainConfig train;
  double ritz_penalty = 500.0;
  double ritz_coupling = 1.0;
  GridConfig grid;
  int reference_grid = 128;
  double reference_dt = 0.01;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "runs";

  ProblemSpec problem_spec() const {
    return make_problem(problem, {{"epsilon", epsilon}, {"d", dim}});
  }

  Activation hidden_activation() const {
    if (activation == "tanh") return Activation::tanh();
    if (activation == "sigmoid") return Activation::sigmoid();
    if (activation == "elu") return Activation::elu();
    if (activation == "relu") return Activation::relu();
    throw ConfigError("network.activation: unknown activation '" + activation + "'");
  }

  /// Training setup for one seed; the seed drives both initialization and
  /// sampling.
  TrainSetup setup(std::uint64_t seed) const {
    TrainSetup s;
    s.spec = problem_spec();
    s.method = method;
    s.network.input_dim = s.spec.input_dim();
    s.network.hidden_layers = layers;
    s.network.width = width;
    s.network.hidden_activation = hidden_activation();
    s.network.output_dim = required_outputs(s.spec, method, train.system_order);
    s.sampler = sampler;
    s.sampler.seed = seed;
    s.train = train;
    s.init_seed = seed;
    if (method == Method::kLdrm || method == Method::kDrm) {
      s.ritz = manufactured_ritz(s.spec, ritz_penalty);
      s.ritz.coupling = ritz_coupling;
    }
    return s;
  }

  void validate() const {
    (void)problem_spec();
    (void)hidden_activation();
    sampler.validate();
    train.validate();
    if (layers < 1 || width < 1) throw ConfigError("network.layers and network.width must be >= 1");
    if (!(ritz_penalty > 0.0)) throw ConfigError("ritz.penalty must be > 0");
    const bool ritz = method == Method::kLdrm || method == Method::kDrm;
    if (ritz != (problem == "bilaplacian_ritz")) {
      throw ConfigError("method " + to_string(method) + " does not apply to problem " + problem);
    }
    if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (is.fail() || !is.eof()) {
    throw ConfigError((key.empty() ? "" : key + ": ") + "cannot parse '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError((key.empty() ? "" : key + ": ") + "expected true or false, got '" + v + "'");
}

struct ConfigField {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool numeric = true;
  bool identity = true;  // part of the content hash
};

template <class T>
ConfigField number(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>("", v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <class S, class T>
ConfigField nested(S ExperimentConfig::*outer, T S::*member) {
  return {[outer, member](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool("", v);
            else (c.*outer).*member = parse_number<T>("", v);
          },
          [outer, member](const ExperimentConfig& c) {
            const T& x = (c.*outer).*member;
            if constexpr (std::is_same_v<T, bool>) return std::string(x ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return format_double(x);
            else return std::to_string(x);
          }};
}

inline ConfigField text(std::string ExperimentConfig::*member, bool identity = true) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }, false, identity};
}

// Keys in canonical order.
inline const std::vector<std::pair<std::string, ConfigField>>& fields() {
  static const std::vector<std::pair<std::string, ConfigField>> f = [] {
    std::vector<std::pair<std::string, ConfigField>> v;
    v.emplace_back("problem.name", text(&ExperimentConfig::problem));
    v.emplace_back("problem.epsilon", number(&ExperimentConfig::epsilon));
    v.emplace_back("problem.d", number(&ExperimentConfig::dim));
    v.emplace_back("method", ConfigField{[](ExperimentConfig& c, const std::string& s) { c.method = parse_method(s); },
                                   [](const ExperimentConfig& c) { return to_string(c.method); }, false});
    v.emplace_back("network.layers", number(&ExperimentConfig::layers));
    v.emplace_back("network.width", number(&ExperimentConfig::width));
    v.emplace_back("network.activation", text(&ExperimentConfig::activation));
    v.emplace_back("sampler.interior", nested(&ExperimentConfig::sampler, &SamplerConfig::interior));
    v.emplace_back("sampler.initial", nested(&ExperimentConfig::sampler, &SamplerConfig::initial));
    v.emplace_back("sampler.boundary", nested(&ExperimentConfig::sampler, &SamplerConfig::boundary));
    v.emplace_back("train.learning_rate", nested(&ExperimentConfig::train, &TrainConfig::learning_rate));
    v.emplace_back("train.stages", nested(&ExperimentConfig::train, &TrainConfig::stages));
    v.emplace_back("train.steps_per_stage", nested(&ExperimentConfig::train, &TrainConfig::steps_per_stage));
    v.emplace_back("train.beta1", nested(&ExperimentConfig::train, &TrainConfig::beta1));
    v.emplace_back("train.beta2", nested(&ExperimentConfig::train, &TrainConfig::beta2));
    v.emplace_back("train.epsilon", nested(&ExperimentConfig::train, &TrainConfig::epsilon));
    v.emplace_back("train.piecewise", nested(&ExperimentConfig::train, &TrainConfig::piecewise));
    v.emplace_back("train.piecewise_offset", nested(&ExperimentConfig::train, &TrainConfig::piecewise_offset));
    v.emplace_back("train.system_order", nested(&ExperimentConfig::train, &TrainConfig::system_order));
    v.emplace_back("train.jet_cap", nested(&ExperimentConfig::train, &TrainConfig::jet_cap));
    v.emplace_back("train.eval_every", nested(&ExperimentConfig::train, &TrainConfig::eval_every));
    v.emplace_back("ritz.penalty", number(&ExperimentConfig::ritz_penalty));
    v.emplace_back("ritz.coupling", number(&ExperimentConfig::ritz_coupling));
    v.emplace_back("eval.space_points", nested(&ExperimentConfig::grid, &GridConfig::space_points));
    v.emplace_back("eval.time_slices", nested(&ExperimentConfig::grid, &GridConfig::time_slices));
    v.emplace_back("eval.monte_carlo", nested(&ExperimentConfig::grid, &GridConfig::monte_carlo));
    v.emplace_back("eval.seed", nested(&ExperimentConfig::grid, &GridConfig::seed));
    v.emplace_back("eval.reference_grid", number(&ExperimentConfig::reference_grid));
    v.emplace_back("eval.reference_dt", number(&ExperimentConfig::reference_dt));
    v.emplace_back("seeds", ConfigField{[](ExperimentConfig& c, const std::string& s) {
                                    c.seeds.clear();
                                    std::stringstream ss(s);
                                    std::string item;
                                    while (std::getline(ss, item, ',')) {
                                      item = trim(item);
                                      if (!item.empty()) c.seeds.push_back(parse_number<std::uint64_t>("", item));
                                    }
                                  },
                                  [](const ExperimentConfig& c) {
                                    std::string s;
                                    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                                      s += (i ? "," : "") + std::to_string(c.seeds[i]);
                                    }
                                    return s;
                                  },
                                  false, false});
    v.emplace_back("output", text(&ExperimentConfig::output, false));
    return v;
  }();
  return f;
}

inline const ConfigField* find_field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& [name, f] : detail::fields()) k.push_back(name);
  return k;
}

inline bool is_numeric_key(const std::string& key) {
  const auto* f = detail::find_field(key);
  return f && f->numeric;
}

/// Set one key; throws ConfigError naming the key on failure.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const auto* f = detail::find_field(key);
  if (!f) throw ConfigError("unknown key '" + key + "'");
  try {
    f->set(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline std::string get_config_value(const ExperimentConfig& c, const std::string& key) {
  const auto* f = detail::find_field(key);
  if (!f) throw ConfigError("unknown key '" + key + "'");
  return f->get(c);
}

/// Parse config text over the defaults. All unknown keys are reported at once.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> unknown;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (!detail::find_field(key)) {
      unknown.push_back(key);
      continue;
    }
    set_config_value(c, key, value);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its resolved value, in canonical order.
inline std::string to_text(const ExperimentConfig& c) {
  std::string s;
  for (const auto& [k, f] : detail::fields()) s += k + " = " + f.get(c) + "\n";
  return s;
}

/// FNV-1a over the keys that define a run (seeds and output excluded).
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [k, f] : detail::fields()) {
    if (!f.identity) continue;
    for (char ch : k + "=" + f.get(c) + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace ldgm
