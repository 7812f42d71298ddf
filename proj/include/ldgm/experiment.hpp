#pragma once

// Run directories, seed sweeps and report comparison. A run lives in
// <output>/<problem>-<method>-<hash>/seed-<n> and is skipped when a completed
// run already exists there.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ldgm/config.hpp"
#include "ldgm/metrics.hpp"
#include "ldgm/reference.hpp"
#include "ldgm/trainer.hpp"

namespace ldgm {

namespace fs = std::filesystem;

struct RunOutcome {
  std::string dir;
  std::uint64_t seed = 0;
  bool aborted = false;
  bool reused = false;
  std::string reason;
  std::optional<double> final_error;
  double seconds = 0.0;
  long steps = 0;
};

inline std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline fs::path run_directory(const ExperimentConfig& c, std::uint64_t seed) {
  return fs::path(c.output) / (c.problem + "-" + to_string(c.method) + "-" + hex16(config_hash(c))) /
         ("seed-" + std::to_string(seed));
}

namespace detail {

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << s;
}

inline std::map<std::string, std::string> read_key_values(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : "nan";
}

// Display data: the evaluation grid for d = 1, otherwise the slice
// x_2 = ... = x_d = 0 on a 101 x 11 (x_1, t) grid.
inline Eigen::MatrixXd display_points(const ProblemSpec& spec, const Evaluator& ev) {
  if (spec.dim == 1) return ev.grid().points;
  const int nx = 101, nt = spec.horizon ? 11 : 1;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(spec.input_dim(), nx * nt);
  for (int k = 0; k < nt; ++k) {
    for (int i = 0; i < nx; ++i) {
      p(0, k * nx + i) = spec.domain.lo[0] + spec.domain.width(0) * i / (nx - 1);
      if (spec.horizon) p(spec.dim, k * nx + i) = *spec.horizon * k / (nt - 1);
    }
  }
  return p;
}

}  // namespace detail

/// Spectral reference matching the config, for Cahn-Hilliard runs.
inline std::shared_ptr<const ReferenceField> config_reference(const ExperimentConfig& c) {
  if (c.problem != "cahn_hilliard") return nullptr;
  return std::make_shared<ReferenceField>(ch_reference(c.epsilon, c.reference_grid, c.reference_dt));
}

/// Train one seed and persist report.csv, checkpoint.txt, config.txt,
/// summary.txt, prediction.dat and status.txt.
inline RunOutcome run_experiment(const ExperimentConfig& c, std::uint64_t seed,
                                 std::shared_ptr<const ReferenceField> ref = nullptr,
                                 bool overwrite = false) {
  c.validate();
  RunOutcome out;
  out.seed = seed;
  const fs::path dir = run_directory(c, seed);
  out.dir = dir.string();
  if (!overwrite && fs::exists(dir / "status.txt")) {
    const auto st = detail::read_key_values(dir / "status.txt");
    const auto sm = detail::read_key_values(dir / "summary.txt");
    if (st.count("status") && st.at("status") == "completed" && sm.count("final_rel_l2")) {
      out.reused = true;
      const double e = std::strtod(sm.at("final_rel_l2").c_str(), nullptr);
      if (!std::isnan(e)) out.final_error = e;
      out.seconds = std::strtod(sm.at("seconds").c_str(), nullptr);
      out.steps = std::strtol(sm.at("steps").c_str(), nullptr, 10);
      return out;
    }
  }
  fs::create_directories(dir);
  ExperimentConfig echo = c;
  echo.seeds = {seed};
  detail::write_text(dir / "config.txt", to_text(echo));
  detail::write_text(dir / "status.txt", "status = running\n");

  const TrainSetup setup = c.setup(seed);
  if (!ref) ref = config_reference(c);
  const auto ev = default_evaluator(setup.spec, c.grid, ref);
  const TrainResult res = train(setup, ev.get());

  res.report.write_csv((dir / "report.csv").string());
  save_checkpoint(res.params, (dir / "checkpoint.txt").string());
  out.aborted = res.report.aborted;
  out.reason = res.report.reason;
  out.final_error = res.report.final_error();
  if (!res.report.rows.empty()) {
    out.seconds = res.report.rows.back().seconds;
    out.steps = res.report.rows.back().step;
  }
  std::ostringstream sm;
  sm << "problem = " << c.problem << "\nmethod = " << to_string(c.method) << "\nseed = " << seed
     << "\nsteps = " << out.steps << "\nseconds = " << detail::format_double(out.seconds)
     << "\nseconds_per_step = "
     << detail::format_double(out.steps ? out.seconds / static_cast<double>(out.steps) : 0.0)
     << "\nfinal_rel_l2 = " << detail::format_optional(out.final_error) << "\nfinal_J_total = "
     << (res.report.rows.empty() ? std::string("nan") : detail::format_double(res.report.rows.back().total))
     << "\nritz_penalty = " << detail::format_double(c.ritz_penalty) << "\n";
  detail::write_text(dir / "summary.txt", sm.str());

  if (ev) {
    const Eigen::MatrixXd pts = detail::display_points(setup.spec, *ev);
    const Eigen::MatrixXd pred = evaluate(res.params, pts);
    std::ostringstream dat;
    dat << "#";
    for (int a = 0; a < setup.spec.dim; ++a) dat << " x" << a + 1;
    if (setup.spec.horizon) dat << " t";
    dat << " predicted truth\n";
    const Eigen::VectorXd truth = ref ? reference_truth(ref)(pts) : exact_truth(setup.spec)(pts);
    char buf[64];
    for (Eigen::Index col = 0; col < pts.cols(); ++col) {
      for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        std::snprintf(buf, sizeof buf, "%.9g ", pts(r, col));
        dat << buf;
      }
      std::snprintf(buf, sizeof buf, "%.9g %.9g\n", pred(0, col), truth[col]);
      dat << buf;
    }
    detail::write_text(dir / "prediction.dat", dat.str());
  }
  detail::write_text(dir / "status.txt", out.aborted ? "status = aborted\nreason = " + out.reason + "\n"
                                                     : std::string("status = completed\n"));
  return out;
}

/// Run `jobs` at a time; each call gets its own tape, RNG and directory.
inline std::vector<RunOutcome> run_parallel(const std::vector<std::pair<ExperimentConfig, std::uint64_t>>& runs,
                                            int jobs) {
  std::vector<RunOutcome> out(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        out[i] = run_experiment(runs[i].first, runs[i].second);
      } catch (const std::exception& e) {
        out[i].seed = runs[i].second;
        out[i].dir = run_directory(runs[i].first, runs[i].second).string();
        out[i].aborted = true;
        out[i].reason = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

struct SweepRow {
  std::string value;
  RunOutcome outcome;
};

/// One run per (value, seed); failures are recorded and the sweep goes on.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& axis,
                                   const std::vector<std::string>& values, int jobs = 1) {
  if (!is_numeric_key(axis)) throw ConfigError("sweep axis '" + axis + "' is not a numeric key");
  std::vector<std::pair<ExperimentConfig, std::uint64_t>> runs;
  std::vector<std::string> labels;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    set_config_value(c, axis, v);
    for (auto seed : c.seeds) {
      runs.emplace_back(c, seed);
      labels.push_back(v);
    }
  }
  const auto outcomes = run_parallel(runs, jobs);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < outcomes.size(); ++i) rows.push_back({labels[i], outcomes[i]});
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis, const fs::path& path) {
  std::ostringstream s;
  s << axis << ",seed,final_rel_l2,seconds,steps,status,run_dir\n";
  for (const auto& r : rows) {
    s << r.value << ',' << r.outcome.seed << ',' << detail::format_optional(r.outcome.final_error) << ','
      << detail::format_double(r.outcome.seconds) << ',' << r.outcome.steps << ','
      << (r.outcome.aborted ? "aborted" : "completed") << ',' << r.outcome.dir << '\n';
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::write_text(path, s.str());
}

/// Side-by-side error and time columns of two reports, joined on step.
inline std::string compare_reports(const TrainReport& a, const TrainReport& b) {
  std::ostringstream s;
  s << "step,rel_l2_a,rel_l2_b,J_total_a,J_total_b,seconds_a,seconds_b\n";
  std::size_t j = 0;
  char buf[256];
  for (const auto& ra : a.rows) {
    while (j < b.rows.size() && b.rows[j].step < ra.step) ++j;
    if (j == b.rows.size() || b.rows[j].step != ra.step) continue;
    const auto& rb = b.rows[j];
    std::snprintf(buf, sizeof buf, "%ld,%.6g,%.6g,%.6g,%.6g,%.4f,%.4f\n", ra.step, ra.rel_l2, rb.rel_l2,
                  ra.total, rb.total, ra.seconds, rb.seconds);
    s << buf;
  }
  return s.str();
}

// ---------------------------------------------------------------------------
// Derivative-scale experiment: fit sin(pi x) on [-1, 1], then compare jets.

struct DiagnosticConfig {
  int layers = 3;
  int width = 32;
  int steps = 20000;
  double learning_rate = 1e-3;
  int points = 401;
  int max_order = 4;
  std::uint64_t seed = 0;
};

struct DiagnosticResult {
  DerivativeScaleReport report;
  ParameterSet params;
  Eigen::MatrixXd points;
};

inline double sine_target(double x, int k) {
  return std::pow(std::numbers::pi, k) * detail::sin_derivative(std::numbers::pi * x, k);
}

inline DiagnosticResult run_diagnostic(const DiagnosticConfig& c) {
  NetworkConfig net;
  net.input_dim = 1;
  net.hidden_layers = c.layers;
  net.width = c.width;
  DiagnosticResult r;
  r.params = fit_function(net, [](double x) { return sine_target(x, 0); }, -1.0, 1.0, c.steps,
                          c.learning_rate, c.seed);
  r.points = Eigen::RowVectorXd::LinSpaced(c.points, -1.0, 1.0);
  r.report = derivative_scale_diagnostic(r.params, r.points, sine_target, c.max_order);
  return r;
}

inline void write_diagnostic(const DiagnosticResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream t;
  t << "order,discrepancy,truth_norm,relative\n";
  for (const auto& row : r.report.rows) {
    t << row.order << ',' << detail::format_double(row.discrepancy) << ','
      << detail::format_double(row.truth_norm) << ',' << detail::format_double(row.relative()) << '\n';
  }
  detail::write_text(dir / "diagnostic.csv", t.str());
  detail::write_text(dir / "status.txt", std::string("status = ") + (r.report.skipped ? "skipped" : "completed") +
                                             "\nfit_rel_l2 = " + detail::format_double(r.report.fit_error) + "\n");
  // x, then D^k phi and D^k u for each order
  ad::BatchTape tape;
  BatchNetwork net(r.params, tape, false);
  const int k = static_cast<int>(r.report.rows.size()) - 1;
  const auto out = net.forward(r.points, DerivativeRequest{{k}});
  std::ostringstream d;
  d << "# x";
  for (int j = 0; j <= k; ++j) d << " net_d" << j << " sin_d" << j;
  d << '\n';
  std::vector<ad::Array> rows;
  for (int j = 0; j <= k; ++j) rows.push_back(out.derivative(0, 0, j).value());
  char buf[64];
  for (Eigen::Index c = 0; c < r.points.cols(); ++c) {
    std::snprintf(buf, sizeof buf, "%.9g", r.points(0, c));
    d << buf;
    for (int j = 0; j <= k; ++j) {
      std::snprintf(buf, sizeof buf, " %.9g %.9g", rows[static_cast<std::size_t>(j)](0, c),
                    sine_target(r.points(0, c), j));
      d << buf;
    }
    d << '\n';
  }
  detail::write_text(dir / "derivatives.dat", d.str());
}

}  // namespace ldgm
