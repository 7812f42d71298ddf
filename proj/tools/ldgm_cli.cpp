// ldgm: experiment runner.
//
//   ldgm run --config beam.cfg [--seed N] [--out DIR] [--jobs K] [--set key=value]...
//   ldgm sweep --config mkdv.cfg --axis network.layers --values 3,6,9 [--jobs K]
//   ldgm diagnose [--out DIR] [--seed N] [--steps S]
//   ldgm reference --epsilon 0.01 --out ch.csv
//   ldgm compare a/report.csv b/report.csv [--out table.csv]

#include <CLI11.hpp>
#include <iostream>

#include "ldgm/experiment.hpp"

using namespace ldgm;

namespace {

ExperimentConfig load(const std::string& path, const std::vector<std::string>& sets,
                      const std::optional<std::uint64_t>& seed, const std::string& out) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  const auto known = config_keys();
  std::vector<std::string> unknown;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const auto key = detail::trim(kv.substr(0, eq));
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      unknown.push_back(key);
      continue;
    }
    set_config_value(c, key, detail::trim(kv.substr(eq + 1)));
  }
  if (!unknown.empty()) {
    std::string msg = "unknown keys:";
    for (const auto& k : unknown) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
  if (seed) c.seeds = {*seed};
  if (!out.empty()) c.output = out;
  c.validate();
  return c;
}

void print_outcome(const RunOutcome& o) {
  std::cout << o.dir << ": " << (o.aborted ? "aborted (" + o.reason + ")" : "completed")
            << (o.reused ? " [existing]" : "") << ", steps=" << o.steps
            << ", rel_l2=" << detail::format_optional(o.final_error) << ", seconds=" << o.seconds << "\n";
}

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) v.push_back(item);
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local and standard deep Galerkin solvers for high-order PDEs"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis, values;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool overwrite = false;

  auto* run = app.add_subcommand("run", "Train every seed of a config");
  run->add_option("--config", config_path, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run this seed only");
  run->add_option("--out", out_dir, "Output root directory");
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  run->add_option("--set", sets, "Override a config key (key=value)");
  run->add_flag("--overwrite", overwrite, "Retrain even if a completed run exists");

  auto* sw = app.add_subcommand("sweep", "Vary one numeric key and summarize");
  sw->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  sw->add_option("--axis", axis, "Numeric config key to vary")->required();
  sw->add_option("--values", values, "Comma-separated values (may be empty)")->required();
  sw->add_option("--seed", seed, "Run this seed only");
  sw->add_option("--out", out_dir, "Output root directory");
  sw->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sw->add_option("--set", sets, "Override a config key (key=value)");

  DiagnosticConfig dc;
  std::string diag_out = "runs/diagnose";
  auto* dg = app.add_subcommand("diagnose", "Derivative-scale experiment on a sin(pi x) fit");
  dg->add_option("--out", diag_out, "Output directory");
  dg->add_option("--seed", dc.seed, "Initialization and sampling seed");
  dg->add_option("--steps", dc.steps, "Adam steps for the fit");
  dg->add_option("--learning-rate", dc.learning_rate, "Adam learning rate");
  dg->add_option("--layers", dc.layers, "Hidden layers");
  dg->add_option("--width", dc.width, "Neurons per hidden layer");
  dg->add_option("--max-order", dc.max_order, "Highest derivative order")->check(CLI::Range(1, ad::kMaxJetOrder));

  double epsilon = 0.1, dt = 0.01, horizon = 1.0;
  int grid = 128;
  std::string ref_out = "ch_reference.csv";
  auto* rf = app.add_subcommand("reference", "Spectral Cahn-Hilliard reference field");
  rf->add_option("--epsilon", epsilon, "Interface parameter");
  rf->add_option("--grid", grid, "Periodic grid points (power of two)");
  rf->add_option("--dt", dt, "Time step");
  rf->add_option("--horizon", horizon, "Final time");
  rf->add_option("--out", ref_out, "CSV path (t,x,u)");

  std::string report_a, report_b, cmp_out;
  auto* cmp = app.add_subcommand("compare", "Join two report CSVs on step");
  cmp->add_option("report_a", report_a, "First report.csv")->required()->check(CLI::ExistingFile);
  cmp->add_option("report_b", report_b, "Second report.csv")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", cmp_out, "Write the table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto c = load(config_path, sets, seed, out_dir);
      std::vector<std::pair<ExperimentConfig, std::uint64_t>> runs;
      for (auto s : c.seeds) runs.emplace_back(c, s);
      bool failed = false;
      if (overwrite) {
        for (auto& [cfg, s] : runs) {
          const auto o = run_experiment(cfg, s, nullptr, true);
          print_outcome(o);
          failed |= o.aborted;
        }
      } else {
        for (const auto& o : run_parallel(runs, jobs)) {
          print_outcome(o);
          failed |= o.aborted;
        }
      }
      return failed ? 2 : 0;
    }
    if (*sw) {
      const auto c = load(config_path, sets, seed, out_dir);
      const auto rows = sweep(c, axis, split_values(values), jobs);
      const fs::path path = fs::path(c.output) / ("sweep-" + axis + "-" + hex16(config_hash(c)) + ".csv");
      write_sweep_csv(rows, axis, path);
      for (const auto& r : rows) {
        std::cout << axis << "=" << r.value << "  ";
        print_outcome(r.outcome);
      }
      std::cout << "summary: " << path.string() << "\n";
      return 0;
    }
    if (*dg) {
      const auto r = run_diagnostic(dc);
      write_diagnostic(r, diag_out);
      std::cout << "fit rel_l2 = " << r.report.fit_error << (r.report.skipped ? " (diagnostic skipped)" : "") << "\n";
      for (const auto& row : r.report.rows) {
        std::cout << "order " << row.order << ": discrepancy " << row.discrepancy << ", relative "
                  << row.relative() << "\n";
      }
      return r.report.skipped ? 3 : 0;
    }
    if (*rf) {
      SpectralCHConfig cfg;
      cfg.epsilon = epsilon;
      cfg.grid = grid;
      cfg.dt = dt;
      cfg.horizon = horizon;
      std::vector<double> u0;
      for (double x : periodic_grid(grid)) u0.push_back(std::cos(x));
      const auto field = solve_ch_spectral(cfg, u0);
      field.save_csv(ref_out);
      std::cout << "wrote " << ref_out << " (" << field.t.size() << " levels x " << field.x.size()
                << " points, mass drift " << std::abs(field.mass(field.t.size() - 1) - field.mass(0)) << ")\n";
      return 0;
    }
    if (*cmp) {
      const auto table = compare_reports(TrainReport::read_csv(report_a), TrainReport::read_csv(report_b));
      if (cmp_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream(cmp_out) << table;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
