#include <chrono>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "isocrit/cli.hpp"
#include "isocrit/error.hpp"

namespace isocrit::cli {

using nlohmann::json;

namespace {

struct EstimateArgs {
  std::string input;
  EstimateOptions options;
  std::string domain_col;
  std::string bin_col;
  std::string stratum_col;
  std::string out;
  std::string csv_out;
};

struct SimulateArgs {
  std::string scenario;
  int reps = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
};

struct TableArgs {
  int table = 0;
  std::string scale = "full";
  int reps = 0;
  std::string out;
};

void write_text(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliError(kExitBadInput, "cannot write '" + path + "'");
  f << text;
}

int cmd_estimate(EstimateArgs& a, std::ostream& out) {
  auto& opt = a.options;
  if (!a.domain_col.empty()) opt.domain_col = a.domain_col;
  if (!a.bin_col.empty()) opt.bin_col = a.bin_col;
  if (!a.stratum_col.empty()) opt.stratum_col = a.stratum_col;
  if (opt.conditional_draws < 1000) {
    throw CliError(kExitBadInput, "--conditional-draws must be at least 1000");
  }
  if (!(opt.penalty > 0.0)) throw CliError(kExitBadInput, "--penalty must be positive");

  const auto table = read_csv_file(a.input);
  const auto report = analyze(table, opt);
  write_text(a.out, out, to_json(report, opt).dump(2) + "\n");
  if (!a.csv_out.empty()) {
    std::ofstream f(a.csv_out, std::ios::binary);
    if (!f) throw CliError(kExitBadInput, "cannot write '" + a.csv_out + "'");
    write_estimates_csv(f, report);
  }
  return kExitOk;
}

json run_timed(const simlab::ScenarioConfig& config, simlab::SimulationSummary& summary) {
  const auto start = std::chrono::steady_clock::now();
  try {
    summary = simlab::run_replications(config, worker_threads());
  } catch (const Error& e) {
    throw CliError(kExitBadInput, e.what());
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return {{"wall_seconds", elapsed.count()}, {"threads", worker_threads()}};
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto config = resolve_scenario(a.scenario);
  if (a.reps > 0) config.reps = a.reps;
  if (a.seed_given) config.seed = a.seed;
  try {
    config.validate();
  } catch (const Error& e) {
    throw CliError(kExitBadInput, e.what());
  }
  simlab::SimulationSummary summary;
  json j;
  j["schema"] = kSchemaVersion;
  j["config"] = to_json(config);
  j["timing"] = run_timed(config, summary);
  j["summary"] = to_json(summary);
  write_text(a.out, out, j.dump(2) + "\n");
  return kExitOk;
}

// A lone star when the test never ran on a replicate that needed it.
std::string proportion_cell(const simlab::MethodTally& t, const simlab::SimulationSummary& s) {
  if (t.decided == 0 || (t.unavailable > 0 && t.unavailable + s.monotone_reps >= s.reps_used)) {
    return "*";
  }
  std::string text = fmt::format("{:.3f}±{:.3f}", t.proportion(), 2.0 * t.std_error());
  if (t.unavailable > 0) text += "*";
  return text;
}

int cmd_table(const TableArgs& a, std::ostream& out) {
  simlab::Scale scale;
  if (a.scale == "full") {
    scale = simlab::Scale::Full;
  } else if (a.scale == "desk") {
    scale = simlab::Scale::Desk;
  } else {
    throw CliError(kExitBadInput, "--scale must be full or desk");
  }
  if (a.table < 1 || a.table > 11) {
    throw CliError(kExitBadInput, fmt::format("unknown table id {}", a.table));
  }
  auto preset = simlab::table_preset(a.table, scale);

  out << preset.title << "\n";
  out << fmt::format("{:<28} {:>14} {:>14} {:>14} {:>16} {:>16} {:>6}\n", "cell", "CIC", "Wald",
                     "conditional", "MSE con/unc", "MSE ada/unc", "reps");
  json cells = json::array();
  bool starred = false;
  for (auto& cell : preset.cells) {
    if (a.reps > 0) cell.config.reps = a.reps;
    simlab::SimulationSummary s;
    const auto timing = run_timed(cell.config, s);
    starred = starred || s.wald.unavailable > 0 || s.conditional.unavailable > 0 ||
              s.wald.decided == 0 || s.conditional.decided == 0;
    out << fmt::format("{:<28} {:>14} {:>14} {:>14} {:>16} {:>16} {:>6}\n", cell.config.name,
                       proportion_cell(s.cic, s), proportion_cell(s.wald, s),
                       proportion_cell(s.conditional, s),
                       fmt::format("{:.3f}±{:.3f}", s.ratio_constrained,
                                   2.0 * s.se_ratio_constrained),
                       fmt::format("{:.3f}±{:.3f}", s.ratio_adaptive, 2.0 * s.se_ratio_adaptive),
                       s.reps_used);
    cells.push_back({{"group", cell.group},
                     {"column", cell.column},
                     {"config", to_json(cell.config)},
                     {"summary", to_json(s)},
                     {"timing", timing}});
  }
  out << "Proportions choose the unconstrained estimator; ± is two Monte Carlo standard errors.\n";
  if (starred) {
    out << "* the test was unavailable (singular estimated covariance) on some or all "
           "replicates; those replicates are excluded.\n";
  }
  if (!a.out.empty()) {
    json j;
    j["schema"] = kSchemaVersion;
    j["table"] = preset.id;
    j["title"] = preset.title;
    j["scale"] = a.scale;
    j["cells"] = cells;
    write_text(a.out, out, j.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monotone domain mean estimation for survey data"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Constrained and unconstrained domain means from a CSV file");
  estimate->add_option("input", est.input, "CSV file with a header row")->required();
  estimate->add_option("--value-col", est.options.value_col, "study variable column")->required();
  estimate->add_option("--weight-col", est.options.weight_col, "survey weight column (1/pi)")
      ->required();
  estimate->add_option("--domain-col", est.domain_col, "domain label column");
  estimate->add_option("--bin-col", est.bin_col, "numeric column to bin into domains");
  estimate->add_option("--bin-edges", est.options.bin_edges, "increasing bin edges a,b,c,...")
      ->delimiter(',');
  estimate->add_option("--stratum-col", est.stratum_col,
                       "stratum column; enables stratified SRSWOR joint probabilities");
  estimate->add_option("--domain-order", est.options.domain_order,
                       "domain labels in constraint order")
      ->delimiter(',');
  estimate->add_flag("--decreasing", est.options.decreasing, "impose nonincreasing means");
  estimate->add_option("--penalty", est.options.penalty, "criterion penalty constant");
  estimate->add_option("--seed", est.options.seed, "seed for the conditional test");
  estimate->add_option("--conditional-draws", est.options.conditional_draws,
                       "Monte Carlo draws for the conditional test");
  estimate->add_option("--level", est.options.level, "test level");
  estimate->add_option("--out", est.out, "JSON report path (default stdout)");
  estimate->add_option("--csv-out", est.csv_out, "per-domain estimates as CSV");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run one simulation scenario");
  simulate->add_option("--scenario", sim.scenario, "tableK, a cell name, or a JSON file")
      ->required();
  simulate->add_option("--reps", sim.reps, "replicates (overrides the scenario)");
  auto* seed_opt = simulate->add_option("--seed", sim.seed, "root seed (overrides the scenario)");
  simulate->add_option("--out", sim.out, "JSON summary path (default stdout)");

  TableArgs tab;
  auto* table = app.add_subcommand("table", "Reproduce a simulation table");
  table->add_option("--table", tab.table, "table id 1..11")->required();
  table->add_option("--scale", tab.scale, "full (10000 reps) or desk (2000 reps)");
  table->add_option("--reps", tab.reps, "replicates per cell (overrides the scale)");
  table->add_option("--out", tab.out, "JSON results path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*estimate) return cmd_estimate(est, out);
    if (*simulate) {
      sim.seed_given = seed_opt->count() > 0;
      return cmd_simulate(sim, out);
    }
    return cmd_table(tab, out);
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
}

}  // namespace isocrit::cli
