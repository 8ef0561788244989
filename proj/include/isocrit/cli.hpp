#pragma once

// Command-line front end: CSV ingestion, the applied estimation report,
// scenario simulation and table reproduction.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "isocrit/selection.hpp"
#include "isocrit/simlab.hpp"

namespace isocrit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitEmptyDomain = 3;

inline constexpr double kNormalQuantile975 = 1.959964;
inline constexpr int kSchemaVersion = 1;

/// Failure carrying the process exit code.
class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; CliError(kExitBadInput) if absent.
  std::size_t column(const std::string& name) const;
};

/// Reads comma-separated text with a header row. Double-quoted fields may
/// contain commas, newlines and doubled quotes. A UTF-8 byte order mark is
/// skipped. Ragged rows are an error.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct EstimateOptions {
  std::string value_col;
  std::string weight_col;
  std::optional<std::string> domain_col;
  std::optional<std::string> bin_col;
  std::vector<double> bin_edges;
  std::optional<std::string> stratum_col;
  std::vector<std::string> domain_order;  ///< overrides the label sort when set
  bool decreasing = false;
  double penalty = kDefaultPenalty;
  std::uint64_t seed = 1;
  int conditional_draws = kDefaultConditionalDraws;
  double level = 0.05;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct AnalysisReport {
  std::vector<std::string> labels;
  std::vector<std::size_t> n;
  std::vector<double> n_hat;
  std::vector<double> unconstrained;
  std::vector<double> constrained;
  std::vector<double> se_unconstrained;
  std::vector<double> se_constrained;
  std::vector<Interval> ci_unconstrained;
  std::vector<Interval> ci_constrained;
  std::vector<int> block;  ///< pooled block index of every domain
  CicReport cic;
  TestResult wald;
  TestResult conditional;
  std::string covariance_mode;  ///< "independent-approx" or "stratified-srswor"
  std::vector<std::string> flags;
  std::size_t rows_read = 0;
  std::size_t rows_used = 0;
};

/// Runs the applied workflow on a parsed table.
/// Throws CliError with kExitBadInput or kExitEmptyDomain.
AnalysisReport analyze(const CsvTable& table, const EstimateOptions& options);

nlohmann::json to_json(const AnalysisReport& report, const EstimateOptions& options);

/// One row per domain, numbers written with round-trip precision.
void write_estimates_csv(std::ostream& out, const AnalysisReport& report);

nlohmann::json to_json(const simlab::ScenarioConfig& config);
simlab::ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const simlab::SimulationSummary& summary);

/// Resolves "tableK" (first cell of table K), a full cell name such as
/// "table5/Monotone/r=2", or a path to a JSON scenario file.
simlab::ScenarioConfig resolve_scenario(const std::string& name);

/// Worker count from ISOCRIT_THREADS, else hardware concurrency.
unsigned worker_threads();

/// Full command line entry point; returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace isocrit::cli
