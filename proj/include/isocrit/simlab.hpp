#pragma once

// Simulation scenarios: limiting domain means from sigmoid curves, finite
// population synthesis with stratum / cluster labels from a ranked
// auxiliary variable, and the replication engine behind the tables.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "isocrit/design.hpp"
#include "isocrit/estimators.hpp"
#include "isocrit/selection.hpp"
#include "isocrit/survey.hpp"

namespace isocrit::simlab {

enum class Sigmoid { S1, S2, S3 };

/// Evaluates the sigmoid at domain d (1-based) out of D.
double sigmoid(Sigmoid s, int d, int D);

/// How the last limiting mean is derived from the sigmoid.
struct Shape {
  enum class Kind {
    Pulldown,  ///< mu_D = S(D) - t * (S(D) - S(D-1))
    Offset,    ///< mu_D = S(D-1) - delta
  };
  Kind kind = Kind::Pulldown;
  double amount = 0.0;

  static Shape monotone() { return {Kind::Pulldown, 0.0}; }
  static Shape flat() { return {Kind::Pulldown, 1.0}; }
  static Shape non_monotone() { return {Kind::Pulldown, 2.0}; }
  static Shape pulldown(double t) { return {Kind::Pulldown, t}; }
  static Shape offset(double delta) { return {Kind::Offset, delta}; }
};

enum class Distribution { Normal, ChiSquare };

struct StratifiedAllocation {
  std::vector<int> per_stratum;
};

struct ClusterAllocation {
  int total_clusters = 100;
  int sampled = 1;
};

using DesignSpec = std::variant<StratifiedAllocation, ClusterAllocation>;

struct ScenarioConfig {
  std::string name;
  int domains = 4;
  Sigmoid sigmoid = Sigmoid::S1;
  Shape shape = Shape::monotone();
  Distribution distribution = Distribution::Normal;
  double sigma = 3.0;  ///< sd of normal units; also scales the auxiliary z
  int population_size = 10000;
  DesignSpec design = StratifiedAllocation{{25, 50, 50, 75}};
  int reps = 10000;
  std::uint64_t seed = 1;
  Flavor flavor = Flavor::Hajek;
  double penalty = kDefaultPenalty;
  bool run_tests = true;
  int conditional_draws = kDefaultConditionalDraws;
  double test_level = 0.05;

  /// Throws InvalidArgument / IndivisibleSizes / InfeasibleAllocation.
  void validate() const;
  int strata() const;
  int sample_size() const;
};

/// Limiting domain means mu_1..mu_D.
std::vector<double> make_scenario_means(const ScenarioConfig& config);

/// Splits n over the strata in proportions 1/8, 1/4, 1/4, 3/8 (largest
/// remainder rounding).
std::vector<int> default_allocation(int sample_size);

/// Synthesizes the finite population. Domain d holds units
/// [d N/D, (d+1) N/D). Group labels come from ranking z_k = sigma d/D + eps_k
/// into equal blocks: strata for a stratified design, clusters otherwise.
/// Every unit draws from its own stream, derived from (seed, unit index).
Population generate_population(const ScenarioConfig& config, std::uint64_t seed);

/// Builds the design object matching the config over `population`.
std::unique_ptr<PopulationDesign> make_design(const ScenarioConfig& config,
                                              std::shared_ptr<const Population> population);

DesignSample draw_stsi_sample(std::shared_ptr<const Population> population,
                              const std::vector<int>& allocation, std::uint64_t seed);

DesignSample draw_cluster_sample(std::shared_ptr<const Population> population,
                                 int sampled_clusters, std::uint64_t seed);

/// Average of (est - ybar_U)' W_U (est - ybar_U) over replicates.
double mse_accumulate(const std::vector<std::vector<double>>& estimates,
                      std::span<const double> population_means,
                      std::span<const double> population_weights);

struct MethodTally {
  std::size_t unconstrained = 0;  ///< replicates choosing the unconstrained estimator
  std::size_t decided = 0;        ///< replicates with a decision
  std::size_t unavailable = 0;    ///< replicates where the test could not run

  double proportion() const noexcept {
    return decided == 0 ? 0.0 : static_cast<double>(unconstrained) / decided;
  }
  double std_error() const noexcept;
};

struct SimulationSummary {
  std::string name;
  MethodTally cic;
  MethodTally wald;
  MethodTally conditional;
  double mse_unconstrained = 0.0;
  double mse_constrained = 0.0;
  double mse_adaptive = 0.0;
  double se_mse_unconstrained = 0.0;
  double se_mse_constrained = 0.0;
  double se_mse_adaptive = 0.0;
  double ratio_constrained = 0.0;  ///< mse_constrained / mse_unconstrained
  double ratio_adaptive = 0.0;     ///< mse_adaptive / mse_unconstrained
  double se_ratio_constrained = 0.0;
  double se_ratio_adaptive = 0.0;
  std::size_t reps_requested = 0;
  std::size_t reps_used = 0;
  /// Replicates dropped because a domain had no sampled unit.
  std::size_t empty_domain_reps = 0;
  /// Replicates where the sample was already monotone.
  std::size_t monotone_reps = 0;
};

/// Runs config.reps replicates over one synthesized population. Results are
/// identical for every thread count: each replicate seeds its own streams
/// and records are merged in replicate order. threads = 0 picks the
/// hardware concurrency.
SimulationSummary run_replications(const ScenarioConfig& config, unsigned threads = 0);

/// One column of a simulation table.
struct TableCell {
  std::string group;   ///< column group header
  std::string column;  ///< column header
  ScenarioConfig config;
};

struct TablePreset {
  int id = 0;
  std::string title;
  std::vector<TableCell> cells;
};

enum class Scale { Full, Desk };

inline constexpr int kDeskReps = 2000;
inline constexpr int kFullReps = 10000;

/// Parameter grid of table 1..11. Throws InvalidArgument for other ids.
TablePreset table_preset(int id, Scale scale = Scale::Full);

}  // namespace isocrit::simlab
