#pragma once

// Finite populations, probability samples and their inclusion
// probabilities. Domains are dense zero-based indices 0..D-1; external
// labels are mapped at the ingestion boundary.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace isocrit {

/// Inclusive range of consecutive domains [first, last].
struct DomainRange {
  int first = 0;
  int last = 0;

  static constexpr DomainRange single(int d) noexcept { return {d, d}; }

  constexpr bool contains(int d) const noexcept { return first <= d && d <= last; }
  constexpr int size() const noexcept { return last - first + 1; }

  friend constexpr bool operator==(DomainRange, DomainRange) = default;
};

/// A finite population U with a study variable, a domain partition and one
/// grouping label per unit (stratum or cluster).
class Population {
 public:
  Population(std::vector<double> values, std::vector<int> domains,
             std::vector<int> groups, int num_domains);

  std::size_t size() const noexcept { return values_.size(); }
  int num_domains() const noexcept { return num_domains_; }
  int num_groups() const noexcept { return num_groups_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const int> domains() const noexcept { return domains_; }
  std::span<const int> groups() const noexcept { return groups_; }

  double value(std::size_t k) const { return values_[k]; }
  int domain(std::size_t k) const { return domains_[k]; }
  int group(std::size_t k) const { return groups_[k]; }

  /// N_d for every domain.
  std::span<const double> domain_sizes() const noexcept { return domain_sizes_; }
  /// Population domain means.
  std::span<const double> domain_means() const noexcept { return domain_means_; }
  /// Mean over the pooled domains of `block`.
  double block_mean(DomainRange block) const;
  /// N_d / N.
  std::vector<double> domain_shares() const;

 private:
  std::vector<double> values_;
  std::vector<int> domains_;
  std::vector<int> groups_;
  int num_domains_;
  int num_groups_ = 0;
  std::vector<double> domain_sizes_;
  std::vector<double> domain_means_;
  std::vector<double> domain_totals_;
};

struct SampledUnit {
  double value = 0.0;
  double pi = 1.0;     ///< first-order inclusion probability
  int domain = 0;
  int group = 0;       ///< stratum / cluster label, dense from 0
  std::size_t id = 0;  ///< identity of the unit in its population
};

enum class DesignKind {
  StratifiedSrswor,
  SingleStageCluster,
  IndependentApprox,
  General,
};

std::string_view to_string(DesignKind kind) noexcept;

/// Closed-form layout of Delta_kl / pi_kl for distinct sampled units.
/// Pairs in the same group g share `same_group[g]` (or `default_same` for
/// groups beyond the table); pairs in different groups share `cross_group`.
struct PairStructure {
  std::vector<double> same_group;
  double default_same = 0.0;
  double cross_group = 0.0;

  double same(int g) const noexcept {
    return g >= 0 && static_cast<std::size_t>(g) < same_group.size() ? same_group[g]
                                                                    : default_same;
  }
};

/// Second-order inclusion probabilities, evaluated lazily per pair.
class JointInclusion {
 public:
  virtual ~JointInclusion() = default;

  /// pi_kl for two distinct sampled units.
  virtual double joint(const SampledUnit& k, const SampledUnit& l) const = 0;

  /// Grouped closed form, when the design has one. Enables the O(n)
  /// covariance path.
  virtual std::optional<PairStructure> structure() const { return std::nullopt; }
};

/// pi_kl = pi_k pi_l for k != l.
class IndependentJoint final : public JointInclusion {
 public:
  double joint(const SampledUnit& k, const SampledUnit& l) const override;
  std::optional<PairStructure> structure() const override;
};

/// SRSWOR of n_h from N_h independently in every stratum h (group label).
class StratifiedSrsworJoint final : public JointInclusion {
 public:
  StratifiedSrsworJoint(std::vector<double> sample_sizes, std::vector<double> stratum_sizes);

  double joint(const SampledUnit& k, const SampledUnit& l) const override;
  std::optional<PairStructure> structure() const override;

 private:
  std::vector<double> n_;
  std::vector<double> N_;
};

/// SRSWOR of r clusters (group labels) out of R.
class ClusterJoint final : public JointInclusion {
 public:
  ClusterJoint(int sampled_clusters, int total_clusters);

  double joint(const SampledUnit& k, const SampledUnit& l) const override;
  std::optional<PairStructure> structure() const override;

 private:
  double r_;
  double R_;
};

/// Arbitrary design given by a callable over population unit ids.
class FunctionJoint final : public JointInclusion {
 public:
  using Fn = std::function<double(std::size_t, std::size_t)>;
  explicit FunctionJoint(Fn fn) : fn_(std::move(fn)) {}

  double joint(const SampledUnit& k, const SampledUnit& l) const override {
    return fn_(k.id, l.id);
  }

 private:
  Fn fn_;
};

/// A realized sample s together with its design information.
/// Immutable after construction and safe to share between threads.
class DesignSample {
 public:
  DesignSample(std::vector<SampledUnit> units, int num_domains, DesignKind kind,
               std::shared_ptr<const JointInclusion> joint);

  std::span<const SampledUnit> units() const noexcept { return units_; }
  const SampledUnit& unit(std::size_t a) const { return units_[a]; }
  std::size_t size() const noexcept { return units_.size(); }
  int num_domains() const noexcept { return num_domains_; }
  DesignKind kind() const noexcept { return kind_; }
  const JointInclusion& joint_provider() const noexcept { return *joint_; }

  /// pi_kl between sample positions a and b; pi_kk = pi_k.
  double pi_kl(std::size_t a, std::size_t b) const;
  /// Delta_kl / pi_kl between sample positions a and b.
  double delta_ratio(std::size_t a, std::size_t b) const;

  /// Same units with y replaced by f(y). Used for negation (nonincreasing
  /// constraints) and equivariance checks.
  DesignSample with_values(const std::function<double(double)>& f) const;

 private:
  std::vector<SampledUnit> units_;
  int num_domains_;
  DesignKind kind_;
  std::shared_ptr<const JointInclusion> joint_;
};

struct Violation {
  enum class Kind {
    NonpositiveInclusion,
    InclusionAboveOne,
    NonmeasurablePair,
    AsymmetricJoint,
    DomainOutOfRange,
    EmptyDomain,
  };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const noexcept { return violations.empty(); }
  bool has(Violation::Kind kind) const noexcept;
};

/// Checks measurability of a sample. Scans all sampled pairs, O(n^2).
ValidationReport validate_design(const DesignSample& sample);

struct DomainCounts {
  std::vector<std::size_t> n;   ///< sampled units per domain
  std::vector<double> n_hat;    ///< sum of 1/pi_k per domain (0 when empty)
};

DomainCounts domain_counts(const DesignSample& sample);

/// Diagonal weight matrix W, either W_U = diag(N_d/N) or W_s = diag(N^_d/N^).
class WeightMatrixSpec {
 public:
  enum class Kind { Population, Estimated };

  static WeightMatrixSpec population(std::span<const double> domain_sizes);
  static WeightMatrixSpec estimated(std::span<const double> estimated_sizes);

  Kind kind() const noexcept { return kind_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }

 private:
  WeightMatrixSpec(Kind kind, std::span<const double> sizes);

  Kind kind_;
  std::vector<double> weights_;
};

}  // namespace isocrit
