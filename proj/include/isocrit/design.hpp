#pragma once

// Sampling designs over a whole population: closed-form pi_k and pi_kl for
// every population unit, random draws, and full enumeration of the sample
// space for small populations.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "isocrit/random.hpp"
#include "isocrit/survey.hpp"

namespace isocrit {

/// One point of an enumerated sample space.
struct SupportPoint {
  std::vector<std::size_t> ids;  ///< sampled population ids, ascending
  double probability = 0.0;
};

class PopulationDesign {
 public:
  virtual ~PopulationDesign() = default;

  virtual DesignKind kind() const noexcept = 0;
  virtual double pi(std::size_t k) const = 0;
  /// pi_kl for k != l; pi_kk = pi_k.
  virtual double pi_kl(std::size_t k, std::size_t l) const = 0;

  /// Population ids of one random sample, ascending.
  virtual std::vector<std::size_t> draw(SplitMix64& rng) const = 0;

  /// Every possible sample with its probability, or nullopt if the sample
  /// space exceeds `limit` points.
  virtual std::optional<std::vector<SupportPoint>> enumerate(std::size_t limit) const = 0;

  virtual std::shared_ptr<const JointInclusion> joint() const = 0;

  /// Builds the DesignSample for the given population ids.
  DesignSample realize(std::span<const std::size_t> ids) const;

  const Population& population() const noexcept { return *population_; }

 protected:
  explicit PopulationDesign(std::shared_ptr<const Population> population)
      : population_(std::move(population)) {}

  std::shared_ptr<const Population> population_;
};

/// Stratified SRSWOR; strata are the population's group labels.
class StratifiedSrsworDesign final : public PopulationDesign {
 public:
  /// Throws InfeasibleAllocation if any n_h > N_h, n_h < 1, or the number
  /// of allocations differs from the number of strata.
  StratifiedSrsworDesign(std::shared_ptr<const Population> population,
                         std::vector<int> allocation);

  DesignKind kind() const noexcept override { return DesignKind::StratifiedSrswor; }
  double pi(std::size_t k) const override;
  double pi_kl(std::size_t k, std::size_t l) const override;
  std::vector<std::size_t> draw(SplitMix64& rng) const override;
  std::optional<std::vector<SupportPoint>> enumerate(std::size_t limit) const override;
  std::shared_ptr<const JointInclusion> joint() const override { return joint_; }

  std::span<const int> allocation() const noexcept { return allocation_; }

 private:
  std::vector<int> allocation_;
  std::vector<std::vector<std::size_t>> members_;
  std::shared_ptr<const StratifiedSrsworJoint> joint_;
};

/// Single-stage cluster sampling: SRSWOR of r clusters, all units taken.
/// Clusters are the population's group labels.
class ClusterDesign final : public PopulationDesign {
 public:
  ClusterDesign(std::shared_ptr<const Population> population, int sampled_clusters);

  DesignKind kind() const noexcept override { return DesignKind::SingleStageCluster; }
  double pi(std::size_t k) const override;
  double pi_kl(std::size_t k, std::size_t l) const override;
  std::vector<std::size_t> draw(SplitMix64& rng) const override;
  std::optional<std::vector<SupportPoint>> enumerate(std::size_t limit) const override;
  std::shared_ptr<const JointInclusion> joint() const override { return joint_; }

  int sampled_clusters() const noexcept { return r_; }
  int total_clusters() const noexcept { return static_cast<int>(members_.size()); }

 private:
  int r_;
  std::vector<std::vector<std::size_t>> members_;
  std::shared_ptr<const ClusterJoint> joint_;
};

/// Design given by an explicit list of samples and probabilities. pi_k and
/// pi_kl are derived from the support, so any design can be expressed for
/// small populations.
class EnumeratedDesign final : public PopulationDesign {
 public:
  EnumeratedDesign(std::shared_ptr<const Population> population,
                   std::vector<SupportPoint> support);

  DesignKind kind() const noexcept override { return DesignKind::General; }
  double pi(std::size_t k) const override { return pi_[k]; }
  double pi_kl(std::size_t k, std::size_t l) const override;
  std::vector<std::size_t> draw(SplitMix64& rng) const override;
  std::optional<std::vector<SupportPoint>> enumerate(std::size_t limit) const override;
  std::shared_ptr<const JointInclusion> joint() const override { return joint_; }

 private:
  std::vector<SupportPoint> support_;
  std::vector<double> pi_;
  std::shared_ptr<const std::vector<double>> pi_pair_;  // dense N x N
  std::shared_ptr<const FunctionJoint> joint_;
};

/// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k);

}  // namespace isocrit
