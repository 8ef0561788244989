#pragma once

// Design-based covariance of domain and pooled-block mean estimators:
// the unbiased Horvitz-Thompson covariance estimator, the linearized
// approximate covariance of Hajek means (population value and estimator),
// and the covariance matrices under an observed pooling.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "isocrit/design.hpp"
#include "isocrit/estimators.hpp"
#include "isocrit/isotonic.hpp"
#include "isocrit/survey.hpp"

namespace isocrit {

using CovMatrix = Eigen::MatrixXd;

/// Precomputed per-domain statistics of one sample so that the double sum
///
///   sum_{k in s_b1} sum_{l in s_b2} (Delta_kl/pi_kl) (y_k - c1)/pi_k (y_l - c2)/pi_l
///
/// costs O(D + G) per block pair when the design has a grouped closed form
/// (stratified SRSWOR, cluster, independent). Other designs fall back to
/// the pairwise sum over the two blocks.
class LinearizedCovariance {
 public:
  explicit LinearizedCovariance(const DesignSample& sample);

  /// Estimated approximate covariance of the Hajek means of two blocks.
  /// Throws EmptyBlock.
  double ac_hat(DomainRange b1, DomainRange b2) const;

  /// The raw double sum with centers c1, c2.
  double pair_sum(DomainRange b1, double c1, DomainRange b2, double c2) const;

  double hajek_mean(DomainRange block) const;
  double n_hat(DomainRange block) const;
  std::size_t count(DomainRange block) const;

  bool grouped() const noexcept { return grouped_; }

 private:
  double grouped_pair_sum(DomainRange b1, double c1, DomainRange b2, double c2) const;
  double direct_pair_sum(DomainRange b1, double c1, DomainRange b2, double c2) const;
  void require_nonempty(DomainRange block) const;

  const DesignSample* sample_;
  int D_ = 0;
  int G_ = 0;
  bool grouped_ = false;
  PairStructure structure_;
  DomainTotals totals_;
  std::vector<double> domain_mean_;
  // grouped path, indexed [d * G + g]
  std::vector<double> resid_by_group_;
  std::vector<double> inv_pi_by_group_;
  // per domain: sum c_k e^2/pi^2, sum c_k e/pi^2, sum c_k/pi^2 with
  // c_k = (1 - pi_k) - same(g_k)
  std::vector<double> q2_, q1_, q0_;
  // direct path: sample positions ordered by domain
  std::vector<std::size_t> order_;
  std::vector<std::size_t> domain_begin_;
};

/// Unbiased estimator of cov(yhat_s) for the Horvitz-Thompson domain means.
CovMatrix sigma_hat(const DesignSample& sample, std::span<const double> domain_sizes,
                    EmptyDomainPolicy policy = EmptyDomainPolicy::Reject);

/// Population approximate covariance of the Hajek means of two blocks,
/// from the design's closed-form pi_k, pi_kl. Double sum over the two
/// population blocks.
double ac_population(const PopulationDesign& design, DomainRange b1, DomainRange b2);

/// Estimated approximate covariance. Uses the grouped closed form when the
/// design has one.
double ac_hat(const DesignSample& sample, DomainRange b1, DomainRange b2);

/// Same quantity by the literal pairwise double sum over sampled units.
double ac_hat_direct(const DesignSample& sample, DomainRange b1, DomainRange b2);

struct PooledCovariance {
  CovMatrix cov_theta_y;  ///< [i][j] = ac_hat(block containing i, domain j)
  CovMatrix cov_y_y;      ///< [i][j] = ac_hat(domain i, domain j)
  /// Domains whose block holds a single sampled unit; their variance
  /// estimate is exactly zero.
  std::vector<int> single_unit_domains;
};

PooledCovariance cov_hat_pooled(const DesignSample& sample, const PoolingPartition& partition);
PooledCovariance cov_hat_pooled(const LinearizedCovariance& engine,
                                const PoolingPartition& partition);

}  // namespace isocrit
