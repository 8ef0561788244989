#pragma once

#include <span>
#include <vector>

#include "isocrit/survey.hpp"

namespace isocrit {

enum class Flavor { HorvitzThompson, Hajek };

/// Unconstrained domain means with the weights that go with them:
/// N_d for Horvitz-Thompson, N^_d for Hajek.
struct DomainEstimate {
  std::vector<double> means;
  std::vector<double> weights;
  Flavor flavor = Flavor::Hajek;
};

/// What to do with a domain that has no sampled unit. Only the
/// Horvitz-Thompson mean is defined there (an empty total over N_d); the
/// enumeration oracles need it, everything else should reject.
enum class EmptyDomainPolicy { Reject, ZeroTotal };

/// Per-domain sufficient statistics: sum y/pi, sum 1/pi and n_d.
/// Pooled block means are formed from these without rescanning units.
struct DomainTotals {
  std::vector<double> weighted_values;  ///< sum over s_d of y_k / pi_k
  std::vector<double> inverse_pi;       ///< N^_d
  std::vector<std::size_t> count;       ///< n_d

  static DomainTotals from(const DesignSample& sample);

  int num_domains() const noexcept { return static_cast<int>(count.size()); }
};

DomainEstimate ht_domain_means(const DesignSample& sample,
                               std::span<const double> domain_sizes,
                               EmptyDomainPolicy policy = EmptyDomainPolicy::Reject);

DomainEstimate hajek_domain_means(const DesignSample& sample);

/// Mean of the pooled domains block.first..block.last. The HT flavor
/// divides by N_{i:j}; the Hajek flavor by N^_{i:j}.
double pooled_block_mean(const DomainTotals& totals, DomainRange block, Flavor flavor,
                         std::span<const double> domain_sizes = {});

double pooled_block_mean(const DesignSample& sample, DomainRange block, Flavor flavor,
                         std::span<const double> domain_sizes = {});

}  // namespace isocrit
