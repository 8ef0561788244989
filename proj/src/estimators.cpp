#include "isocrit/estimators.hpp"

#include <string>

#include "isocrit/error.hpp"
#include "isocrit/summation.hpp"

namespace isocrit {

DomainTotals DomainTotals::from(const DesignSample& sample) {
  const int D = sample.num_domains();
  std::vector<CompensatedSum> wy(D);
  std::vector<CompensatedSum> w(D);
  DomainTotals totals;
  totals.count.assign(D, 0);
  for (const auto& u : sample.units()) {
    if (u.domain < 0 || u.domain >= D) {
      throw Error(Errc::InvalidArgument, "sampled unit domain out of range", u.domain);
    }
    wy[u.domain] += u.value / u.pi;
    w[u.domain] += 1.0 / u.pi;
    ++totals.count[u.domain];
  }
  totals.weighted_values.resize(D);
  totals.inverse_pi.resize(D);
  for (int d = 0; d < D; ++d) {
    totals.weighted_values[d] = wy[d].value();
    totals.inverse_pi[d] = w[d].value();
  }
  return totals;
}

namespace {

void require_sizes(std::span<const double> domain_sizes, int D) {
  if (domain_sizes.empty()) {
    throw Error(Errc::MissingPopulationSizes, "Horvitz-Thompson means need N_d");
  }
  if (static_cast<int>(domain_sizes.size()) != D) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(D) + " domain sizes, got " +
                                             std::to_string(domain_sizes.size()));
  }
  for (int d = 0; d < D; ++d) {
    if (!(domain_sizes[d] > 0.0)) {
      throw Error(Errc::NonpositiveWeight, "domain size must be positive", d);
    }
  }
}

}  // namespace

DomainEstimate ht_domain_means(const DesignSample& sample, std::span<const double> domain_sizes,
                               EmptyDomainPolicy policy) {
  const int D = sample.num_domains();
  require_sizes(domain_sizes, D);
  const auto totals = DomainTotals::from(sample);
  DomainEstimate est{std::vector<double>(D), std::vector<double>(domain_sizes.begin(),
                                                                 domain_sizes.end()),
                     Flavor::HorvitzThompson};
  for (int d = 0; d < D; ++d) {
    if (totals.count[d] == 0 && policy == EmptyDomainPolicy::Reject) {
      throw Error(Errc::EmptyDomain, "no sampled unit in domain " + std::to_string(d), d);
    }
    est.means[d] = totals.weighted_values[d] / domain_sizes[d];
  }
  return est;
}

DomainEstimate hajek_domain_means(const DesignSample& sample) {
  const int D = sample.num_domains();
  const auto totals = DomainTotals::from(sample);
  DomainEstimate est{std::vector<double>(D), totals.inverse_pi, Flavor::Hajek};
  for (int d = 0; d < D; ++d) {
    if (totals.count[d] == 0) {
      throw Error(Errc::EmptyDomain, "no sampled unit in domain " + std::to_string(d), d);
    }
    est.means[d] = totals.weighted_values[d] / totals.inverse_pi[d];
  }
  return est;
}

double pooled_block_mean(const DomainTotals& totals, DomainRange block, Flavor flavor,
                         std::span<const double> domain_sizes) {
  const int D = totals.num_domains();
  if (block.first < 0 || block.last >= D || block.first > block.last) {
    throw Error(Errc::InvalidArgument, "block outside 0.." + std::to_string(D - 1));
  }
  CompensatedSum numerator;
  CompensatedSum denominator;
  std::size_t units = 0;
  for (int d = block.first; d <= block.last; ++d) {
    numerator += totals.weighted_values[d];
    units += totals.count[d];
  }
  if (units == 0) {
    throw Error(Errc::EmptyBlock, "no sampled unit in domains " + std::to_string(block.first) +
                                      ".." + std::to_string(block.last),
                block.first);
  }
  if (flavor == Flavor::HorvitzThompson) {
    require_sizes(domain_sizes, D);
    for (int d = block.first; d <= block.last; ++d) denominator += domain_sizes[d];
  } else {
    for (int d = block.first; d <= block.last; ++d) denominator += totals.inverse_pi[d];
  }
  return numerator.value() / denominator.value();
}

double pooled_block_mean(const DesignSample& sample, DomainRange block, Flavor flavor,
                         std::span<const double> domain_sizes) {
  return pooled_block_mean(DomainTotals::from(sample), block, flavor, domain_sizes);
}

}  // namespace isocrit
