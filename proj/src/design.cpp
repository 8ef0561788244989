#include "isocrit/design.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <random>

#include "isocrit/error.hpp"
#include "isocrit/summation.hpp"

namespace isocrit {

namespace {

std::vector<std::vector<std::size_t>> members_by_group(const Population& pop) {
  std::vector<std::vector<std::size_t>> members(pop.num_groups());
  for (std::size_t k = 0; k < pop.size(); ++k) members[pop.group(k)].push_back(k);
  return members;
}

// Number of k-subsets of n, saturating at `cap`.
std::size_t choose_capped(std::size_t n, std::size_t k, std::size_t cap) {
  k = std::min(k, n - k);
  double acc = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (acc > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(acc));
}

}  // namespace

std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> current(k);
  std::iota(current.begin(), current.end(), std::size_t{0});
  while (true) {
    out.push_back(current);
    std::size_t i = k;
    while (i > 0 && current[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t j = i; j < k; ++j) current[j] = current[j - 1] + 1;
  }
  return out;
}

DesignSample PopulationDesign::realize(std::span<const std::size_t> ids) const {
  const auto& pop = *population_;
  std::vector<SampledUnit> units;
  units.reserve(ids.size());
  for (std::size_t id : ids) {
    units.push_back({pop.value(id), pi(id), pop.domain(id), pop.group(id), id});
  }
  return DesignSample(std::move(units), pop.num_domains(), kind(), joint());
}

// --- stratified SRSWOR -----------------------------------------------------

StratifiedSrsworDesign::StratifiedSrsworDesign(std::shared_ptr<const Population> population,
                                               std::vector<int> allocation)
    : PopulationDesign(std::move(population)),
      allocation_(std::move(allocation)),
      members_(members_by_group(*population_)) {
  if (allocation_.size() != members_.size()) {
    throw Error(Errc::InfeasibleAllocation, "allocation has " +
                                                std::to_string(allocation_.size()) +
                                                " strata, population has " +
                                                std::to_string(members_.size()));
  }
  std::vector<double> n(members_.size());
  std::vector<double> N(members_.size());
  for (std::size_t h = 0; h < members_.size(); ++h) {
    if (allocation_[h] < 1 || static_cast<std::size_t>(allocation_[h]) > members_[h].size()) {
      throw Error(Errc::InfeasibleAllocation,
                  "stratum " + std::to_string(h) + " asks for " + std::to_string(allocation_[h]) +
                      " of " + std::to_string(members_[h].size()) + " units",
                  static_cast<int>(h));
    }
    n[h] = allocation_[h];
    N[h] = static_cast<double>(members_[h].size());
  }
  joint_ = std::make_shared<StratifiedSrsworJoint>(std::move(n), std::move(N));
}

double StratifiedSrsworDesign::pi(std::size_t k) const {
  const int h = population_->group(k);
  return static_cast<double>(allocation_[h]) / static_cast<double>(members_[h].size());
}

double StratifiedSrsworDesign::pi_kl(std::size_t k, std::size_t l) const {
  if (k == l) return pi(k);
  const int h = population_->group(k);
  if (h != population_->group(l)) return pi(k) * pi(l);
  const double n = allocation_[h];
  const double N = static_cast<double>(members_[h].size());
  return n * (n - 1.0) / (N * (N - 1.0));
}

std::vector<std::size_t> StratifiedSrsworDesign::draw(SplitMix64& rng) const {
  std::vector<std::size_t> ids;
  ids.reserve(std::accumulate(allocation_.begin(), allocation_.end(), std::size_t{0}));
  for (std::size_t h = 0; h < members_.size(); ++h) {
    std::sample(members_[h].begin(), members_[h].end(), std::back_inserter(ids),
                allocation_[h], rng);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<std::vector<SupportPoint>> StratifiedSrsworDesign::enumerate(
    std::size_t limit) const {
  std::size_t total = 1;
  for (std::size_t h = 0; h < members_.size(); ++h) {
    const std::size_t c = choose_capped(members_[h].size(), allocation_[h], limit);
    if (c > limit || total > limit / c) return std::nullopt;
    total *= c;
  }
  std::vector<std::vector<std::vector<std::size_t>>> per_stratum;
  for (std::size_t h = 0; h < members_.size(); ++h) {
    auto combos = combinations(members_[h].size(), allocation_[h]);
    for (auto& c : combos) {
      for (auto& i : c) i = members_[h][i];
    }
    per_stratum.push_back(std::move(combos));
  }
  const double p = 1.0 / static_cast<double>(total);
  std::vector<SupportPoint> support;
  support.reserve(total);
  std::vector<std::size_t> pick(members_.size(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    SupportPoint point{{}, p};
    for (std::size_t h = 0; h < members_.size(); ++h) {
      const auto& c = per_stratum[h][pick[h]];
      point.ids.insert(point.ids.end(), c.begin(), c.end());
    }
    std::sort(point.ids.begin(), point.ids.end());
    support.push_back(std::move(point));
    for (std::size_t h = 0; h < members_.size(); ++h) {
      if (++pick[h] < per_stratum[h].size()) break;
      pick[h] = 0;
    }
  }
  return support;
}

// --- cluster sampling ------------------------------------------------------

ClusterDesign::ClusterDesign(std::shared_ptr<const Population> population, int sampled_clusters)
    : PopulationDesign(std::move(population)),
      r_(sampled_clusters),
      members_(members_by_group(*population_)) {
  for (std::size_t c = 0; c < members_.size(); ++c) {
    if (members_[c].empty()) {
      throw Error(Errc::InvalidArgument, "cluster labels must be dense",
                  static_cast<int>(c));
    }
  }
  joint_ = std::make_shared<ClusterJoint>(r_, static_cast<int>(members_.size()));
}

double ClusterDesign::pi(std::size_t) const {
  return static_cast<double>(r_) / static_cast<double>(members_.size());
}

double ClusterDesign::pi_kl(std::size_t k, std::size_t l) const {
  if (k == l || population_->group(k) == population_->group(l)) return pi(k);
  const double r = r_;
  const double R = static_cast<double>(members_.size());
  return r * (r - 1.0) / (R * (R - 1.0));
}

std::vector<std::size_t> ClusterDesign::draw(SplitMix64& rng) const {
  std::vector<int> labels(members_.size());
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<int> chosen;
  chosen.reserve(r_);
  std::sample(labels.begin(), labels.end(), std::back_inserter(chosen), r_, rng);
  std::vector<std::size_t> ids;
  for (int c : chosen) ids.insert(ids.end(), members_[c].begin(), members_[c].end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<std::vector<SupportPoint>> ClusterDesign::enumerate(std::size_t limit) const {
  const std::size_t total = choose_capped(members_.size(), r_, limit);
  if (total > limit) return std::nullopt;
  const double p = 1.0 / static_cast<double>(total);
  std::vector<SupportPoint> support;
  for (const auto& combo : combinations(members_.size(), r_)) {
    SupportPoint point{{}, p};
    for (std::size_t c : combo) {
      point.ids.insert(point.ids.end(), members_[c].begin(), members_[c].end());
    }
    std::sort(point.ids.begin(), point.ids.end());
    support.push_back(std::move(point));
  }
  return support;
}

// --- explicit support ------------------------------------------------------

EnumeratedDesign::EnumeratedDesign(std::shared_ptr<const Population> population,
                                   std::vector<SupportPoint> support)
    : PopulationDesign(std::move(population)), support_(std::move(support)) {
  const std::size_t N = population_->size();
  pi_.assign(N, 0.0);
  auto pairs = std::make_shared<std::vector<double>>(N * N, 0.0);
  auto& pair_table = *pairs;
  CompensatedSum total;
  for (const auto& point : support_) {
    if (!(point.probability >= 0.0)) {
      throw Error(Errc::InvalidArgument, "negative sample probability");
    }
    total += point.probability;
    for (std::size_t k : point.ids) {
      if (k >= N) throw Error(Errc::InvalidArgument, "sample id outside the population");
      pi_[k] += point.probability;
      for (std::size_t l : point.ids) pair_table[k * N + l] += point.probability;
    }
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    throw Error(Errc::InvalidArgument, "sample probabilities do not sum to one");
  }
  pi_pair_ = pairs;
  joint_ = std::make_shared<FunctionJoint>(
      [pairs, N](std::size_t k, std::size_t l) { return (*pairs)[k * N + l]; });
}

double EnumeratedDesign::pi_kl(std::size_t k, std::size_t l) const {
  return (*pi_pair_)[k * population_->size() + l];
}

std::vector<std::size_t> EnumeratedDesign::draw(SplitMix64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  for (const auto& point : support_) {
    u -= point.probability;
    if (u < 0.0) return point.ids;
  }
  return support_.back().ids;
}

std::optional<std::vector<SupportPoint>> EnumeratedDesign::enumerate(std::size_t limit) const {
  if (support_.size() > limit) return std::nullopt;
  return support_;
}

}  // namespace isocrit
