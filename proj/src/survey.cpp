#include "isocrit/survey.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "isocrit/error.hpp"
#include "isocrit/summation.hpp"

namespace isocrit {

Population::Population(std::vector<double> values, std::vector<int> domains,
                       std::vector<int> groups, int num_domains)
    : values_(std::move(values)),
      domains_(std::move(domains)),
      groups_(std::move(groups)),
      num_domains_(num_domains) {
  if (num_domains_ < 1) throw Error(Errc::InvalidArgument, "population needs at least one domain");
  if (domains_.size() != values_.size() || groups_.size() != values_.size()) {
    throw Error(Errc::DimensionMismatch, "values, domains and groups differ in length");
  }
  std::vector<CompensatedSum> totals(num_domains_);
  domain_sizes_.assign(num_domains_, 0.0);
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const int d = domains_[k];
    if (d < 0 || d >= num_domains_) {
      throw Error(Errc::InvalidArgument, "unit domain out of range", d);
    }
    if (groups_[k] < 0) throw Error(Errc::InvalidArgument, "negative group label");
    num_groups_ = std::max(num_groups_, groups_[k] + 1);
    domain_sizes_[d] += 1.0;
    totals[d] += values_[k];
  }
  domain_means_.resize(num_domains_);
  domain_totals_.resize(num_domains_);
  for (int d = 0; d < num_domains_; ++d) {
    if (domain_sizes_[d] == 0.0) {
      throw Error(Errc::EmptyDomain, "population domain has no units", d);
    }
    domain_totals_[d] = totals[d].value();
    domain_means_[d] = domain_totals_[d] / domain_sizes_[d];
  }
}

double Population::block_mean(DomainRange block) const {
  CompensatedSum total;
  double size = 0.0;
  for (int d = block.first; d <= block.last; ++d) {
    total += domain_totals_[d];
    size += domain_sizes_[d];
  }
  return total.value() / size;
}

std::vector<double> Population::domain_shares() const {
  std::vector<double> shares(domain_sizes_);
  const double n = static_cast<double>(size());
  for (double& s : shares) s /= n;
  return shares;
}

std::string_view to_string(DesignKind kind) noexcept {
  switch (kind) {
    case DesignKind::StratifiedSrswor: return "stratified-srswor";
    case DesignKind::SingleStageCluster: return "single-stage-cluster";
    case DesignKind::IndependentApprox: return "independent-approx";
    case DesignKind::General: return "general";
  }
  return "unknown";
}

double IndependentJoint::joint(const SampledUnit& k, const SampledUnit& l) const {
  return k.pi * l.pi;
}

std::optional<PairStructure> IndependentJoint::structure() const {
  return PairStructure{};
}

StratifiedSrsworJoint::StratifiedSrsworJoint(std::vector<double> sample_sizes,
                                             std::vector<double> stratum_sizes)
    : n_(std::move(sample_sizes)), N_(std::move(stratum_sizes)) {
  if (n_.size() != N_.size()) {
    throw Error(Errc::DimensionMismatch, "stratum sample and population sizes differ in length");
  }
}

double StratifiedSrsworJoint::joint(const SampledUnit& k, const SampledUnit& l) const {
  if (k.group != l.group) return k.pi * l.pi;
  const auto h = static_cast<std::size_t>(k.group);
  const double n = n_[h];
  const double N = N_[h];
  return n * (n - 1.0) / (N * (N - 1.0));
}

std::optional<PairStructure> StratifiedSrsworJoint::structure() const {
  PairStructure s;
  s.same_group.resize(n_.size(), 0.0);
  for (std::size_t h = 0; h < n_.size(); ++h) {
    const double n = n_[h];
    const double N = N_[h];
    // 1 - pi^2 / pi_kl, only defined when the stratum can hold a pair
    if (n >= 2.0 && N >= 2.0) s.same_group[h] = -(N - n) / (N * (n - 1.0));
  }
  return s;
}

ClusterJoint::ClusterJoint(int sampled_clusters, int total_clusters)
    : r_(sampled_clusters), R_(total_clusters) {
  if (sampled_clusters < 1 || sampled_clusters > total_clusters) {
    throw Error(Errc::InfeasibleAllocation, "need 1 <= r <= R clusters");
  }
}

double ClusterJoint::joint(const SampledUnit& k, const SampledUnit& l) const {
  if (k.group == l.group) return r_ / R_;
  return r_ * (r_ - 1.0) / (R_ * (R_ - 1.0));
}

std::optional<PairStructure> ClusterJoint::structure() const {
  PairStructure s;
  s.default_same = 1.0 - r_ / R_;
  if (r_ >= 2.0) {
    const double pi = r_ / R_;
    s.cross_group = 1.0 - pi * pi / (r_ * (r_ - 1.0) / (R_ * (R_ - 1.0)));
  }
  return s;
}

DesignSample::DesignSample(std::vector<SampledUnit> units, int num_domains, DesignKind kind,
                           std::shared_ptr<const JointInclusion> joint)
    : units_(std::move(units)), num_domains_(num_domains), kind_(kind), joint_(std::move(joint)) {
  if (num_domains_ < 1) throw Error(Errc::InvalidArgument, "sample needs at least one domain");
  if (!joint_) throw Error(Errc::InvalidArgument, "missing joint inclusion provider");
}

double DesignSample::pi_kl(std::size_t a, std::size_t b) const {
  if (a == b) return units_[a].pi;
  return joint_->joint(units_[a], units_[b]);
}

double DesignSample::delta_ratio(std::size_t a, std::size_t b) const {
  if (a == b) return 1.0 - units_[a].pi;
  const double joint = joint_->joint(units_[a], units_[b]);
  return (joint - units_[a].pi * units_[b].pi) / joint;
}

DesignSample DesignSample::with_values(const std::function<double(double)>& f) const {
  std::vector<SampledUnit> units(units_);
  for (auto& u : units) u.value = f(u.value);
  return DesignSample(std::move(units), num_domains_, kind_, joint_);
}

bool ValidationReport::has(Violation::Kind kind) const noexcept {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

namespace {

struct PairIssue {
  std::size_t count = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  double value = 0.0;
};

}  // namespace

ValidationReport validate_design(const DesignSample& sample) {
  ValidationReport report;
  const auto units = sample.units();
  const int D = sample.num_domains();
  std::vector<std::size_t> per_domain(D, 0);

  for (std::size_t a = 0; a < units.size(); ++a) {
    const auto& u = units[a];
    std::ostringstream os;
    if (!(u.pi > 0.0)) {
      os << "nonpositive inclusion probability at unit " << u.id << " (pi = " << u.pi << ")";
      report.violations.push_back({Violation::Kind::NonpositiveInclusion, os.str()});
    } else if (u.pi > 1.0) {
      os << "inclusion probability above one at unit " << u.id << " (pi = " << u.pi << ")";
      report.violations.push_back({Violation::Kind::InclusionAboveOne, os.str()});
    }
    if (u.domain < 0 || u.domain >= D) {
      std::ostringstream dm;
      dm << "domain " << u.domain << " of unit " << u.id << " outside 0.." << D - 1;
      report.violations.push_back({Violation::Kind::DomainOutOfRange, dm.str()});
    } else {
      ++per_domain[u.domain];
    }
  }

  PairIssue nonmeasurable;
  PairIssue asymmetric;
  for (std::size_t a = 0; a < units.size(); ++a) {
    for (std::size_t b = a + 1; b < units.size(); ++b) {
      const double ab = sample.pi_kl(a, b);
      const double ba = sample.pi_kl(b, a);
      if (!(ab > 0.0)) {
        if (nonmeasurable.count++ == 0) nonmeasurable = {1, a, b, ab};
      }
      if (std::abs(ab - ba) > 1e-12 * std::max(std::abs(ab), std::abs(ba))) {
        if (asymmetric.count++ == 0) asymmetric = {1, a, b, ab};
      }
    }
  }
  auto pair_message = [&](const char* what, const PairIssue& issue, std::size_t total) {
    std::ostringstream os;
    os << what << ": units " << units[issue.a].id << " and " << units[issue.b].id
       << " (pi_kl = " << issue.value << ")";
    if (total > 1) os << " and " << total - 1 << " more pairs";
    return os.str();
  };
  if (nonmeasurable.count > 0) {
    report.violations.push_back({Violation::Kind::NonmeasurablePair,
                                 pair_message("nonmeasurable pair", nonmeasurable,
                                              nonmeasurable.count)});
  }
  if (asymmetric.count > 0) {
    report.violations.push_back({Violation::Kind::AsymmetricJoint,
                                 pair_message("asymmetric joint inclusion probability",
                                              asymmetric, asymmetric.count)});
  }

  for (int d = 0; d < D; ++d) {
    if (per_domain[d] == 0) {
      report.violations.push_back(
          {Violation::Kind::EmptyDomain, "empty domain " + std::to_string(d)});
    }
  }
  return report;
}

DomainCounts domain_counts(const DesignSample& sample) {
  const int D = sample.num_domains();
  DomainCounts counts{std::vector<std::size_t>(D, 0), std::vector<double>(D, 0.0)};
  std::vector<CompensatedSum> n_hat(D);
  for (const auto& u : sample.units()) {
    ++counts.n[u.domain];
    n_hat[u.domain] += 1.0 / u.pi;
  }
  for (int d = 0; d < D; ++d) counts.n_hat[d] = n_hat[d].value();
  return counts;
}

WeightMatrixSpec::WeightMatrixSpec(Kind kind, std::span<const double> sizes)
    : kind_(kind), weights_(sizes.begin(), sizes.end()) {
  if (weights_.empty()) throw Error(Errc::DimensionMismatch, "empty weight vector");
  for (std::size_t d = 0; d < weights_.size(); ++d) {
    if (!(weights_[d] > 0.0) || !std::isfinite(weights_[d])) {
      throw Error(Errc::NonpositiveWeight, "domain size must be positive",
                  static_cast<int>(d));
    }
  }
  const double total = compensated_sum(weights_);
  for (double& w : weights_) w /= total;
}

WeightMatrixSpec WeightMatrixSpec::population(std::span<const double> domain_sizes) {
  return WeightMatrixSpec(Kind::Population, domain_sizes);
}

WeightMatrixSpec WeightMatrixSpec::estimated(std::span<const double> estimated_sizes) {
  return WeightMatrixSpec(Kind::Estimated, estimated_sizes);
}

}  // namespace isocrit
