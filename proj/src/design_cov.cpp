#include "isocrit/design_cov.hpp"

#include <algorithm>
#include <utility>
#include <numeric>
#include <string>

#include "isocrit/error.hpp"
#include "isocrit/summation.hpp"

namespace isocrit {

LinearizedCovariance::LinearizedCovariance(const DesignSample& sample)
    : sample_(&sample), D_(sample.num_domains()), totals_(DomainTotals::from(sample)) {
  domain_mean_.assign(D_, 0.0);
  for (int d = 0; d < D_; ++d) {
    if (totals_.count[d] > 0) domain_mean_[d] = totals_.weighted_values[d] / totals_.inverse_pi[d];
  }

  const auto units = sample.units();
  if (auto s = sample.joint_provider().structure()) {
    grouped_ = true;
    structure_ = std::move(*s);
    for (const auto& u : units) {
      if (u.group < 0) throw Error(Errc::InvalidArgument, "negative group label");
      G_ = std::max(G_, u.group + 1);
    }
    std::vector<CompensatedSum> resid(static_cast<std::size_t>(D_) * G_);
    std::vector<CompensatedSum> inv(static_cast<std::size_t>(D_) * G_);
    std::vector<CompensatedSum> q2(D_), q1(D_), q0(D_);
    for (const auto& u : units) {
      const double e = u.value - domain_mean_[u.domain];
      const double w = 1.0 / u.pi;
      const double c = (1.0 - u.pi) - structure_.same(u.group);
      const std::size_t slot = static_cast<std::size_t>(u.domain) * G_ + u.group;
      resid[slot] += e * w;
      inv[slot] += w;
      q2[u.domain] += c * e * e * w * w;
      q1[u.domain] += c * e * w * w;
      q0[u.domain] += c * w * w;
    }
    resid_by_group_.resize(resid.size());
    inv_pi_by_group_.resize(inv.size());
    for (std::size_t i = 0; i < resid.size(); ++i) {
      resid_by_group_[i] = resid[i].value();
      inv_pi_by_group_[i] = inv[i].value();
    }
    q2_.resize(D_);
    q1_.resize(D_);
    q0_.resize(D_);
    for (int d = 0; d < D_; ++d) {
      q2_[d] = q2[d].value();
      q1_[d] = q1[d].value();
      q0_[d] = q0[d].value();
    }
  } else {
    order_.resize(units.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return units[a].domain < units[b].domain;
    });
    domain_begin_.assign(D_ + 1, 0);
    for (const auto& u : units) ++domain_begin_[u.domain + 1];
    std::partial_sum(domain_begin_.begin(), domain_begin_.end(), domain_begin_.begin());
  }
}

void LinearizedCovariance::require_nonempty(DomainRange block) const {
  if (block.first < 0 || block.last >= D_ || block.first > block.last) {
    throw Error(Errc::InvalidArgument, "block outside 0.." + std::to_string(D_ - 1));
  }
  if (count(block) == 0) {
    throw Error(Errc::EmptyBlock, "no sampled unit in domains " + std::to_string(block.first) +
                                      ".." + std::to_string(block.last),
                block.first);
  }
}

std::size_t LinearizedCovariance::count(DomainRange block) const {
  std::size_t n = 0;
  for (int d = block.first; d <= block.last; ++d) n += totals_.count[d];
  return n;
}

double LinearizedCovariance::n_hat(DomainRange block) const {
  CompensatedSum total;
  for (int d = block.first; d <= block.last; ++d) total += totals_.inverse_pi[d];
  return total.value();
}

double LinearizedCovariance::hajek_mean(DomainRange block) const {
  require_nonempty(block);
  return pooled_block_mean(totals_, block, Flavor::Hajek);
}

double LinearizedCovariance::pair_sum(DomainRange b1, double c1, DomainRange b2,
                                      double c2) const {
  for (const auto& b : {b1, b2}) {
    if (b.first < 0 || b.last >= D_ || b.first > b.last) {
      throw Error(Errc::InvalidArgument, "block outside 0.." + std::to_string(D_ - 1));
    }
  }
  return grouped_ ? grouped_pair_sum(b1, c1, b2, c2) : direct_pair_sum(b1, c1, b2, c2);
}

double LinearizedCovariance::ac_hat(DomainRange b1, DomainRange b2) const {
  // evaluate in a fixed order so that swapping the blocks gives the same bits
  if (std::pair(b2.first, b2.last) < std::pair(b1.first, b1.last)) std::swap(b1, b2);
  const double m1 = hajek_mean(b1);
  const double m2 = hajek_mean(b2);
  return pair_sum(b1, m1, b2, m2) / (n_hat(b1) * n_hat(b2));
}

// With a_k = (y_k - c1)/pi_k over s_b1 and b_l = (y_l - c2)/pi_l over s_b2,
//   sum_kl c_kl a_k b_l = sum_{k in both} [(1 - pi_k) - same_g(k)] a_k b_k
//                        + sum_g (same_g - cross) A_g B_g + cross A B,
// where A_g, B_g are the group sums. Per-domain sums are kept around the
// domain Hajek mean so nothing large cancels.
double LinearizedCovariance::grouped_pair_sum(DomainRange b1, double c1, DomainRange b2,
                                              double c2) const {
  CompensatedSum total;
  const int lo = std::max(b1.first, b2.first);
  const int hi = std::min(b1.last, b2.last);
  for (int d = lo; d <= hi; ++d) {
    if (totals_.count[d] == 0) continue;
    const double s1 = domain_mean_[d] - c1;
    const double s2 = domain_mean_[d] - c2;
    total += q2_[d];
    total += (s1 + s2) * q1_[d];
    total += s1 * s2 * q0_[d];
  }

  const double cross = structure_.cross_group;
  bool group_terms = cross != 0.0;
  for (int g = 0; g < G_ && !group_terms; ++g) group_terms = structure_.same(g) != 0.0;
  if (!group_terms) return total.value();

  auto group_sums = [&](DomainRange b, double c) {
    std::vector<double> sums(G_);
    for (int g = 0; g < G_; ++g) {
      CompensatedSum acc;
      for (int d = b.first; d <= b.last; ++d) {
        const std::size_t slot = static_cast<std::size_t>(d) * G_ + g;
        acc += resid_by_group_[slot];
        acc += (domain_mean_[d] - c) * inv_pi_by_group_[slot];
      }
      sums[g] = acc.value();
    }
    return sums;
  };
  const auto A = group_sums(b1, c1);
  const auto B = group_sums(b2, c2);
  CompensatedSum a_all;
  CompensatedSum b_all;
  for (int g = 0; g < G_; ++g) {
    total += (structure_.same(g) - cross) * A[g] * B[g];
    a_all += A[g];
    b_all += B[g];
  }
  total += cross * a_all.value() * b_all.value();
  return total.value();
}

double LinearizedCovariance::direct_pair_sum(DomainRange b1, double c1, DomainRange b2,
                                             double c2) const {
  const auto& s = *sample_;
  CompensatedSum total;
  for (std::size_t i = domain_begin_[b1.first]; i < domain_begin_[b1.last + 1]; ++i) {
    const std::size_t a = order_[i];
    const double ak = (s.unit(a).value - c1) / s.unit(a).pi;
    for (std::size_t j = domain_begin_[b2.first]; j < domain_begin_[b2.last + 1]; ++j) {
      const std::size_t b = order_[j];
      total += s.delta_ratio(a, b) * ak * (s.unit(b).value - c2) / s.unit(b).pi;
    }
  }
  return total.value();
}

CovMatrix sigma_hat(const DesignSample& sample, std::span<const double> domain_sizes,
                    EmptyDomainPolicy policy) {
  const int D = sample.num_domains();
  if (domain_sizes.empty()) {
    throw Error(Errc::MissingPopulationSizes, "the covariance of HT means needs N_d");
  }
  if (static_cast<int>(domain_sizes.size()) != D) {
    throw Error(Errc::DimensionMismatch, "domain sizes do not match the sample");
  }
  const LinearizedCovariance engine(sample);
  if (policy == EmptyDomainPolicy::Reject) {
    for (int d = 0; d < D; ++d) {
      if (engine.count(DomainRange::single(d)) == 0) {
        throw Error(Errc::EmptyDomain, "no sampled unit in domain " + std::to_string(d), d);
      }
    }
  }
  CovMatrix S(D, D);
  for (int i = 0; i < D; ++i) {
    for (int j = i; j < D; ++j) {
      const double v = engine.pair_sum(DomainRange::single(i), 0.0, DomainRange::single(j), 0.0) /
                       (domain_sizes[i] * domain_sizes[j]);
      S(i, j) = v;
      S(j, i) = v;
    }
  }
  return S;
}

double ac_population(const PopulationDesign& design, DomainRange b1, DomainRange b2) {
  const Population& pop = design.population();
  const int D = pop.num_domains();
  for (const auto& b : {b1, b2}) {
    if (b.first < 0 || b.last >= D || b.first > b.last) {
      throw Error(Errc::InvalidArgument, "block outside 0.." + std::to_string(D - 1));
    }
  }
  std::vector<std::size_t> u1;
  std::vector<std::size_t> u2;
  for (std::size_t k = 0; k < pop.size(); ++k) {
    if (b1.contains(pop.domain(k))) u1.push_back(k);
    if (b2.contains(pop.domain(k))) u2.push_back(k);
  }
  const double m1 = pop.block_mean(b1);
  const double m2 = pop.block_mean(b2);
  CompensatedSum total;
  for (std::size_t k : u1) {
    const double pk = design.pi(k);
    const double ak = (pop.value(k) - m1) / pk;
    for (std::size_t l : u2) {
      const double pl = design.pi(l);
      const double delta = k == l ? pk * (1.0 - pk) : design.pi_kl(k, l) - pk * pl;
      total += delta * ak * (pop.value(l) - m2) / pl;
    }
  }
  return total.value() / (static_cast<double>(u1.size()) * static_cast<double>(u2.size()));
}

double ac_hat(const DesignSample& sample, DomainRange b1, DomainRange b2) {
  return LinearizedCovariance(sample).ac_hat(b1, b2);
}

double ac_hat_direct(const DesignSample& sample, DomainRange b1, DomainRange b2) {
  const double m1 = pooled_block_mean(sample, b1, Flavor::Hajek);
  const double m2 = pooled_block_mean(sample, b2, Flavor::Hajek);
  const auto units = sample.units();
  CompensatedSum total;
  CompensatedSum n1;
  CompensatedSum n2;
  for (std::size_t a = 0; a < units.size(); ++a) {
    if (b1.contains(units[a].domain)) n1 += 1.0 / units[a].pi;
    if (b2.contains(units[a].domain)) n2 += 1.0 / units[a].pi;
    if (!b1.contains(units[a].domain)) continue;
    const double ak = (units[a].value - m1) / units[a].pi;
    for (std::size_t b = 0; b < units.size(); ++b) {
      if (!b2.contains(units[b].domain)) continue;
      total += sample.delta_ratio(a, b) * ak * (units[b].value - m2) / units[b].pi;
    }
  }
  return total.value() / (n1.value() * n2.value());
}

PooledCovariance cov_hat_pooled(const LinearizedCovariance& engine,
                                const PoolingPartition& partition) {
  const int D = partition.num_domains();
  PooledCovariance out{CovMatrix(D, D), CovMatrix(D, D), {}};
  for (int i = 0; i < D; ++i) {
    for (int j = i; j < D; ++j) {
      const double v = engine.ac_hat(DomainRange::single(i), DomainRange::single(j));
      out.cov_y_y(i, j) = v;
      out.cov_y_y(j, i) = v;
    }
  }
  for (const auto& block : partition.blocks()) {
    if (block.first == block.last) {
      out.cov_theta_y.row(block.first) = out.cov_y_y.row(block.first);
    } else {
      for (int j = 0; j < D; ++j) {
        out.cov_theta_y(block.first, j) = engine.ac_hat(block, DomainRange::single(j));
      }
      for (int i = block.first + 1; i <= block.last; ++i) {
        out.cov_theta_y.row(i) = out.cov_theta_y.row(block.first);
      }
    }
    if (engine.count(block) == 1) {
      for (int d = block.first; d <= block.last; ++d) out.single_unit_domains.push_back(d);
    }
  }
  return out;
}

PooledCovariance cov_hat_pooled(const DesignSample& sample, const PoolingPartition& partition) {
  return cov_hat_pooled(LinearizedCovariance(sample), partition);
}

}  // namespace isocrit
