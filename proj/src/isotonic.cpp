#include "isocrit/isotonic.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "isocrit/error.hpp"
#include "isocrit/summation.hpp"

namespace isocrit {

PoolingPartition::PoolingPartition(std::vector<DomainRange> blocks, std::vector<double> values)
    : blocks_(std::move(blocks)), values_(std::move(values)) {
  if (blocks_.size() != values_.size()) {
    throw Error(Errc::DimensionMismatch, "one value per block required");
  }
  int next = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].first != next || blocks_[b].last < blocks_[b].first) {
      throw Error(Errc::InvalidArgument, "blocks must be contiguous and start at domain 0",
                  static_cast<int>(b));
    }
    if (b > 0 && values_[b] < values_[b - 1]) {
      throw Error(Errc::InvalidArgument, "block values must be nondecreasing",
                  static_cast<int>(b));
    }
    next = blocks_[b].last + 1;
  }
  owner_.resize(next);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (int d = blocks_[b].first; d <= blocks_[b].last; ++d) owner_[d] = static_cast<int>(b);
  }
}

PoolingPartition PoolingPartition::identity(std::span<const double> values) {
  std::vector<DomainRange> blocks;
  blocks.reserve(values.size());
  for (int d = 0; d < static_cast<int>(values.size()); ++d) blocks.push_back(DomainRange::single(d));
  PoolingPartition p;
  p.blocks_ = std::move(blocks);
  p.values_.assign(values.begin(), values.end());
  p.owner_.resize(values.size());
  for (int d = 0; d < static_cast<int>(values.size()); ++d) p.owner_[d] = d;
  return p;
}

int PoolingPartition::block_of(int d) const {
  if (d < 0 || d >= static_cast<int>(owner_.size())) {
    throw Error(Errc::InvalidArgument, "domain outside the partition", d);
  }
  return owner_[d];
}

std::vector<double> PoolingPartition::expand() const {
  std::vector<double> out(owner_.size());
  for (std::size_t d = 0; d < owner_.size(); ++d) out[d] = values_[owner_[d]];
  return out;
}

namespace {

void check_inputs(std::span<const double> means, std::span<const double> weights) {
  if (means.size() != weights.size()) {
    throw Error(Errc::DimensionMismatch, "means and weights differ in length");
  }
  if (means.empty()) throw Error(Errc::DimensionMismatch, "no domains");
  for (std::size_t d = 0; d < weights.size(); ++d) {
    if (!(weights[d] > 0.0)) {
      throw Error(Errc::NonpositiveWeight, "weight must be positive", static_cast<int>(d));
    }
  }
}

struct Block {
  int first;
  int last;
  double weighted_sum;
  double weight;
  double value;
};

}  // namespace

IsotonicFit weighted_pava(std::span<const double> means, std::span<const double> weights) {
  check_inputs(means, weights);
  std::vector<Block> stack;
  stack.reserve(means.size());
  for (int d = 0; d < static_cast<int>(means.size()); ++d) {
    // a single domain keeps its input value bit for bit
    Block cur{d, d, weights[d] * means[d], weights[d], means[d]};
    while (!stack.empty() && stack.back().value > cur.value) {
      const Block& prev = stack.back();
      const double sum = prev.weighted_sum + cur.weighted_sum;
      const double weight = prev.weight + cur.weight;
      cur = {prev.first, cur.last, sum, weight, sum / weight};
      stack.pop_back();
    }
    stack.push_back(cur);
  }

  std::vector<DomainRange> blocks;
  std::vector<double> values;
  blocks.reserve(stack.size());
  values.reserve(stack.size());
  for (const auto& b : stack) {
    blocks.push_back({b.first, b.last});
    values.push_back(b.value);
  }
  IsotonicFit fit;
  fit.partition = PoolingPartition(std::move(blocks), std::move(values));
  fit.theta = fit.partition.expand();
  return fit;
}

std::vector<double> max_min_solution(std::span<const double> means,
                                     std::span<const double> weights) {
  check_inputs(means, weights);
  const int D = static_cast<int>(means.size());
  // pooled[i][j] = weighted mean of domains i..j
  std::vector<std::vector<double>> pooled(D, std::vector<double>(D, 0.0));
  for (int i = 0; i < D; ++i) {
    CompensatedSum wy;
    CompensatedSum w;
    for (int j = i; j < D; ++j) {
      wy += weights[j] * means[j];
      w += weights[j];
      pooled[i][j] = i == j ? means[i] : wy.value() / w.value();
    }
  }
  std::vector<double> theta(D);
  for (int d = 0; d < D; ++d) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= d; ++i) {
      double lowest = std::numeric_limits<double>::infinity();
      for (int j = d; j < D; ++j) lowest = std::min(lowest, pooled[i][j]);
      best = std::max(best, lowest);
    }
    theta[d] = best;
  }
  return theta;
}

Eigen::MatrixXd projection_matrix(const PoolingPartition& partition,
                                  std::span<const double> weights) {
  const int D = partition.num_domains();
  if (static_cast<int>(weights.size()) != D) {
    throw Error(Errc::DimensionMismatch, "weights do not match the partition");
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(D, D);
  for (const auto& block : partition.blocks()) {
    CompensatedSum total;
    for (int b = block.first; b <= block.last; ++b) total += weights[b];
    const double denom = total.value();
    for (int a = block.first; a <= block.last; ++a) {
      for (int b = block.first; b <= block.last; ++b) P(a, b) = weights[b] / denom;
    }
  }
  return P;
}

// The minorant's slopes are the pooled block values, so the diagram is
// read off the strict PAVA partition: a boundary between blocks with
// different values is a corner, one between tied blocks is a flat spot,
// and every index inside a block lies above the minorant.
GcmDiagnostics gcm_classify(std::span<const double> means, std::span<const double> weights) {
  const IsotonicFit fit = weighted_pava(means, weights);
  const int D = static_cast<int>(means.size());
  GcmDiagnostics g;
  g.cum_weight.assign(D + 1, 0.0);
  g.cum_value.assign(D + 1, 0.0);
  g.minorant.assign(D + 1, 0.0);
  g.left_slopes = fit.theta;
  g.interior.assign(D > 1 ? D - 1 : 0, GcmPoint::Above);
  CompensatedSum r;
  CompensatedSum t;
  for (int d = 1; d <= D; ++d) {
    r += weights[d - 1];
    t += weights[d - 1] * means[d - 1];
    g.cum_weight[d] = r.value();
    g.cum_value[d] = t.value();
  }
  const auto& partition = fit.partition;
  for (const auto& block : partition.blocks()) {
    const double base_x = g.cum_weight[block.first];
    const double base_y = g.cum_value[block.first];
    const double slope = partition.values()[partition.block_of(block.first)];
    for (int d = block.first + 1; d <= block.last; ++d) {
      g.minorant[d] = base_y + slope * (g.cum_weight[d] - base_x);
    }
    // block ends touch the diagram exactly
    g.minorant[block.last + 1] = g.cum_value[block.last + 1];
    if (block.last + 1 < D) {
      const int next = partition.block_of(block.last + 1);
      g.interior[block.last] =
          partition.values()[next] > slope ? GcmPoint::Corner : GcmPoint::Flat;
    }
  }
  return g;
}

}  // namespace isocrit
