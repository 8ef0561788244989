#pragma once

// Weighted isotonic (nondecreasing) regression of domain means.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "isocrit/survey.hpp"

namespace isocrit {

/// Ordered blocks of consecutive domains covering 0..D-1, one fitted value
/// per block. The number of blocks is the effective parameter count k.
class PoolingPartition {
 public:
  PoolingPartition() = default;
  PoolingPartition(std::vector<DomainRange> blocks, std::vector<double> values);

  /// Every domain in its own block.
  static PoolingPartition identity(std::span<const double> values);

  std::span<const DomainRange> blocks() const noexcept { return blocks_; }
  std::span<const double> values() const noexcept { return values_; }
  int num_blocks() const noexcept { return static_cast<int>(blocks_.size()); }
  int num_domains() const noexcept { return blocks_.empty() ? 0 : blocks_.back().last + 1; }

  /// Index of the block holding domain d.
  int block_of(int d) const;
  const DomainRange& block_containing(int d) const { return blocks_[block_of(d)]; }

  /// Fitted value for every domain.
  std::vector<double> expand() const;

 private:
  std::vector<DomainRange> blocks_;
  std::vector<double> values_;
  std::vector<int> owner_;
};

struct IsotonicFit {
  std::vector<double> theta;
  PoolingPartition partition;
};

/// Pool-adjacent-violators. Minimizes sum_d w_d (y_d - theta_d)^2 subject to
/// theta nondecreasing. Adjacent blocks are pooled only on a strict
/// violation, so exactly tied neighbours stay separate blocks.
/// Throws NonpositiveWeight, DimensionMismatch.
IsotonicFit weighted_pava(std::span<const double> means, std::span<const double> weights);

/// Closed form theta_d = max_{i<=d} min_{j>=d} ybar_{i:j}, O(D^3).
std::vector<double> max_min_solution(std::span<const double> means,
                                     std::span<const double> weights);

/// P with P y = theta: P[a][b] = w_b / sum_{c in block(a)} w_c for b in
/// block(a), zero otherwise.
Eigen::MatrixXd projection_matrix(const PoolingPartition& partition,
                                  std::span<const double> weights);

enum class GcmPoint { Corner, Flat, Above };

/// Cumulative sum diagram (r(d), t(d)), d = 0..D, its greatest convex
/// minorant, and the classification of interior indices 1..D-1.
struct GcmDiagnostics {
  std::vector<double> cum_weight;   ///< r(0..D)
  std::vector<double> cum_value;    ///< t(0..D)
  std::vector<double> minorant;     ///< g(0..D)
  std::vector<double> left_slopes;  ///< slope of the minorant on (r(d-1), r(d)], d = 1..D
  std::vector<GcmPoint> interior;   ///< classification of d = 1..D-1 (index d-1)
};

GcmDiagnostics gcm_classify(std::span<const double> means, std::span<const double> weights);

}  // namespace isocrit
