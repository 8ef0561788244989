#pragma once

// Choosing between the constrained and unconstrained domain estimators:
// the cone information criterion for survey data, the predictive squared
// error it estimates, and the Wald / conditional tests it is compared with.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "isocrit/design.hpp"
#include "isocrit/estimators.hpp"
#include "isocrit/isotonic.hpp"
#include "isocrit/survey.hpp"

namespace isocrit {

enum class Choice { Constrained, Unconstrained };

std::string_view to_string(Choice choice) noexcept;

inline constexpr double kDefaultPenalty = 2.0;

struct CicReport {
  double sse_term = 0.0;
  double trace_constrained = 0.0;    ///< Tr(W cov(theta, y))
  double trace_unconstrained = 0.0;  ///< Tr(W cov(y, y))
  double cic_constrained = 0.0;
  double cic_unconstrained = 0.0;
  double penalty = kDefaultPenalty;
  Choice chosen = Choice::Constrained;
};

/// sum_d W_d (y_d - theta_d)^2.
double sse(std::span<const double> y, std::span<const double> theta,
           const WeightMatrixSpec& weights);

/// Criterion values for both estimators. The unconstrained estimator is
/// chosen only when its criterion is strictly smaller.
/// For the HT flavor pass cov_theta_y = P Sigma^ and cov_y_y = Sigma^ with
/// W_U; for the Hajek flavor the pooled ÂC matrices with W_s.
CicReport cic(std::span<const double> y, std::span<const double> theta,
              const WeightMatrixSpec& weights, const Eigen::MatrixXd& cov_theta_y,
              const Eigen::MatrixXd& cov_y_y, double penalty = kDefaultPenalty);

/// y if the report chose the unconstrained estimator, theta otherwise.
std::vector<double> adaptive_estimate(const CicReport& report, std::span<const double> y,
                                      std::span<const double> theta);

/// End-to-end criterion for one sample.
struct SelectionResult {
  DomainEstimate unconstrained;
  IsotonicFit constrained;
  Eigen::MatrixXd cov_theta_y;
  Eigen::MatrixXd cov_y_y;
  CicReport report;
  std::vector<int> single_unit_domains;
};

SelectionResult select_hajek(const DesignSample& sample, double penalty = kDefaultPenalty);
SelectionResult select_ht(const DesignSample& sample, std::span<const double> domain_sizes,
                          double penalty = kDefaultPenalty);

enum class PseEstimator { Constrained, Unconstrained };

struct PseResult {
  double value = 0.0;
  double std_error = 0.0;  ///< zero when exact
  bool exact = false;
};

/// Predictive squared error of the Horvitz-Thompson based estimator:
/// E[(yhat_{s*} - est_s)' W_U (yhat_{s*} - est_s)] over independent samples
/// s, s*. Exact by double enumeration when the sample space has at most
/// `enumeration_limit` points, otherwise Monte Carlo with `mc_pairs` pairs
/// (BudgetRequired if mc_pairs is zero).
PseResult pse(const PopulationDesign& design, PseEstimator estimator,
              std::size_t mc_pairs = 0, std::uint64_t seed = 0,
              std::size_t enumeration_limit = 5000);

struct TestResult {
  double q = 0.0;
  int df = 0;
  int blocks = 0;
  std::optional<double> p_value;  ///< nullopt: covariance singular, test unavailable
  std::optional<double> p0;       ///< conditional test only

  bool available() const noexcept { return p_value.has_value(); }
  bool rejects(double level = 0.05) const noexcept {
    return p_value.has_value() && *p_value < level;
  }
};

/// Reciprocal condition number below which an estimated covariance matrix
/// is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Naive Wald test of the observed pooling: Q = r' cov^-1 r, r = y - theta,
/// compared to chi2(D - k). No pooling gives Q = 0, p = 1. The covariance
/// must be positive definite with rcond >= kSingularRcond, otherwise the
/// test is unavailable.
TestResult wald_test(std::span<const double> y, std::span<const double> theta,
                     const PoolingPartition& partition, const Eigen::MatrixXd& cov_y_y);

inline constexpr int kDefaultConditionalDraws = 10000;

/// Conditional test: the null law of Q is a point mass p0 at zero mixed
/// with chi2(D - k). p0 is the Monte Carlo probability that a N(0, cov_y_y)
/// draw is already nondecreasing (no pooling). p-value = (1 - p0) SF(Q) for
/// Q > 0 and 1 for Q = 0. Throws InvalidArgument if mc_draws < 1000.
TestResult conditional_test(std::span<const double> y, std::span<const double> theta,
                            const PoolingPartition& partition,
                            const Eigen::MatrixXd& cov_y_y,
                            int mc_draws = kDefaultConditionalDraws, std::uint64_t seed = 0);

/// Upper tail of the chi-square distribution.
double chi_sq_sf(double x, double df);

}  // namespace isocrit
