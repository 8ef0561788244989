#include "isocrit/selection.hpp"

#include <cmath>
#include <random>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "isocrit/design_cov.hpp"
#include "isocrit/error.hpp"
#include "isocrit/random.hpp"
#include "isocrit/summation.hpp"

namespace isocrit {

std::string_view to_string(Choice choice) noexcept {
  return choice == Choice::Unconstrained ? "unconstrained" : "constrained";
}

namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(Errc::DimensionMismatch, std::string(what) + " has length " +
                                             std::to_string(got) + ", expected " +
                                             std::to_string(want));
  }
}

double weighted_trace(std::span<const double> w, const Eigen::MatrixXd& m) {
  CompensatedSum acc;
  for (std::size_t d = 0; d < w.size(); ++d) acc += w[d] * m(d, d);
  return acc.value();
}

}  // namespace

double sse(std::span<const double> y, std::span<const double> theta,
           const WeightMatrixSpec& weights) {
  require_length(theta.size(), y.size(), "theta");
  require_length(weights.size(), y.size(), "weights");
  const auto w = weights.weights();
  CompensatedSum acc;
  for (std::size_t d = 0; d < y.size(); ++d) {
    const double r = y[d] - theta[d];
    acc += w[d] * r * r;
  }
  return acc.value();
}

CicReport cic(std::span<const double> y, std::span<const double> theta,
              const WeightMatrixSpec& weights, const Eigen::MatrixXd& cov_theta_y,
              const Eigen::MatrixXd& cov_y_y, double penalty) {
  const auto D = static_cast<Eigen::Index>(y.size());
  if (cov_theta_y.rows() != D || cov_theta_y.cols() != D || cov_y_y.rows() != D ||
      cov_y_y.cols() != D) {
    throw Error(Errc::DimensionMismatch, "covariance matrices must be D x D");
  }
  if (!(penalty > 0.0)) throw Error(Errc::InvalidArgument, "penalty constant must be positive");
  CicReport r;
  r.penalty = penalty;
  r.sse_term = sse(y, theta, weights);
  r.trace_constrained = weighted_trace(weights.weights(), cov_theta_y);
  r.trace_unconstrained = weighted_trace(weights.weights(), cov_y_y);
  r.cic_constrained = r.sse_term + penalty * r.trace_constrained;
  r.cic_unconstrained = penalty * r.trace_unconstrained;
  r.chosen = r.cic_unconstrained < r.cic_constrained ? Choice::Unconstrained : Choice::Constrained;
  return r;
}

std::vector<double> adaptive_estimate(const CicReport& report, std::span<const double> y,
                                      std::span<const double> theta) {
  const auto& src = report.chosen == Choice::Unconstrained ? y : theta;
  return {src.begin(), src.end()};
}

SelectionResult select_hajek(const DesignSample& sample, double penalty) {
  SelectionResult out;
  out.unconstrained = hajek_domain_means(sample);
  out.constrained = weighted_pava(out.unconstrained.means, out.unconstrained.weights);
  auto pooled = cov_hat_pooled(sample, out.constrained.partition);
  out.cov_theta_y = std::move(pooled.cov_theta_y);
  out.cov_y_y = std::move(pooled.cov_y_y);
  out.single_unit_domains = std::move(pooled.single_unit_domains);
  const auto W = WeightMatrixSpec::estimated(out.unconstrained.weights);
  out.report = cic(out.unconstrained.means, out.constrained.theta, W, out.cov_theta_y,
                   out.cov_y_y, penalty);
  return out;
}

SelectionResult select_ht(const DesignSample& sample, std::span<const double> domain_sizes,
                          double penalty) {
  SelectionResult out;
  out.unconstrained = ht_domain_means(sample, domain_sizes);
  out.constrained = weighted_pava(out.unconstrained.means, domain_sizes);
  out.cov_y_y = sigma_hat(sample, domain_sizes);
  out.cov_theta_y = projection_matrix(out.constrained.partition, domain_sizes) * out.cov_y_y;
  const auto W = WeightMatrixSpec::population(domain_sizes);
  out.report = cic(out.unconstrained.means, out.constrained.theta, W, out.cov_theta_y,
                   out.cov_y_y, penalty);
  return out;
}

namespace {

struct PseDraw {
  std::vector<double> y_hat;
  std::vector<double> estimate;
};

PseDraw pse_draw(const PopulationDesign& design, std::span<const std::size_t> ids,
                 PseEstimator estimator) {
  const auto sizes = design.population().domain_sizes();
  const auto sample = design.realize(ids);
  PseDraw draw;
  draw.y_hat = ht_domain_means(sample, sizes, EmptyDomainPolicy::ZeroTotal).means;
  draw.estimate = estimator == PseEstimator::Unconstrained
                      ? draw.y_hat
                      : weighted_pava(draw.y_hat, sizes).theta;
  return draw;
}

double weighted_distance(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b) {
  CompensatedSum acc;
  for (std::size_t d = 0; d < w.size(); ++d) {
    const double r = a[d] - b[d];
    acc += w[d] * r * r;
  }
  return acc.value();
}

}  // namespace

PseResult pse(const PopulationDesign& design, PseEstimator estimator, std::size_t mc_pairs,
              std::uint64_t seed, std::size_t enumeration_limit) {
  const auto W = WeightMatrixSpec::population(design.population().domain_sizes());
  const auto w = W.weights();

  if (auto support = design.enumerate(enumeration_limit)) {
    std::vector<PseDraw> draws;
    draws.reserve(support->size());
    for (const auto& point : *support) draws.push_back(pse_draw(design, point.ids, estimator));
    CompensatedSum total;
    for (std::size_t s = 0; s < draws.size(); ++s) {
      for (std::size_t t = 0; t < draws.size(); ++t) {
        total += (*support)[s].probability * (*support)[t].probability *
                 weighted_distance(w, draws[t].y_hat, draws[s].estimate);
      }
    }
    return {total.value(), 0.0, true};
  }

  if (mc_pairs == 0) {
    throw Error(Errc::BudgetRequired,
                "sample space too large to enumerate; give a Monte Carlo budget");
  }
  CompensatedSum sum;
  CompensatedSum sum_sq;
  for (std::size_t i = 0; i < mc_pairs; ++i) {
    SplitMix64 rng_s(derive_seed(seed, {kPseStream, i, 0}));
    SplitMix64 rng_t(derive_seed(seed, {kPseStream, i, 1}));
    const auto s = pse_draw(design, design.draw(rng_s), estimator);
    const auto t = pse_draw(design, design.draw(rng_t), PseEstimator::Unconstrained);
    const double v = weighted_distance(w, t.y_hat, s.estimate);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(mc_pairs);
  const double mean = sum.value() / n;
  const double var = mc_pairs > 1 ? (sum_sq.value() - n * mean * mean) / (n - 1.0) : 0.0;
  return {mean, std::sqrt(std::max(var, 0.0) / n), false};
}

double chi_sq_sf(double x, double df) {
  if (!(df > 0.0)) throw Error(Errc::InvalidArgument, "degrees of freedom must be positive");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

namespace {

struct QuadForm {
  double q = 0.0;
  bool ok = false;
  Eigen::MatrixXd lower;
};

// Cholesky of the covariance; fails for indefinite or numerically singular
// matrices.
QuadForm quad_form(std::span<const double> y, std::span<const double> theta,
                   const Eigen::MatrixXd& cov) {
  const auto D = static_cast<Eigen::Index>(y.size());
  QuadForm out;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kSingularRcond)) return out;
  Eigen::VectorXd r(D);
  for (Eigen::Index d = 0; d < D; ++d) r(d) = y[d] - theta[d];
  const Eigen::VectorXd x = llt.matrixL().solve(r);
  out.q = x.squaredNorm();
  out.ok = std::isfinite(out.q);
  out.lower = llt.matrixL();
  return out;
}

void check_test_inputs(std::span<const double> y, std::span<const double> theta,
                       const PoolingPartition& partition, const Eigen::MatrixXd& cov) {
  const auto D = y.size();
  require_length(theta.size(), D, "theta");
  require_length(static_cast<std::size_t>(partition.num_domains()), D, "partition");
  if (cov.rows() != static_cast<Eigen::Index>(D) || cov.cols() != static_cast<Eigen::Index>(D)) {
    throw Error(Errc::DimensionMismatch, "covariance must be D x D");
  }
}

}  // namespace

TestResult wald_test(std::span<const double> y, std::span<const double> theta,
                     const PoolingPartition& partition, const Eigen::MatrixXd& cov_y_y) {
  check_test_inputs(y, theta, partition, cov_y_y);
  TestResult t;
  t.blocks = partition.num_blocks();
  t.df = static_cast<int>(y.size()) - t.blocks;
  if (t.df == 0) {
    t.p_value = 1.0;
    return t;
  }
  const auto qf = quad_form(y, theta, cov_y_y);
  if (!qf.ok) return t;
  t.q = qf.q;
  t.p_value = chi_sq_sf(t.q, t.df);
  return t;
}

TestResult conditional_test(std::span<const double> y, std::span<const double> theta,
                            const PoolingPartition& partition, const Eigen::MatrixXd& cov_y_y,
                            int mc_draws, std::uint64_t seed) {
  if (mc_draws < 1000) {
    throw Error(Errc::InvalidArgument, "the conditional test needs at least 1000 draws");
  }
  check_test_inputs(y, theta, partition, cov_y_y);
  TestResult t;
  t.blocks = partition.num_blocks();
  t.df = static_cast<int>(y.size()) - t.blocks;
  if (t.df == 0) {
    t.p_value = 1.0;
    return t;
  }
  const auto qf = quad_form(y, theta, cov_y_y);
  if (!qf.ok) return t;
  t.q = qf.q;

  // A draw is left untouched by the pooling exactly when it is already
  // nondecreasing, since only strict violations are pooled.
  const auto D = static_cast<Eigen::Index>(y.size());
  SplitMix64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(D);
  Eigen::VectorXd z(D);
  int monotone = 0;
  for (int i = 0; i < mc_draws; ++i) {
    for (Eigen::Index d = 0; d < D; ++d) eps(d) = normal(rng);
    z.noalias() = qf.lower.triangularView<Eigen::Lower>() * eps;
    bool sorted = true;
    for (Eigen::Index d = 1; d < D && sorted; ++d) sorted = z(d - 1) <= z(d);
    monotone += sorted ? 1 : 0;
  }
  const double p0 = static_cast<double>(monotone) / mc_draws;
  t.p0 = p0;
  t.p_value = t.q > 0.0 ? (1.0 - p0) * chi_sq_sf(t.q, t.df) : 1.0;
  return t;
}

}  // namespace isocrit
