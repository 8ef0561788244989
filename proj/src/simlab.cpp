#include "isocrit/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "isocrit/error.hpp"
#include "isocrit/random.hpp"
#include "isocrit/summation.hpp"

namespace isocrit::simlab {

double sigmoid(Sigmoid s, int d, int D) {
  const double x = static_cast<double>(d) / D;
  switch (s) {
    case Sigmoid::S1: {
      const double e = std::exp(5.0 * x - 2.0);
      return 2.0 * e / (1.0 + e);
    }
    case Sigmoid::S2: {
      const double e = std::exp(5.0 * x - 2.0);
      return 4.0 * e / (1.0 + e);
    }
    case Sigmoid::S3: {
      const double e = std::exp(20.0 * x - 10.0);
      return e / (1.0 + e);
    }
  }
  return 0.0;
}

int ScenarioConfig::strata() const {
  if (const auto* s = std::get_if<StratifiedAllocation>(&design)) {
    return static_cast<int>(s->per_stratum.size());
  }
  return std::get<ClusterAllocation>(design).total_clusters;
}

int ScenarioConfig::sample_size() const {
  if (const auto* s = std::get_if<StratifiedAllocation>(&design)) {
    return std::accumulate(s->per_stratum.begin(), s->per_stratum.end(), 0);
  }
  const auto& c = std::get<ClusterAllocation>(design);
  return c.sampled * (population_size / c.total_clusters);
}

void ScenarioConfig::validate() const {
  if (domains < 2) throw Error(Errc::InvalidArgument, "scenarios need at least two domains");
  if (reps < 1) throw Error(Errc::InvalidArgument, "reps must be at least 1");
  if (population_size < domains) {
    throw Error(Errc::InvalidArgument, "population smaller than the number of domains");
  }
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidArgument, "sigma must be nonnegative");
  if (!(penalty > 0.0)) throw Error(Errc::InvalidArgument, "penalty constant must be positive");
  if (conditional_draws < 1000) {
    throw Error(Errc::InvalidArgument, "the conditional test needs at least 1000 draws");
  }
  if (population_size % domains != 0) {
    throw Error(Errc::IndivisibleSizes, "N = " + std::to_string(population_size) +
                                            " is not divisible by D = " + std::to_string(domains));
  }
  const int G = strata();
  if (G < 1) throw Error(Errc::InvalidArgument, "design needs at least one stratum or cluster");
  if (population_size % G != 0) {
    throw Error(Errc::IndivisibleSizes, "N = " + std::to_string(population_size) +
                                            " is not divisible into " + std::to_string(G) +
                                            " equal groups");
  }
  const int group_size = population_size / G;
  if (const auto* s = std::get_if<StratifiedAllocation>(&design)) {
    for (std::size_t h = 0; h < s->per_stratum.size(); ++h) {
      if (s->per_stratum[h] < 1 || s->per_stratum[h] > group_size) {
        throw Error(Errc::InfeasibleAllocation,
                    "stratum " + std::to_string(h) + " asks for " +
                        std::to_string(s->per_stratum[h]) + " of " + std::to_string(group_size) +
                        " units",
                    static_cast<int>(h));
      }
    }
  } else {
    const auto& c = std::get<ClusterAllocation>(design);
    if (c.sampled < 1 || c.sampled > c.total_clusters) {
      throw Error(Errc::InfeasibleAllocation, "need 1 <= r <= R clusters");
    }
  }
  if (distribution == Distribution::ChiSquare) {
    for (double mu : make_scenario_means(*this)) {
      if (!(mu > 0.0)) {
        throw Error(Errc::InvalidArgument, "chi-square degrees of freedom must be positive");
      }
    }
  }
}

std::vector<double> make_scenario_means(const ScenarioConfig& config) {
  const int D = config.domains;
  std::vector<double> mu(D);
  for (int d = 1; d <= D; ++d) mu[d - 1] = sigmoid(config.sigmoid, d, D);
  const double prev = mu[D - 2];
  const double last = mu[D - 1];
  if (config.shape.kind == Shape::Kind::Pulldown) {
    const double t = config.shape.amount;
    // t = 1 must land exactly on the previous mean
    mu[D - 1] = t == 1.0 ? prev : last - t * (last - prev);
  } else {
    mu[D - 1] = prev - config.shape.amount;
  }
  return mu;
}

std::vector<int> default_allocation(int sample_size) {
  static constexpr int kParts[] = {1, 2, 2, 3};
  static constexpr int kTotal = 8;
  std::vector<int> out(4);
  std::vector<std::pair<int, int>> remainders;
  int used = 0;
  for (int h = 0; h < 4; ++h) {
    const long scaled = static_cast<long>(sample_size) * kParts[h];
    out[h] = static_cast<int>(scaled / kTotal);
    remainders.emplace_back(static_cast<int>(scaled % kTotal), h);
    used += out[h];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; used < sample_size; ++i, ++used) ++out[remainders[i].second];
  return out;
}

Population generate_population(const ScenarioConfig& config, std::uint64_t seed) {
  const int N = config.population_size;
  const int D = config.domains;
  if (N % D != 0) {
    throw Error(Errc::IndivisibleSizes, "N is not divisible by D");
  }
  const int G = config.strata();
  if (G < 1 || N % G != 0) {
    throw Error(Errc::IndivisibleSizes, "N is not divisible by the number of groups");
  }
  const auto mu = make_scenario_means(config);
  const int per_domain = N / D;

  std::vector<double> values(N);
  std::vector<int> domains(N);
  std::vector<double> z(N);
  for (int k = 0; k < N; ++k) {
    const int d = k / per_domain;
    domains[k] = d;
    SplitMix64 value_rng(derive_seed(seed, {kPopulationStream, static_cast<std::uint64_t>(k), 0}));
    SplitMix64 aux_rng(derive_seed(seed, {kPopulationStream, static_cast<std::uint64_t>(k), 1}));
    if (config.distribution == Distribution::Normal) {
      std::normal_distribution<double> normal(0.0, 1.0);
      values[k] = mu[d] + config.sigma * normal(value_rng);
    } else {
      std::chi_squared_distribution<double> chi(mu[d]);
      values[k] = chi(value_rng);
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    z[k] = config.sigma * (static_cast<double>(d + 1) / D) + noise(aux_rng);
  }

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return z[a] < z[b]; });
  std::vector<int> groups(N);
  const int group_size = N / G;
  for (int rank = 0; rank < N; ++rank) groups[order[rank]] = rank / group_size;
  return Population(std::move(values), std::move(domains), std::move(groups), D);
}

std::unique_ptr<PopulationDesign> make_design(const ScenarioConfig& config,
                                              std::shared_ptr<const Population> population) {
  if (const auto* s = std::get_if<StratifiedAllocation>(&config.design)) {
    return std::make_unique<StratifiedSrsworDesign>(std::move(population), s->per_stratum);
  }
  return std::make_unique<ClusterDesign>(std::move(population),
                                         std::get<ClusterAllocation>(config.design).sampled);
}

DesignSample draw_stsi_sample(std::shared_ptr<const Population> population,
                              const std::vector<int>& allocation, std::uint64_t seed) {
  const StratifiedSrsworDesign design(std::move(population), allocation);
  SplitMix64 rng(seed);
  return design.realize(design.draw(rng));
}

DesignSample draw_cluster_sample(std::shared_ptr<const Population> population,
                                 int sampled_clusters, std::uint64_t seed) {
  const ClusterDesign design(std::move(population), sampled_clusters);
  SplitMix64 rng(seed);
  return design.realize(design.draw(rng));
}

namespace {

double weighted_error(std::span<const double> est, std::span<const double> target,
                      std::span<const double> w) {
  CompensatedSum acc;
  for (std::size_t d = 0; d < est.size(); ++d) {
    const double r = est[d] - target[d];
    acc += w[d] * r * r;
  }
  return acc.value();
}

}  // namespace

double mse_accumulate(const std::vector<std::vector<double>>& estimates,
                      std::span<const double> population_means,
                      std::span<const double> population_weights) {
  if (estimates.empty()) throw Error(Errc::InvalidArgument, "no replicates");
  CompensatedSum acc;
  for (const auto& est : estimates) {
    if (est.size() != population_means.size() || est.size() != population_weights.size()) {
      throw Error(Errc::DimensionMismatch, "estimate length differs from D");
    }
    acc += weighted_error(est, population_means, population_weights);
  }
  return acc.value() / static_cast<double>(estimates.size());
}

double MethodTally::std_error() const noexcept {
  if (decided == 0) return 0.0;
  const double p = proportion();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(decided));
}

namespace {

enum class Outcome : unsigned char { Constrained, Unconstrained, Unavailable };

struct ReplicateRecord {
  bool empty_domain = false;
  bool monotone = false;
  Outcome cic = Outcome::Constrained;
  Outcome wald = Outcome::Constrained;
  Outcome conditional = Outcome::Constrained;
  double err_unconstrained = 0.0;
  double err_constrained = 0.0;
  double err_adaptive = 0.0;
};

Outcome test_outcome(const TestResult& t, double level) {
  if (!t.available()) return Outcome::Unavailable;
  return t.rejects(level) ? Outcome::Unconstrained : Outcome::Constrained;
}

ReplicateRecord run_one(const ScenarioConfig& config, const PopulationDesign& design,
                        std::span<const double> ybar, std::span<const double> w_u,
                        std::size_t rep) {
  ReplicateRecord rec;
  SplitMix64 rng(derive_seed(config.seed, {kSampleStream, rep}));
  const auto sample = design.realize(design.draw(rng));
  const auto counts = domain_counts(sample);
  if (std::find(counts.n.begin(), counts.n.end(), std::size_t{0}) != counts.n.end()) {
    rec.empty_domain = true;
    return rec;
  }

  const auto sel = config.flavor == Flavor::Hajek
                       ? select_hajek(sample, config.penalty)
                       : select_ht(sample, design.population().domain_sizes(), config.penalty);
  const auto& y = sel.unconstrained.means;
  const auto& theta = sel.constrained.theta;
  const auto& partition = sel.constrained.partition;
  rec.monotone = partition.num_blocks() == config.domains;
  rec.cic = sel.report.chosen == Choice::Unconstrained ? Outcome::Unconstrained
                                                       : Outcome::Constrained;
  if (config.run_tests && !rec.monotone) {
    rec.wald = test_outcome(wald_test(y, theta, partition, sel.cov_y_y), config.test_level);
    const auto cond =
        conditional_test(y, theta, partition, sel.cov_y_y, config.conditional_draws,
                         derive_seed(config.seed, {kConditionalStream, rep}));
    rec.conditional = test_outcome(cond, config.test_level);
  }
  rec.err_unconstrained = weighted_error(y, ybar, w_u);
  rec.err_constrained = weighted_error(theta, ybar, w_u);
  rec.err_adaptive = rec.cic == Outcome::Unconstrained ? rec.err_unconstrained
                                                       : rec.err_constrained;
  return rec;
}

void tally(MethodTally& t, Outcome o) {
  if (o == Outcome::Unavailable) {
    ++t.unavailable;
    return;
  }
  ++t.decided;
  if (o == Outcome::Unconstrained) ++t.unconstrained;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance of the per-replicate values
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  m.mean = compensated_sum(xs) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    CompensatedSum ss;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.var = ss.value() / static_cast<double>(xs.size() - 1);
  }
  return m;
}

double covariance(const std::vector<double>& a, double ma, const std::vector<double>& b,
                  double mb) {
  if (a.size() < 2) return 0.0;
  CompensatedSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - ma) * (b[i] - mb);
  return acc.value() / static_cast<double>(a.size() - 1);
}

// Delta-method standard error of mean(a) / mean(b).
double ratio_se(const std::vector<double>& a, const Moments& ma, const std::vector<double>& b,
                const Moments& mb) {
  if (a.empty() || mb.mean == 0.0) return 0.0;
  const double r = ma.mean / mb.mean;
  const double cab = covariance(a, ma.mean, b, mb.mean);
  const double v = (ma.var - 2.0 * r * cab + r * r * mb.var) /
                   (mb.mean * mb.mean * static_cast<double>(a.size()));
  return std::sqrt(std::max(v, 0.0));
}

}  // namespace

SimulationSummary run_replications(const ScenarioConfig& config, unsigned threads) {
  config.validate();
  auto population = std::make_shared<const Population>(generate_population(config, config.seed));
  const auto design = make_design(config, population);
  const auto ybar = population->domain_means();
  const auto w_u = population->domain_shares();

  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<ReplicateRecord> records(reps);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, reps));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < reps && !failed; i = next++) {
        records[i] = run_one(config, *design, ybar, w_u, i);
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SimulationSummary s;
  s.name = config.name;
  s.reps_requested = reps;
  std::vector<double> eu, ec, ea;
  eu.reserve(reps);
  ec.reserve(reps);
  ea.reserve(reps);
  for (const auto& rec : records) {
    if (rec.empty_domain) {
      ++s.empty_domain_reps;
      continue;
    }
    ++s.reps_used;
    if (rec.monotone) ++s.monotone_reps;
    tally(s.cic, rec.cic);
    if (config.run_tests) {
      tally(s.wald, rec.wald);
      tally(s.conditional, rec.conditional);
    }
    eu.push_back(rec.err_unconstrained);
    ec.push_back(rec.err_constrained);
    ea.push_back(rec.err_adaptive);
  }
  const auto mu = moments(eu);
  const auto mc = moments(ec);
  const auto ma = moments(ea);
  const double n = static_cast<double>(std::max<std::size_t>(eu.size(), 1));
  s.mse_unconstrained = mu.mean;
  s.mse_constrained = mc.mean;
  s.mse_adaptive = ma.mean;
  s.se_mse_unconstrained = std::sqrt(mu.var / n);
  s.se_mse_constrained = std::sqrt(mc.var / n);
  s.se_mse_adaptive = std::sqrt(ma.var / n);
  if (mu.mean > 0.0) {
    s.ratio_constrained = mc.mean / mu.mean;
    s.ratio_adaptive = ma.mean / mu.mean;
    s.se_ratio_constrained = ratio_se(ec, mc, eu, mu);
    s.se_ratio_adaptive = ratio_se(ea, ma, eu, mu);
  }
  return s;
}

namespace {

std::string shape_label(const Shape& shape) {
  if (shape.kind == Shape::Kind::Pulldown) {
    if (shape.amount == 0.0) return "Monotone";
    if (shape.amount == 1.0) return "Flat";
    if (shape.amount == 2.0) return "Non-monotone";
    return "t=" + std::to_string(static_cast<int>(shape.amount));
  }
  return "delta";
}

ScenarioConfig base_config(Scale scale) {
  ScenarioConfig c;
  c.reps = scale == Scale::Full ? kFullReps : kDeskReps;
  return c;
}

std::string fmt_delta(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "delta=%.2f", delta);
  return buf;
}

// Every cell of every table gets its own population seed.
std::uint64_t cell_seed(int id, std::size_t cell) {
  return static_cast<std::uint64_t>(id) * 100 + cell + 1;
}

}  // namespace

TablePreset table_preset(int id, Scale scale) {
  TablePreset t;
  t.id = id;
  const std::vector<Shape> shapes = {Shape::monotone(), Shape::flat(), Shape::non_monotone()};

  if (id >= 1 && id <= 3) {
    const Shape shape = shapes[id - 1];
    t.title = shape_label(shape) + " scenario, D=4, normal(mu_d, 3^2), stratified SRSWOR";
    for (int N : {10000, 20000, 40000}) {
      for (int base : {200, 1000, 2000}) {
        const int n = base * N / 10000;
        auto c = base_config(scale);
        c.population_size = N;
        c.shape = shape;
        c.design = StratifiedAllocation{default_allocation(n)};
        c.seed = cell_seed(id, t.cells.size());
        c.name = "table" + std::to_string(id) + "/N=" + std::to_string(N) + "/n=" +
                 std::to_string(n);
        t.cells.push_back({"N=" + std::to_string(N), "n=" + std::to_string(n), c});
      }
    }
    return t;
  }
  if (id == 4) {
    t.title = "Skewed case, D=4, chi-square(mu_d), stratified SRSWOR";
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      for (int n : {200, 1000, 2000}) {
        auto c = base_config(scale);
        c.distribution = Distribution::ChiSquare;
        c.shape = shapes[s];
        c.design = StratifiedAllocation{default_allocation(n)};
        c.seed = cell_seed(id, t.cells.size());
        c.name = "table4/" + shape_label(shapes[s]) + "/n=" + std::to_string(n);
        t.cells.push_back({shape_label(shapes[s]), "n=" + std::to_string(n), c});
      }
    }
    return t;
  }
  if (id == 5 || id == 6) {
    std::vector<Shape> groups = shapes;
    if (id == 6) groups = {Shape::pulldown(3), Shape::pulldown(4), Shape::pulldown(5)};
    t.title = id == 5 ? "Correlated case, D=4, cluster sampling of r out of 100 clusters"
                      : "Increasing violation, correlated case, D=4, cluster sampling";
    for (std::size_t s = 0; s < groups.size(); ++s) {
      for (int r : {2, 10, 20}) {
        auto c = base_config(scale);
        c.shape = groups[s];
        c.design = ClusterAllocation{100, r};
        c.seed = cell_seed(id, t.cells.size());
        c.name = "table" + std::to_string(id) + "/" + shape_label(groups[s]) + "/r=" +
                 std::to_string(r);
        t.cells.push_back({shape_label(groups[s]), "r=" + std::to_string(r), c});
      }
    }
    return t;
  }
  if (id == 7) {
    t.title = "8-domain case, S2, N=20000, stratified SRSWOR";
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      for (int n : {400, 2000, 4000}) {
        auto c = base_config(scale);
        c.domains = 8;
        c.sigmoid = Sigmoid::S2;
        c.population_size = 20000;
        c.shape = shapes[s];
        c.design = StratifiedAllocation{default_allocation(n)};
        c.seed = cell_seed(id, t.cells.size());
        c.name = "table7/" + shape_label(shapes[s]) + "/n=" + std::to_string(n);
        t.cells.push_back({shape_label(shapes[s]), "n=" + std::to_string(n), c});
      }
    }
    return t;
  }
  if (id >= 8 && id <= 11) {
    const int D = id <= 9 ? 5 : 20;
    const double sigma = id % 2 == 0 ? 0.5 : 1.0;
    // N = 1000 in four strata of 250; the D = 20 split is capped at the stratum size
    const std::vector<int> alloc = D == 5 ? std::vector<int>{25, 50, 50, 75}
                                          : std::vector<int>{100, 200, 250, 250};
    t.title = "S3, D=" + std::to_string(D) + ", sigma=" + (sigma == 0.5 ? "0.5" : "1") +
              ", N=1000, n=" + std::to_string(D == 5 ? 200 : 800);
    for (double delta : {-0.45, -0.30, -0.15, 0.0, 0.15, 0.30, 0.45}) {
      auto c = base_config(scale);
      c.domains = D;
      c.sigmoid = Sigmoid::S3;
      c.sigma = sigma;
      c.population_size = 1000;
      c.shape = Shape::offset(delta);
      c.design = StratifiedAllocation{alloc};
      c.seed = cell_seed(id, t.cells.size());
      const std::string group = delta < 0.0 ? "Monotone" : delta == 0.0 ? "Flat" : "Non-monotone";
      c.name = "table" + std::to_string(id) + "/" + fmt_delta(delta);
      t.cells.push_back({group, fmt_delta(delta), c});
    }
    return t;
  }
  throw Error(Errc::InvalidArgument, "no table " + std::to_string(id) + "; tables are 1..11");
}

}  // namespace isocrit::simlab
