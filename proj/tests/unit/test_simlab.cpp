#include <cmath>
#include <set>

#include "doctest.h"
#include "isocrit/error.hpp"
#include "isocrit/simlab.hpp"
#include "support.hpp"

using namespace isocrit;
using namespace isocrit::simlab;
using testsupport::code_of;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig c;
  c.name = "small";
  c.population_size = 1000;
  c.design = StratifiedAllocation{default_allocation(80)};
  c.shape = Shape::non_monotone();
  c.reps = 60;
  c.seed = 77;
  c.conditional_draws = 1000;
  return c;
}

bool same_tally(const MethodTally& a, const MethodTally& b) {
  return a.unconstrained == b.unconstrained && a.decided == b.decided &&
         a.unavailable == b.unavailable;
}

}  // namespace

TEST_SUITE("simlab") {
  TEST_CASE("limiting means") {
    ScenarioConfig c;
    const auto mono = make_scenario_means(c);
    const std::vector<double> want{0.6418, 1.2449, 1.7039, 1.9052};
    for (int d = 0; d < 4; ++d) {
      const double e = std::exp(5.0 * (d + 1) / 4.0 - 2.0);
      CHECK(std::abs(mono[d] - 2.0 * e / (1.0 + e)) < 1e-15);
      CHECK(std::abs(mono[d] - want[d]) < 2e-4);
    }

    c.shape = Shape::flat();
    const auto flat = make_scenario_means(c);
    CHECK(flat[3] == flat[2]);
    CHECK(std::abs(flat[2] - 1.7039) < 5e-5);

    c.shape = Shape::non_monotone();
    const auto down = make_scenario_means(c);
    CHECK(down[3] < down[2]);

    ScenarioConfig s3;
    s3.domains = 5;
    s3.sigmoid = Sigmoid::S3;
    s3.shape = Shape::offset(0.0);
    const auto offset = make_scenario_means(s3);
    CHECK(offset[4] == offset[3]);
    CHECK(offset[3] == sigmoid(Sigmoid::S3, 4, 5));
    CHECK(sigmoid(Sigmoid::S2, 2, 4) == doctest::Approx(2.0 * sigmoid(Sigmoid::S1, 2, 4)));
  }

  TEST_CASE("noise-free population sits on the limiting means") {
    ScenarioConfig c;
    c.sigma = 0.0;
    c.population_size = 400;
    const auto pop = generate_population(c, 5);
    const auto mu = make_scenario_means(c);
    for (std::size_t k = 0; k < 400; ++k) {
      CHECK(pop.values()[k] == mu[pop.domains()[k]]);
    }
    CHECK(pop.domain_sizes()[0] == 100.0);
    for (int g = 0; g < 4; ++g) {
      std::size_t count = 0;
      for (int label : pop.groups()) count += label == g;
      CHECK(count == 100);
    }
  }

  TEST_CASE("population synthesis is deterministic in the seed") {
    ScenarioConfig c;
    c.population_size = 2000;
    const auto a = generate_population(c, 9);
    const auto b = generate_population(c, 9);
    const auto other = generate_population(c, 10);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    CHECK(std::equal(a.groups().begin(), a.groups().end(), b.groups().begin()));
    CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), other.values().begin()));
  }

  TEST_CASE("chi-square domains average to their degrees of freedom") {
    ScenarioConfig c;
    c.distribution = Distribution::ChiSquare;
    c.population_size = 100000;
    const auto pop = generate_population(c, 3);
    const auto mu = make_scenario_means(c);
    for (int d = 0; d < 4; ++d) {
      const double se = std::sqrt(2.0 * mu[d] / 25000.0);
      CHECK(std::abs(pop.domain_means()[d] - mu[d]) < 3.0 * se);
    }
  }

  TEST_CASE("size checks") {
    ScenarioConfig c;
    c.population_size = 1002;
    CHECK(code_of([&] { generate_population(c, 1); }) == Errc::IndivisibleSizes);
    ScenarioConfig tight;
    tight.population_size = 100;
    tight.design = StratifiedAllocation{{30, 30, 30, 30}};
    CHECK(code_of([&] { tight.validate(); }) == Errc::InfeasibleAllocation);
    ScenarioConfig cluster;
    cluster.design = ClusterAllocation{100, 101};
    CHECK_THROWS_AS(cluster.validate(), Error);
  }

  TEST_CASE("default allocation") {
    CHECK(default_allocation(200) == std::vector<int>{25, 50, 50, 75});
    CHECK(default_allocation(8000) == std::vector<int>{1000, 2000, 2000, 3000});
    const auto odd = default_allocation(101);
    CHECK(odd[0] + odd[1] + odd[2] + odd[3] == 101);
  }

  TEST_CASE("stratified draws hit the allocation exactly") {
    ScenarioConfig c;
    c.population_size = 800;
    auto pop = std::make_shared<const Population>(generate_population(c, 2));
    const std::vector<int> alloc{5, 10, 10, 15};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = draw_stsi_sample(pop, alloc, seed);
      std::vector<int> got(4, 0);
      for (const auto& u : s.units()) {
        ++got[u.group];
        CHECK(u.pi == doctest::Approx(alloc[u.group] / 200.0));
      }
      CHECK(got == alloc);
    }
    const auto census = draw_stsi_sample(pop, {200, 200, 200, 200}, 1);
    CHECK(census.units().size() == 800);
    for (const auto& u : census.units()) CHECK(u.pi == 1.0);
  }

  TEST_CASE("cluster draws") {
    ScenarioConfig c;
    c.population_size = 1000;
    c.design = ClusterAllocation{100, 2};
    auto pop = std::make_shared<const Population>(generate_population(c, 4));
    const auto all = draw_cluster_sample(pop, 100, 1);
    CHECK(all.units().size() == 1000);
    const auto two = draw_cluster_sample(pop, 2, 1);
    CHECK(two.units().size() == 20);
    std::set<int> clusters;
    for (const auto& u : two.units()) clusters.insert(u.group);
    CHECK(clusters.size() == 2);
  }

  TEST_CASE("cluster design gives unbiased domain sizes over every cluster pair") {
    std::vector<double> y;
    std::vector<int> dom, grp;
    for (int k = 0; k < 40; ++k) {
      y.push_back(k);
      dom.push_back(k % 3 == 0 ? 0 : 1);
      grp.push_back((k * 7) % 10);
    }
    auto pop = testsupport::make_population(y, dom, grp, 2);
    ClusterDesign design(pop, 2);
    const auto support = design.enumerate(1000);
    REQUIRE(support.has_value());
    CHECK(support->size() == 45);
    std::vector<double> expected(2, 0.0);
    for (const auto& point : *support) {
      for (std::size_t id : point.ids) expected[dom[id]] += point.probability / 0.2;
    }
    CHECK(expected[0] == doctest::Approx(14.0).epsilon(1e-13));
    CHECK(expected[1] == doctest::Approx(26.0).epsilon(1e-13));
    CHECK(design.pi(0) == doctest::Approx(0.2));
  }

  TEST_CASE("mean squared error accumulation") {
    const std::vector<double> truth{1.0, 2.0};
    const std::vector<double> w{0.25, 0.75};
    CHECK(mse_accumulate({truth, truth}, truth, w) == 0.0);
    const std::vector<double> one{1.0};
    CHECK(mse_accumulate({{1.3}}, one, one) == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(mse_accumulate({{2.0, 2.0}, {1.0, 4.0}}, truth, w) ==
          doctest::Approx((0.25 + 3.0) / 2.0));
    CHECK(code_of([&] { mse_accumulate({}, truth, w); }) == Errc::InvalidArgument);
  }

  TEST_CASE("replications do not depend on the thread count") {
    const auto config = small_config();
    const auto one = run_replications(config, 1);
    const auto three = run_replications(config, 3);
    CHECK(same_tally(one.cic, three.cic));
    CHECK(same_tally(one.wald, three.wald));
    CHECK(same_tally(one.conditional, three.conditional));
    CHECK(one.mse_unconstrained == three.mse_unconstrained);
    CHECK(one.mse_constrained == three.mse_constrained);
    CHECK(one.mse_adaptive == three.mse_adaptive);
    CHECK(one.ratio_adaptive == three.ratio_adaptive);
    CHECK(one.monotone_reps == three.monotone_reps);
    CHECK(one.reps_used == 60);
    CHECK(one.cic.decided == 60);
    CHECK(one.wald.decided + one.wald.unavailable == 60);
  }

  TEST_CASE("a single replicate decides one way") {
    auto config = small_config();
    config.reps = 1;
    const auto s = run_replications(config, 1);
    CHECK((s.cic.proportion() == 0.0 || s.cic.proportion() == 1.0));
    CHECK(s.reps_used == 1);
  }

  TEST_CASE("near noise-free monotone scenario never prefers the unconstrained estimator") {
    auto config = small_config();
    config.shape = Shape::monotone();
    config.sigma = 0.01;
    config.reps = 40;
    const auto s = run_replications(config, 1);
    CHECK(s.cic.proportion() == 0.0);
    CHECK(s.monotone_reps == 40);
    CHECK(s.ratio_constrained == 1.0);
    CHECK(s.ratio_adaptive == 1.0);
  }

  TEST_CASE("table presets") {
    const auto t1 = table_preset(1);
    CHECK(t1.cells.size() == 9);
    CHECK(t1.cells.front().config.reps == kFullReps);
    CHECK(table_preset(1, Scale::Desk).cells.front().config.reps == kDeskReps);
    bool has_4000 = false;
    for (const auto& cell : table_preset(7).cells) {
      const auto& a = std::get<StratifiedAllocation>(cell.config.design).per_stratum;
      if (a[0] + a[1] + a[2] + a[3] == 4000) has_4000 = true;
      CHECK(cell.config.sample_size() <= 4000);
    }
    CHECK(has_4000);
    CHECK(code_of([] { table_preset(0); }) == Errc::InvalidArgument);
    CHECK(code_of([] { table_preset(12); }) == Errc::InvalidArgument);

    std::set<std::uint64_t> seeds;
    std::set<std::string> names;
    std::size_t cells = 0;
    for (int id = 1; id <= 11; ++id) {
      for (const auto& cell : table_preset(id).cells) {
        CHECK_NOTHROW(cell.config.validate());
        seeds.insert(cell.config.seed);
        names.insert(cell.config.name);
        ++cells;
      }
    }
    CHECK(seeds.size() == cells);
    CHECK(names.size() == cells);
  }
}
