#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "doctest.h"
#include "isocrit/design.hpp"
#include "isocrit/error.hpp"
#include "isocrit/survey.hpp"

namespace testsupport {

using namespace isocrit;

inline DesignSample independent_sample(const std::vector<double>& y, const std::vector<double>& pi,
                                       const std::vector<int>& domain, int D) {
  std::vector<SampledUnit> units;
  for (std::size_t k = 0; k < y.size(); ++k) units.push_back({y[k], pi[k], domain[k], 0, k});
  return DesignSample(std::move(units), D, DesignKind::IndependentApprox,
                      std::make_shared<IndependentJoint>());
}

/// Every unit of the population with pi = 1.
inline DesignSample census(const Population& pop) {
  std::vector<double> y(pop.values().begin(), pop.values().end());
  std::vector<int> d(pop.domains().begin(), pop.domains().end());
  return independent_sample(y, std::vector<double>(y.size(), 1.0), d, pop.num_domains());
}

inline std::shared_ptr<const Population> make_population(std::vector<double> y,
                                                         std::vector<int> domain,
                                                         std::vector<int> group, int D) {
  return std::make_shared<const Population>(std::move(y), std::move(domain), std::move(group), D);
}

/// Error code thrown by f; fails the test when nothing is thrown.
inline Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidArgument;
}

}  // namespace testsupport
