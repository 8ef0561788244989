#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isocrit {

enum class Errc {
  EmptyDomain,
  EmptyBlock,
  MissingPopulationSizes,
  NonpositiveWeight,
  DimensionMismatch,
  BudgetRequired,
  IndivisibleSizes,
  InfeasibleAllocation,
  UnknownDesignClosedForm,
  InvalidArgument,
};

std::string_view to_string(Errc code) noexcept;

/// Library error. Numerical conditions that are part of normal operation
/// (singular covariance in a test, zero-variance blocks) are reported in
/// result types instead.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, int index = -1);

  Errc code() const noexcept { return code_; }
  /// Offending domain or block index, or -1.
  int index() const noexcept { return index_; }

 private:
  Errc code_;
  int index_;
};

}  // namespace isocrit
