#include "isocrit/error.hpp"

namespace isocrit {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyDomain: return "EmptyDomain";
    case Errc::EmptyBlock: return "EmptyBlock";
    case Errc::MissingPopulationSizes: return "MissingPopulationSizes";
    case Errc::NonpositiveWeight: return "NonpositiveWeight";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::BudgetRequired: return "BudgetRequired";
    case Errc::IndivisibleSizes: return "IndivisibleSizes";
    case Errc::InfeasibleAllocation: return "InfeasibleAllocation";
    case Errc::UnknownDesignClosedForm: return "UnknownDesignClosedForm";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message, int index)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      index_(index) {}

}  // namespace isocrit
