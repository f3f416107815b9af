#include "epsel/error.hpp"

#include <fmt/format.h>

namespace epsel {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_dimension: return "invalid-dimension";
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::invalid_variance: return "invalid-variance";
    case Errc::unsupported_shape: return "unsupported-shape";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::empty_spectrum: return "empty-spectrum";
    case Errc::numerical_failure: return "numerical-failure";
    case Errc::covariance_construction: return "covariance-construction";
    case Errc::validation: return "validation";
    case Errc::io: return "io";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), what)), code_(code) {}

NumericalFailure::NumericalFailure(int iteration, const std::string& what)
    : Error(Errc::numerical_failure, fmt::format("iteration {}: {}", iteration, what)),
      iteration_(iteration) {}

namespace {

std::string describe(const std::vector<ValidationError::Field>& fields) {
  std::string out = "invalid configuration";
  for (const auto& f : fields) {
    out += fmt::format("\n  {}: {}", f.name, f.reason);
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Field> fields)
    : Error(Errc::validation, describe(fields)), fields_(std::move(fields)) {}

ValidationError::ValidationError(std::string field, std::string reason)
    : ValidationError(std::vector<Field>{{std::move(field), std::move(reason)}}) {}

}  // namespace epsel
