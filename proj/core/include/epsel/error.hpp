#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace epsel {

enum class Errc {
  invalid_dimension,
  invalid_parameter,
  invalid_variance,
  unsupported_shape,
  dimension_mismatch,
  empty_spectrum,
  numerical_failure,
  covariance_construction,
  validation,
  io,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// A non-finite message or an impossible variance at a given iteration.
class NumericalFailure : public Error {
 public:
  NumericalFailure(int iteration, const std::string& what);

  [[nodiscard]] int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Configuration rejected at load time; lists every offending field.
class ValidationError : public Error {
 public:
  struct Field {
    std::string name;
    std::string reason;
  };

  explicit ValidationError(std::vector<Field> fields);
  ValidationError(std::string field, std::string reason);

  [[nodiscard]] const std::vector<Field>& fields() const noexcept { return fields_; }

 private:
  std::vector<Field> fields_;
};

}  // namespace epsel
