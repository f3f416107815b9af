#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace epsel {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Base seed for a random stream. Distinct streams are derived from it by tag.
struct Seed {
  std::uint64_t value = 0;

  constexpr Seed() = default;
  constexpr explicit Seed(std::uint64_t v) : value(v) {}

  /// Seed for trial `i` of an experiment seeded with `this`.
  [[nodiscard]] constexpr Seed trial(std::uint64_t i) const { return Seed{value + i}; }

  friend constexpr bool operator==(Seed, Seed) = default;
};

}  // namespace epsel
