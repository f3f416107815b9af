#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "epsel/types.hpp"

namespace epsel {

using Rng = std::mt19937_64;

/// Stream tags keep the draws of independent objects decoupled under one seed.
enum class Stream : std::uint64_t {
  left_unitary = 1,
  right_unitary = 2,
  singular_values = 3,
  signal = 4,
  noise = 5,
  monte_carlo = 6,
  reference_spectrum = 7,
  haar = 8,
};

Rng make_rng(Seed seed, Stream stream, std::uint64_t substream = 0);

/// Circularly symmetric complex Gaussian CN(0, variance).
class ComplexNormal {
 public:
  explicit ComplexNormal(double variance = 1.0) : scale_(std::sqrt(variance / 2.0)) {}

  Complex operator()(Rng& rng) {
    const double re = normal_(rng);
    const double im = normal_(rng);
    return {scale_ * re, scale_ * im};
  }

 private:
  double scale_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

CVector complex_normal_vector(Rng& rng, Index n, double variance);

}  // namespace epsel
