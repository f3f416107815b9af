#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "epsel/ensembles.hpp"
#include "epsel/priors.hpp"
#include "epsel/random.hpp"

namespace epsel::test {

struct Problem {
  MeasurementModel model;
  CVector x;
  CVector w;
  CVector y;
};

inline Problem make_problem(const EnsembleSpec& ensemble, Index m, Index n, double sigma2,
                            const PriorSpec& prior, std::uint64_t seed) {
  Problem p;
  p.model = build_measurement(ensemble, m, n, sigma2, Seed{seed});
  p.x = sample_signal(prior, n, Seed{seed});
  Rng rng = make_rng(Seed{seed}, Stream::noise);
  p.w = complex_normal_vector(rng, m, sigma2);
  p.y = p.model.apply(p.x) + p.w;
  return p;
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace epsel::test
