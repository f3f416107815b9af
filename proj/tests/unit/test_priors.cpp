#include <doctest.h>

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "epsel/error.hpp"
#include "epsel/priors.hpp"
#include "fixtures/mmse_mc_fixture.hpp"

using namespace epsel;

namespace {

// MMSE = 1 - E|E[x|r]|^2 written over the density of u = |r|^2; a different
// route from the library's integral of the posterior-inactivity term.
double mmse_reference(double rho, double v) {
  const double a = 1.0 / rho;
  const double c1 = a + v;
  const double kappa = a / c1;
  const auto integrand = [&](double u) {
    const double active = rho * std::exp(-u / c1) / c1;
    const double inactive = (1.0 - rho) * std::exp(-u / v) / v;
    const double total = active + inactive;
    if (!(total > 0.0)) return 0.0;
    return active * active / total * kappa * kappa * u;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  // Split at the activity transition so both regimes are resolved.
  const double knee = 4.0 * v * std::max(1.0, std::log(1.0 / v));
  boost::math::quadrature::tanh_sinh<double> finite;
  const double head = finite.integrate(integrand, 0.0, knee, 1e-14);
  const double tail = integrator.integrate([&](double s) { return integrand(knee + s); }, 1e-14);
  return 1.0 - head - tail;
}

}  // namespace

TEST_CASE("prior construction and validation") {
  const auto p = PriorSpec::bernoulli_gaussian(0.1);
  CHECK(p.active_var == doctest::Approx(10.0));
  CHECK(p.fourth_moment() == doctest::Approx(20.0));
  CHECK_FALSE(p.is_gaussian());
  CHECK(PriorSpec::gaussian().is_gaussian());
  CHECK_THROWS_AS(PriorSpec::bernoulli_gaussian(0.0), Error);
  CHECK_THROWS_AS(PriorSpec::bernoulli_gaussian(1.5), Error);
  CHECK_THROWS_AS((PriorSpec{0.1, 5.0}.validate()), Error);
}

TEST_CASE("signal samples have the prior's sparsity and power") {
  const auto p = PriorSpec::bernoulli_gaussian(0.2);
  const CVector x = sample_signal(p, 200'000, Seed{1});
  const double active = double((x.array() != Complex{}).count()) / 200'000.0;
  CHECK(active == doctest::Approx(0.2).epsilon(0.02));
  CHECK(x.squaredNorm() / 200'000.0 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(sample_signal(p, 100, Seed{5}) == sample_signal(p, 100, Seed{5}));
}

TEST_CASE("Gaussian prior has closed forms") {
  const auto g = PriorSpec::gaussian();
  for (double v : {1e-3, 0.5, 1.0, 7.0}) {
    CHECK(mmse(g, v) == doctest::Approx(v / (1.0 + v)).epsilon(1e-14));
    CHECK(extrinsic_variance(g, v) == 1.0);
    CHECK(std::abs(posterior_mean(g, Complex(2.0, -1.0), v) - Complex(2.0, -1.0) / (1.0 + v)) <
          1e-14);
  }
  const auto out = extrinsic_denoise(g, CVector::Constant(4, Complex(1.0, 1.0)), 0.3);
  CHECK(out.mean.norm() == 0.0);
  CHECK(out.variance == 1.0);
}

TEST_CASE("MMSE quadrature agrees with an independent tanh-sinh evaluation") {
  for (double rho : {0.05, 0.1, 0.3, 0.7}) {
    const auto p = PriorSpec::bernoulli_gaussian(rho);
    for (double v : {1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 30.0, 1e3}) {
      const double ref = mmse_reference(rho, v);
      CAPTURE(rho);
      CAPTURE(v);
      CHECK(mmse(p, v) == doctest::Approx(ref).epsilon(1e-9));
    }
  }
}

TEST_CASE("MMSE quadrature agrees with the frozen Monte Carlo oracle") {
  const auto p = PriorSpec::bernoulli_gaussian(fixtures::kMmseOracleRho);
  for (const auto& pt : fixtures::kMmseOracle) {
    const double q = mmse(p, pt.v);
    CAPTURE(pt.v);
    CHECK(std::abs(q - pt.mmse) / pt.mmse < 1e-3);
    CHECK(std::abs(q - pt.mmse) < 5.0 * pt.std_error);
  }
}

TEST_CASE("MMSE bounds, monotonicity and determinism") {
  const auto p = PriorSpec::bernoulli_gaussian(0.1);
  double prev = 0.0;
  for (int i = 0; i <= 60; ++i) {
    const double v = std::pow(10.0, -4.0 + 0.1 * i);
    const double m = mmse(p, v);
    CHECK(m > prev);
    CHECK(m < std::min(1.0, v));
    prev = m;
  }
  CHECK(mmse(p, 0.37) == mmse(p, 0.37));
}

TEST_CASE("invalid variances are rejected") {
  const auto p = PriorSpec::bernoulli_gaussian(0.1);
  for (double v : {0.0, -1.0, std::nan(""), double(INFINITY)}) {
    try {
      (void)mmse(p, v);
      FAIL("expected invalid-variance");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::invalid_variance);
    }
    CHECK_THROWS_AS(ExtrinsicDenoiser(p, v), Error);
  }
}

TEST_CASE("extrinsic variance and denoiser") {
  const auto p = PriorSpec::bernoulli_gaussian(0.1);
  CHECK(extrinsic_variance(p, 1e-6) < 1e-6);
  for (double v : {0.01, 0.3, 2.0}) {
    const double m = mmse(p, v);
    const double ve = extrinsic_variance(p, v);
    CHECK(1.0 / ve == doctest::Approx(1.0 / m - 1.0 / v).epsilon(1e-12));

    const ExtrinsicDenoiser eta(p, v);
    const Complex r(0.7, -1.3);
    CHECK(std::abs(eta.posterior_mean(r) - posterior_mean(p, r, v)) < 1e-15);
    const Complex expected = ve * (posterior_mean(p, r, v) / m - r / v);
    CHECK(std::abs(eta(r) - expected) < 1e-12);
  }
  // Far from the origin the posterior is active with certainty.
  const Complex far(50.0, 0.0);
  CHECK(std::abs(posterior_mean(p, far, 0.1) - far * (10.0 / 10.1)) < 1e-10);
  CHECK(posterior_mean(p, Complex{}, 0.1) == Complex{});
}
