#include <doctest.h>

#include <cmath>

#include "epsel/ep_core.hpp"
#include "epsel/error.hpp"
#include "unit/support.hpp"

using namespace epsel;

TEST_CASE("gamma_coeff on a point mass") {
  const auto pm = SpectralDensity::point_mass(2.0, 0.5);
  CHECK(gamma_coeff(pm, 0.1, 1.0) == doctest::Approx(2.1));
  CHECK(gamma_coeff(pm, 0.1, 0.5) == doctest::Approx(1.1));
  // sigma2 = 0 and a square orthogonal system: gamma = v.
  CHECK(gamma_coeff(SpectralDensity::point_mass(1.0, 1.0), 0.0, 0.3) == doctest::Approx(0.3));
}

TEST_CASE("gamma_coeff bounds and errors") {
  const auto emp = SpectralDensity::empirical({0.0, 0.5, 1.0, 4.0, 2.5}, 0.5);
  for (double v : {1e-3, 0.1, 1.0, 10.0}) CHECK(gamma_coeff(emp, 0.05, v) >= v / 0.5);
  CHECK(std::isfinite(gamma_coeff(emp, 0.0, 1.0)));
  CHECK_THROWS_AS(gamma_coeff(SpectralDensity::empirical({}, 0.5), 0.1, 1.0), Error);
  CHECK_THROWS_AS(gamma_coeff(emp, 0.1, 0.0), Error);
  CHECK_THROWS_AS(gamma_coeff(emp, -0.1, 1.0), Error);
}

TEST_CASE("lmmse_step matches the dense LMMSE filter") {
  const auto prior = PriorSpec::bernoulli_gaussian(0.2);
  const auto p = test::make_problem(EnsembleSpec::iid_gaussian(), 12, 30, 0.05, prior, 7);
  const CMatrix a = p.model.dense();
  Rng rng = make_rng(Seed{8}, Stream::monte_carlo);
  const CVector x_ba = complex_normal_vector(rng, 30, 0.3);
  const double v_ba = 0.4;

  const CMatrix w = a.adjoint() *
                    (0.05 * CMatrix::Identity(12, 12) + v_ba * a * a.adjoint()).inverse();
  const double gamma = 30.0 / (w * a).trace().real();
  const CVector expected = x_ba + gamma * w * (p.y - a * x_ba);

  const auto out = lmmse_step(p.model, p.y, x_ba, v_ba);
  CHECK(out.gamma == doctest::Approx(gamma).epsilon(1e-12));
  CHECK(out.v_ab == doctest::Approx(gamma - v_ba).epsilon(1e-12));
  CHECK((out.x_ab - expected).norm() < 1e-10);
  CHECK_THROWS_AS(lmmse_step(p.model, CVector::Zero(3), x_ba, v_ba), Error);
}

TEST_CASE("run_ep records T iterations and is deterministic") {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto p = test::make_problem(EnsembleSpec::row_orthogonal(), 256, 512, 0.01, prior, 3);
  const auto a = run_ep(p.model, prior, p.y, p.x, 8, {.early_stop_tol = 0.0});
  const auto b = run_ep(p.model, prior, p.y, p.x, 8, {.early_stop_tol = 0.0});
  REQUIRE(a.iterations.size() == 8);
  CHECK_FALSE(a.early_stopped);
  CHECK(a.iterations.front().v_ba == 1.0);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(a.iterations[t].mse == b.iterations[t].mse);
    CHECK(a.iterations[t].v_ab > 0.0);
    CHECK(a.iterations[t].gamma == doctest::Approx(a.iterations[t].v_ab + a.iterations[t].v_ba));
  }
  CHECK(a.iterations.back().mse < 0.2 * a.iterations.front().mse);
  CHECK((a.estimate - b.estimate).norm() == 0.0);
}

TEST_CASE("run_ep without ground truth reports NaN errors") {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto p = test::make_problem(EnsembleSpec::row_orthogonal(), 64, 128, 0.01, prior, 3);
  const auto traj = run_ep(p.model, prior, p.y, std::nullopt, 3, {.early_stop_tol = 0.0});
  CHECK(std::isnan(traj.iterations[0].mse));
  CHECK(std::isnan(traj.iterations[0].mse_ab));
}

TEST_CASE("run_ep early stopping and message recording") {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto p = test::make_problem(EnsembleSpec::row_orthogonal(), 256, 512, 0.01, prior, 4);
  EpOptions opts;
  opts.early_stop_tol = 1e-6;
  opts.keep_messages = true;
  const auto traj = run_ep(p.model, prior, p.y, p.x, 200, opts);
  CHECK(traj.early_stopped);
  CHECK(traj.iterations.size() < 200);
  CHECK(traj.x_ab.size() == traj.iterations.size());
  const double n = 512.0;
  CHECK((p.x - traj.x_ab.back()).squaredNorm() / n ==
        doctest::Approx(traj.iterations.back().mse_ab));
}

TEST_CASE("Gaussian prior: v_BA stays at 1 and the error is the LMMSE error") {
  const auto prior = PriorSpec::gaussian();
  const auto p = test::make_problem(EnsembleSpec::row_orthogonal(), 512, 1024, 0.1, prior, 1);
  const auto traj = run_ep(p.model, prior, p.y, p.x, 4, {.early_stop_tol = 0.0});
  for (const auto& it : traj.iterations) {
    CHECK(it.v_ba == 1.0);
    CHECK(it.v_ab == doctest::Approx(1.1));
    CHECK(it.mse == doctest::Approx(traj.iterations[0].mse));
  }
  CHECK(traj.iterations[0].mse == doctest::Approx(1.1 / 2.1).epsilon(0.1));
}

TEST_CASE("run_ep argument checks") {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto p = test::make_problem(EnsembleSpec::row_orthogonal(), 16, 32, 0.01, prior, 1);
  CHECK_THROWS_AS(run_ep(p.model, prior, p.y, p.x, 0), Error);
  CHECK_THROWS_AS(run_ep(p.model, prior, CVector::Zero(3), p.x, 2), Error);
  CHECK_THROWS_AS(run_ep(p.model, prior, p.y, CVector(CVector::Zero(3)), 2), Error);
  CHECK_THROWS_AS(run_ep(p.model, PriorSpec{0.5, 1.0}, p.y, p.x, 2), Error);
}
