// Acceptance runs AC-1 .. AC-8. One line per criterion:
//   AC-n PASS|FAIL <measurements> (<seconds> s)
// Criteria named with --expect-fail still print FAIL but do not fail the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "epsel/diagnostics.hpp"
#include "epsel/ensembles.hpp"
#include "epsel/experiment.hpp"
#include "epsel/priors.hpp"
#include "epsel/random.hpp"
#include "epsel/state_evolution.hpp"
#include "fixtures/mmse_mc_fixture.hpp"

using namespace epsel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  double budget_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

ExperimentConfig theorem_config() {
  ExperimentConfig c;
  c.n = 4096;
  c.delta = 0.5;
  c.sigma2 = 0.01;
  c.prior = PriorSpec::bernoulli_gaussian(0.1);
  c.ensemble = EnsembleSpec::row_orthogonal();
  c.iterations = 10;
  c.trials = 10;
  c.base_seed = 1;
  return c;
}

Outcome ac1() {
  ExperimentConfig c;
  c.n = 2048;
  c.delta = 0.5;
  c.sigma2 = 0.1;
  c.prior = PriorSpec::gaussian();
  c.iterations = 10;
  c.trials = 10;
  const auto rs = run_experiment(c);
  const double target = 1.1 / 2.1;
  double worst = 0.0;
  for (const auto& row : rs.aggregate) worst = std::max(worst, std::abs(row.mse_mean - target));
  const double se_dev = std::abs(rs.se->predicted_mse.front() - target);
  return {worst < 0.03 && se_dev < 1e-12,
          fmt::format("max |mean MSE - 0.523810| = {:.4g} (limit 0.03), SE = {:.6f}", worst,
                      rs.se->predicted_mse.front())};
}

Outcome ac2() {
  const auto rows = compare_se_mc(theorem_config());
  double worst = 0.0;
  int worst_t = -1;
  for (const auto& r : rows) {
    if (r.rel_dev > worst) {
      worst = r.rel_dev;
      worst_t = r.iter;
    }
  }
  return {rows.size() == 10 && worst < 0.05,
          fmt::format("max rel_dev = {:.4f} at t = {} (limit 0.05)", worst, worst_t)};
}

Outcome ac3() {
  bool pass = true;
  double worst = 0.0;  // largest |c| / SE seen
  std::uint64_t seed = 100;
  for (double rho : {0.1, 1.0}) {
    const auto prior = PriorSpec::bernoulli_gaussian(rho);
    for (double v : {0.1, 0.5, 2.0}) {
      const auto r = lemma1_check(prior, v, 1'000'000, seed++);
      const auto z = [](Complex c, double se) {
        return se > 0.0 ? std::abs(c) / se : (std::abs(c) == 0.0 ? 0.0 : INFINITY);
      };
      const double z1 = z(r.c1, r.c1_se);
      const double z2 = z(r.c2_minus_mmse, r.c2_se);
      worst = std::max({worst, z1, z2});
      pass = pass && z1 <= 3.0 && z2 <= 3.0;
    }
  }
  return {pass, fmt::format("max |estimate| / SE = {:.3f} over 6 cases (limit 3)", worst)};
}

Outcome ac4() {
  ExperimentConfig c = theorem_config();
  c.mode = Mode::diagnose;
  c.iterations = 5;
  const auto rs = run_experiment(c);
  int orth_ok = 0;
  int cov_ok = 0;
  double worst_orth = 0.0;
  std::set<std::string> failing;
  for (const auto& d : rs.diagnostics) {
    const auto& r = d.report;
    for (const auto& e : r.entries) {
      if (!e.pass && (e.identity == "mmqq" || e.identity == "qq")) {
        failing.insert(fmt::format("{}({},{})", e.identity, e.indices[0], e.indices[1]));
      }
    }
    if (r.family_pass("hq") && r.family_pass("bm") && r.family_pass("hhmm")) ++orth_ok;
    if (r.family_pass("mmqq") && r.family_pass("qq")) ++cov_ok;
    for (const auto& e : r.entries) {
      if (e.identity == "hq" || e.identity == "bm" || e.identity == "hhmm") {
        worst_orth = std::max(worst_orth, e.deviation());
      }
    }
  }
  const int seeds = static_cast<int>(rs.diagnostics.size());
  const double tol_n = 5.0 / std::sqrt(4096.0);
  return {seeds == 10 && orth_ok >= 9 && cov_ok == seeds,
          fmt::format("hq/bm/hhmm pass in {}/{} seeds (need 9), mmqq/qq in {}/{}, "
                      "max orthogonality deviation {:.4f} (tol {:.4f}){}",
                      orth_ok, seeds, cov_ok, seeds, worst_orth, tol_n,
                      failing.empty() ? "" : fmt::format(", failing entries: {}",
                                                         fmt::join(failing, " ")))};
}

Outcome ac5() {
  constexpr Index n = 2000;
  constexpr int draws = 100;
  constexpr double sigma2 = 0.01;
  constexpr double v = 0.5;
  int s1_ok = 0;
  int s2_ok = 0;
  double worst1 = 0.0, worst2 = 0.0;
  // D comes from one realized i.i.d. Gaussian spectrum (M = N/2, zero-padded).
  Rng sv_rng = make_rng(Seed{999}, Stream::singular_values);
  const RVector sv = iid_gaussian_singular_values(n / 2, n, sv_rng);
  RVector d = RVector::Zero(n);
  for (Index i = 0; i < sv.size(); ++i) {
    const double lambda = sv[i] * sv[i];
    d[i] = lambda / (sigma2 + v * lambda);
  }
  for (int k = 0; k < draws; ++k) {
    const Seed seed{1000 + static_cast<std::uint64_t>(k)};
    // a, b and D are drawn independently of V.
    Rng rng = make_rng(seed, Stream::signal);
    const CVector a = complex_normal_vector(rng, n, 1.0);
    const CVector c = complex_normal_vector(rng, n, 1.0);
    const CVector b = (a + c) / std::sqrt(2.0);
    const UnitaryMatrix haar = sample_haar_unitary(n, seed);
    const auto stats = trace_law_statistics(haar, a, b, d);
    const Complex c_n = b.dot(a) / static_cast<double>(n);
    const double dev1 = std::abs(stats.s1);
    const double dev2 = std::abs(stats.s2 - c_n * d.mean());
    worst1 = std::max(worst1, dev1);
    worst2 = std::max(worst2, dev2);
    if (dev1 < 0.1) ++s1_ok;
    if (dev2 < 0.1) ++s2_ok;
  }
  return {s1_ok >= 95 && s2_ok >= 95,
          fmt::format("s1 within 0.1 in {}/{} draws, s2 in {}/{} (need 95); max devs {:.4f}, "
                      "{:.4f}",
                      s1_ok, draws, s2_ok, draws, worst1, worst2)};
}

Outcome ac6() {
  const auto prior = PriorSpec::bernoulli_gaussian(fixtures::kMmseOracleRho);
  double worst = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& p : fixtures::kMmseOracle) {
    worst = std::max(worst, std::abs(mmse(prior, p.v) - p.mmse) / p.mmse);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-3 && secs < 1.0,
          fmt::format("max relative error {:.3g} over {} points (limit 1e-3), quadrature {:.3f} s",
                      worst, fixtures::kMmseOracle.size(), secs)};
}

Outcome ac7() {
  const auto prior = PriorSpec::bernoulli_gaussian(0.1);
  const auto spectrum = SpectralDensity::point_mass(2.0, 0.5);
  constexpr double sigma2 = 0.01;
  const auto tables = predict_error_covariance(prior, spectrum, sigma2, 10, {1'000'000, 1, 16});
  double worst_z = 0.0;
  for (int t = 0; t <= 10; ++t) {
    const double diff = std::abs(tables.zeta(t, t).real() - tables.se.mse_ba[t]);
    const double se = tables.zeta_se(t, t);
    worst_z = std::max(worst_z, se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY));
  }
  double worst_alg = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double v = tables.se.mse_ba[t];
    const Complex g = cross_gamma(spectrum, sigma2, v, v, v);
    worst_alg = std::max(worst_alg, std::abs(g - v - phi_a_to_b(spectrum, sigma2, v)));
  }
  return {worst_z <= 3.0 && worst_alg < 1e-9,
          fmt::format("max |zeta_tt - mse_BA| / SE = {:.3f} (limit 3), "
                      "max |gamma_tt - zeta_tt - phi_AB| = {:.2g} (limit 1e-9)",
                      worst_z, worst_alg)};
}

Outcome ac8() {
  ExperimentConfig c;
  c.mode = Mode::sweep;
  c.prior = PriorSpec::bernoulli_gaussian(0.1);
  c.sigma2 = 1e-6;
  SweepSpec s;
  for (int i = 0; i <= 20; ++i) s.values.push_back(0.1 + 0.025 * i);
  c.sweep = s;
  const auto first = sweep_threshold(c);
  const auto second = sweep_threshold(c);
  bool same = first.rows.size() == second.rows.size() && first.threshold == second.threshold;
  for (std::size_t i = 0; same && i < first.rows.size(); ++i) {
    same = first.rows[i].fp_count == second.rows[i].fp_count &&
           first.rows[i].attractor_mse == second.rows[i].attractor_mse;
  }
  if (!first.threshold) return {false, "no trailing run of unique fixed points"};
  const double star = *first.threshold;
  bool above = true;
  int below_count = 0;
  for (const auto& r : first.rows) {
    if (r.axis_value >= star) above = above && r.fp_count == 1;
    if (r.axis_value < star) below_count = r.fp_count;
  }
  return {first.crossover && below_count > 1 && above && same,
          fmt::format("delta* = {:.3f}, count just below = {}, all unique above = {}, "
                      "deterministic = {}",
                      star, below_count, above, same)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> expect_fail;
  std::vector<std::string> only;
  app.add_option("--expect-fail", expect_fail, "criteria known to fail");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {"AC-1", 30.0, ac1},  {"AC-2", 300.0, ac2}, {"AC-3", 60.0, ac3}, {"AC-4", 300.0, ac4},
      {"AC-5", 120.0, ac5}, {"AC-6", 0.0, ac6},   {"AC-7", 0.0, ac7},  {"AC-8", 0.0, ac8},
  };
  const std::set<std::string> known(expect_fail.begin(), expect_fail.end());

  int unexpected = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string detail = out.detail;
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      out.pass = false;
      detail += fmt::format("; over the {:.0f} s budget", c.budget_s);
    }
    const bool expected = known.count(c.id) > 0;
    fmt::print("{} {} {} ({:.1f} s){}\n", c.id, out.pass ? "PASS" : "FAIL", detail, secs,
               !out.pass && expected ? " [known failure]" : "");
    std::fflush(stdout);
    if (!out.pass && !expected) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
