#include "epsel/state_evolution.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "epsel/ep_core.hpp"
#include "epsel/error.hpp"
#include "epsel/parallel.hpp"
#include "epsel/random.hpp"

namespace epsel {

namespace {

void check_iterations(int iterations) {
  if (iterations < 1) {
    throw Error(Errc::invalid_parameter, fmt::format("T = {} must be >= 1", iterations));
  }
}

double se_map(const PriorSpec& prior, const SpectralDensity& spectrum, double sigma2, double v) {
  const double v_ab = std::max(phi_a_to_b(spectrum, sigma2, v), kExtrinsicVarianceMin);
  return phi_b_to_a(prior, v_ab);
}

FixedPoint make_point(const PriorSpec& prior, const SpectralDensity& spectrum, double sigma2,
                      double v_ba) {
  FixedPoint p;
  p.v_ba = v_ba;
  p.v_ab = std::max(phi_a_to_b(spectrum, sigma2, v_ba), kExtrinsicVarianceMin);
  p.mse = mmse(prior, p.v_ab);
  return p;
}

}  // namespace

double phi_a_to_b(const SpectralDensity& spectrum, double sigma2, double v) {
  return gamma_coeff(spectrum, sigma2, v) - v;
}

double phi_b_to_a(const PriorSpec& prior, double v) { return extrinsic_variance(prior, v); }

SeTrajectory se_recursion(const PriorSpec& prior, const SpectralDensity& spectrum, double sigma2,
                          int iterations) {
  check_iterations(iterations);
  prior.validate();
  SeTrajectory se;
  const auto n = static_cast<std::size_t>(iterations);
  se.mse_ba.reserve(n + 1);
  se.mse_ab.reserve(n);
  se.predicted_mse.reserve(n);
  se.gamma.reserve(n);

  double v = 1.0;
  se.mse_ba.push_back(v);
  for (int t = 0; t < iterations; ++t) {
    const double g = gamma_coeff(spectrum, sigma2, v);
    const double v_ab = std::max(g - v, kExtrinsicVarianceMin);
    se.gamma.push_back(g);
    se.mse_ab.push_back(v_ab);
    se.predicted_mse.push_back(mmse(prior, v_ab));
    v = phi_b_to_a(prior, v_ab);
    se.mse_ba.push_back(v);
  }
  return se;
}

FixedPointReport se_fixed_points(const PriorSpec& prior, const SpectralDensity& spectrum,
                                 double sigma2, const FixedPointGrid& grid) {
  if (!(grid.v_min > 0.0) || !(grid.v_max > grid.v_min) || grid.points < 2) {
    throw Error(Errc::invalid_parameter,
                fmt::format("fixed-point grid [{}, {}] with {} points is invalid", grid.v_min,
                            grid.v_max, grid.points));
  }
  prior.validate();
  const auto f = [&](double v) { return se_map(prior, spectrum, sigma2, v) - v; };

  FixedPointReport report;
  const double log_lo = std::log(grid.v_min);
  const double step = (std::log(grid.v_max) - log_lo) / (grid.points - 1);
  double v_prev = grid.v_min;
  double f_prev = f(v_prev);
  if (f_prev == 0.0) report.points.push_back(make_point(prior, spectrum, sigma2, v_prev));

  for (int i = 1; i < grid.points; ++i) {
    const double v_cur = i + 1 == grid.points ? grid.v_max : std::exp(log_lo + step * i);
    const double f_cur = f(v_cur);
    if (f_cur == 0.0) {
      report.points.push_back(make_point(prior, spectrum, sigma2, v_cur));
    } else if (f_prev != 0.0 && (f_prev < 0.0) != (f_cur < 0.0)) {
      double lo = v_prev;
      double hi = v_cur;
      double f_lo = f_prev;
      double f_hi = f_cur;
      for (int k = 0; k < 200 && hi - lo > 1e-12 * std::min(1.0, hi); ++k) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if (f_mid == 0.0) {
          lo = hi = mid;
          f_lo = f_hi = 0.0;
          break;
        }
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
          lo = mid;
          f_lo = f_mid;
        } else {
          hi = mid;
          f_hi = f_mid;
        }
      }
      const double root = std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
      report.points.push_back(make_point(prior, spectrum, sigma2, root));
    }
    v_prev = v_cur;
    f_prev = f_cur;
  }

  constexpr int kMaxIterations = 100'000;
  double v = 1.0;
  int it = 0;
  while (it < kMaxIterations) {
    const double next = se_map(prior, spectrum, sigma2, v);
    ++it;
    const bool done = std::abs(next - v) <= 1e-13 * std::max(v, next);
    v = next;
    if (done) {
      report.converged = true;
      break;
    }
  }
  report.attractor = make_point(prior, spectrum, sigma2, v);
  report.iterations_to_converge = it;

  if (report.points.empty()) {
    report.grid_exhausted = true;
    report.points.push_back(report.attractor);
    report.note = fmt::format(
        "no sign change on [{}, {}]; reporting the limit of the recursion from v = 1", grid.v_min,
        grid.v_max);
  }
  report.unique = report.points.size() == 1;
  return report;
}

Complex cross_gamma(const SpectralDensity& spectrum, double sigma2, double v_t, double v_tp,
                    Complex zeta) {
  if (spectrum.empty()) throw Error(Errc::empty_spectrum, "cross gamma of an empty spectrum");
  const double g_t = gamma_coeff(spectrum, sigma2, v_t);
  const double g_tp = gamma_coeff(spectrum, sigma2, v_tp);
  double noise_part = 0.0;
  double signal_part = 0.0;
  for (double lambda : spectrum.eigenvalues()) {
    if (lambda <= 0.0) continue;
    const double denom = (sigma2 + v_t * lambda) * (sigma2 + v_tp * lambda);
    noise_part += lambda / denom;
    signal_part += lambda * lambda / denom;
  }
  const double scale =
      g_t * g_tp * spectrum.delta() / static_cast<double>(spectrum.eigenvalues().size());
  return scale * (sigma2 * noise_part + zeta * signal_part);
}

CovarianceTables predict_error_covariance(const PriorSpec& prior, const SpectralDensity& spectrum,
                                          double sigma2, int iterations, const McOptions& mc) {
  check_iterations(iterations);
  if (mc.samples < 100'000) {
    throw Error(Errc::invalid_parameter,
                fmt::format("{} Monte Carlo samples; at least 100000 are required", mc.samples));
  }
  if (mc.chunks < 1) throw Error(Errc::invalid_parameter, "chunk count must be >= 1");

  const int T = iterations;
  CovarianceTables tables;
  tables.iterations = T;
  tables.se = se_recursion(prior, spectrum, sigma2, T);
  const auto& v_ba = tables.se.mse_ba;

  std::vector<ExtrinsicDenoiser> eta;
  eta.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) eta.emplace_back(prior, tables.se.mse_ab[static_cast<std::size_t>(t)]);

  // Per-chunk state: signal, standard Gaussian innovations, q history.
  struct Chunk {
    CVector x;
    CMatrix g;  // samples x T
    CMatrix q;  // samples x (T + 1)
    std::vector<Complex> sum;
    std::vector<double> sum_sq;
  };
  const auto n_chunks = static_cast<std::size_t>(mc.chunks);
  std::vector<Chunk> chunks(n_chunks);
  const Seed seed{mc.seed};

  parallel_for(n_chunks, [&](std::size_t c) {
    const Index begin = mc.samples * static_cast<Index>(c) / mc.chunks;
    const Index end = mc.samples * static_cast<Index>(c + 1) / mc.chunks;
    const Index count = end - begin;
    Rng rng = make_rng(seed, Stream::monte_carlo, c);
    Chunk& ch = chunks[c];
    ch.x = sample_signal(prior, count, rng);
    ch.g.resize(count, T);
    ComplexNormal normal(1.0);
    for (Index s = 0; s < count; ++s) {
      for (int t = 0; t < T; ++t) ch.g(s, t) = normal(rng);
    }
    ch.q.resize(count, T + 1);
    ch.q.col(0) = ch.x;
  });

  CMatrix& zeta = tables.zeta;
  zeta = CMatrix::Zero(T + 1, T + 1);
  RMatrix& zeta_se = tables.zeta_se;
  zeta_se = RMatrix::Zero(T + 1, T + 1);
  const auto total = static_cast<double>(mc.samples);

  // Row t of zeta from q_t against q_0, ..., q_t, reduced in chunk order.
  const auto reduce_row = [&](int t) {
    parallel_for(n_chunks, [&](std::size_t c) {
      Chunk& ch = chunks[c];
      ch.sum.assign(static_cast<std::size_t>(t + 1), Complex{});
      ch.sum_sq.assign(static_cast<std::size_t>(t + 1), 0.0);
      for (Index s = 0; s < ch.q.rows(); ++s) {
        const Complex qt = ch.q(s, t);
        for (int j = 0; j <= t; ++j) {
          const Complex z = std::conj(ch.q(s, j)) * qt;
          ch.sum[static_cast<std::size_t>(j)] += z;
          ch.sum_sq[static_cast<std::size_t>(j)] += std::norm(z);
        }
      }
    });
    for (int j = 0; j <= t; ++j) {
      Complex sum{};
      double sum_sq = 0.0;
      for (const Chunk& ch : chunks) {
        sum += ch.sum[static_cast<std::size_t>(j)];
        sum_sq += ch.sum_sq[static_cast<std::size_t>(j)];
      }
      const Complex mean = sum / total;
      const double var = std::max(0.0, (sum_sq - total * std::norm(mean)) / (total - 1.0));
      zeta(t, j) = mean;
      zeta(j, t) = std::conj(mean);
      zeta_se(t, j) = zeta_se(j, t) = std::sqrt(var / total);
    }
  };

  reduce_row(0);

  tables.gamma2 = CMatrix::Zero(T, T);
  tables.m_cov = CMatrix::Zero(T, T);
  CMatrix chol = CMatrix::Zero(T, T);
  constexpr double kJitter = 1e-12;

  for (int t = 0; t < T; ++t) {
    const auto vt = v_ba[static_cast<std::size_t>(t)];
    for (int s = 0; s <= t; ++s) {
      const Complex g2 = cross_gamma(spectrum, sigma2, vt, v_ba[static_cast<std::size_t>(s)], zeta(t, s));
      tables.gamma2(t, s) = g2;
      tables.gamma2(s, t) = std::conj(g2);
      tables.m_cov(t, s) = g2 - zeta(t, s);
      tables.m_cov(s, t) = std::conj(tables.m_cov(t, s));
    }

    // Extend the Cholesky factor by row t.
    for (int s = 0; s < t; ++s) {
      Complex acc = tables.m_cov(t, s);
      for (int k = 0; k < s; ++k) acc -= chol(t, k) * std::conj(chol(s, k));
      chol(t, s) = chol(s, s).real() > 0.0 ? acc / chol(s, s).real() : Complex{};
    }
    const double diag = tables.m_cov(t, t).real() + kJitter;
    double pivot = diag;
    for (int k = 0; k < t; ++k) pivot -= std::norm(chol(t, k));
    if (pivot < -1e-9 * std::max(1.0, diag)) {
      throw Error(Errc::covariance_construction,
                  fmt::format("error covariance is not positive semidefinite at iteration {} "
                              "(pivot {})",
                              t, pivot));
    }
    chol(t, t) = std::sqrt(std::max(pivot, 0.0));

    const ExtrinsicDenoiser& eta_t = eta[static_cast<std::size_t>(t)];
    const CVector row = chol.row(t).head(t + 1).transpose();
    parallel_for(n_chunks, [&](std::size_t c) {
      Chunk& ch = chunks[c];
      for (Index s = 0; s < ch.q.rows(); ++s) {
        Complex h{};
        for (int k = 0; k <= t; ++k) h += row[k] * ch.g(s, k);
        const Complex x = ch.x[s];
        ch.q(s, t + 1) = x - eta_t(x - h);
      }
    });
    reduce_row(t + 1);
  }

  tables.nu = tables.m_cov.diagonal().real();
  return tables;
}

}  // namespace epsel
