#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epsel/ensembles.hpp"
#include "epsel/priors.hpp"
#include "epsel/types.hpp"

namespace epsel {

/// Module-A variance map v_BA -> v_AB = gamma(v) - v on the limiting spectrum.
double phi_a_to_b(const SpectralDensity& spectrum, double sigma2, double v);

/// Module-B variance map v_AB -> v_BA = (1/MMSE(v) - 1/v)^-1, clamped.
double phi_b_to_a(const PriorSpec& prior, double v);

struct SeTrajectory {
  std::vector<double> mse_ba;         // T + 1 entries, mse_ba[0] = 1
  std::vector<double> mse_ab;         // T entries
  std::vector<double> predicted_mse;  // MMSE(mse_ab[t])
  std::vector<double> gamma;          // gamma(mse_ba[t])

  [[nodiscard]] int iterations() const noexcept { return static_cast<int>(mse_ab.size()); }
};

SeTrajectory se_recursion(const PriorSpec& prior, const SpectralDensity& spectrum, double sigma2,
                          int iterations);

struct FixedPointGrid {
  double v_min = 1e-8;
  double v_max = 10.0;
  int points = 2000;
};

struct FixedPoint {
  double v_ba = 0.0;
  double v_ab = 0.0;
  double mse = 0.0;  // MMSE(v_ab)
};

struct FixedPointReport {
  std::vector<FixedPoint> points;  // ascending in v_ba
  bool unique = false;
  /// Limit of the recursion started from v_BA = 1.
  FixedPoint attractor;
  int iterations_to_converge = 0;
  bool converged = false;
  bool grid_exhausted = false;
  std::string note;
};

/// Roots of F(v) = phi_b_to_a(phi_a_to_b(v)) - v located by sign changes on
/// a log-spaced grid and refined by bisection.
FixedPointReport se_fixed_points(const PriorSpec& prior, const SpectralDensity& spectrum,
                                 double sigma2, const FixedPointGrid& grid = {});

/// gamma_{t,t'} for the pair (v_t, v_t') with cross-correlation zeta.
///
/// With zeta = v_t = v_t' this collapses to gamma(v_t).
Complex cross_gamma(const SpectralDensity& spectrum, double sigma2, double v_t, double v_tp,
                    Complex zeta);

struct McOptions {
  Index samples = 1'000'000;
  std::uint64_t seed = 1;
  /// Fixed chunk count; results do not depend on the number of workers.
  int chunks = 16;
};

struct CovarianceTables {
  int iterations = 0;
  CMatrix zeta;     // (T+1) x (T+1), zeta(t, s) = E[conj(q_s) q_t]
  RMatrix zeta_se;  // Monte Carlo standard errors of zeta
  CMatrix gamma2;   // T x T, gamma_{t,s}
  CMatrix m_cov;    // T x T, gamma_{t,s} - zeta_{t,s}
  RVector nu;       // diagonal of m_cov
  SeTrajectory se;  // the recursion the tables were built on
};

/// Cross-iteration covariances of the error recursion in the large-system limit.
///
/// Propagates a scalar surrogate of the recursion: x ~ prior, a jointly
/// Gaussian sequence h_0, ..., h_{T-1} with covariance m_cov and
/// q_{t+1} = x - eta_t(x - h_t). Row t of m_cov only needs zeta up to
/// index t, so it is assembled one iteration at a time and h_t is drawn
/// from an incremental Cholesky factor. Deterministic in `mc.seed`.
CovarianceTables predict_error_covariance(const PriorSpec& prior, const SpectralDensity& spectrum,
                                          double sigma2, int iterations, const McOptions& mc = {});

}  // namespace epsel
