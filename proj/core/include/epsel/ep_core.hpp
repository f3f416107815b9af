#pragma once

#include <optional>
#include <vector>

#include "epsel/ensembles.hpp"
#include "epsel/priors.hpp"
#include "epsel/types.hpp"

namespace epsel {

/// gamma(v) from 1/gamma = int delta lambda / (sigma2 + v lambda) d rho(lambda).
///
/// For an empirical spectrum of M eigenvalues this is (1/N) sum_i lambda_i /
/// (sigma2 + v lambda_i) = N^-1 Tr(W A). Zero eigenvalues contribute nothing
/// even when sigma2 = 0. Always gamma >= v / delta.
double gamma_coeff(const SpectralDensity& spectrum, double sigma2, double v);

struct LmmseOutput {
  CVector x_ab;
  double v_ab = 0.0;
  double gamma = 0.0;
};

/// Module A: x_AB = x_BA + gamma W (y - A x_BA), v_AB = gamma - v_BA, with
/// W = A^H (sigma2 I + v_BA A A^H)^-1 applied as a diagonal solve in SVD
/// coordinates and gamma taken from the realized spectrum.
LmmseOutput lmmse_step(const MeasurementModel& model, const CVector& y, const CVector& x_ba,
                       double v_ba);

/// Same as lmmse_step with the observation already rotated, y_svd = U^H y.
LmmseOutput lmmse_step_svd(const MeasurementModel& model, const CVector& y_svd,
                           const CVector& x_ba, double v_ba);

struct EpOptions {
  /// Lower bound applied to v_AB and v_BA.
  double v_floor = 1e-12;
  /// Stop when |mse_t - mse_{t-1}| < early_stop_tol * mse_t; 0 disables.
  double early_stop_tol = 1e-8;
  /// Convex damping of the module-B message; 0 (off) reproduces the undamped algorithm.
  double damping = 0.0;
  /// Keep every x_AB message in EpTrajectory::x_ab.
  bool keep_messages = false;
};

struct EpIteration {
  int t = 0;
  double v_ba = 0.0;   // variance fed into module A at iteration t
  double v_ab = 0.0;
  double gamma = 0.0;
  double mse = 0.0;     // N^-1 |x - posterior_mean(x_AB)|^2, NaN without x_true
  double mse_ab = 0.0;  // N^-1 |x - x_AB|^2, NaN without x_true
};

struct EpTrajectory {
  std::vector<EpIteration> iterations;
  CVector estimate;  // posterior mean at the last iteration
  std::vector<CVector> x_ab;  // filled when EpOptions::keep_messages is set
  bool early_stopped = false;
};

/// Alternates module A and module B for up to T iterations from x_BA = 0,
/// v_BA = 1. Throws NumericalFailure (with the iteration index) when a
/// message stops being finite.
EpTrajectory run_ep(const MeasurementModel& model, const PriorSpec& prior, const CVector& y,
                    const std::optional<CVector>& x_true, int iterations,
                    const EpOptions& opts = {});

}  // namespace epsel
