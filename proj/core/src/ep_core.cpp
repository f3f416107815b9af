#include "epsel/ep_core.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "epsel/error.hpp"

namespace epsel {

namespace {

void check_inputs(double sigma2, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(Errc::invalid_variance, fmt::format("v = {} must be positive", v));
  }
  if (!(sigma2 >= 0.0) || std::isnan(sigma2)) {
    throw Error(Errc::invalid_parameter, fmt::format("sigma2 = {} must be >= 0", sigma2));
  }
}

double realized_gamma(const MeasurementModel& model, double v) {
  double sum = 0.0;
  for (Index i = 0; i < model.m; ++i) {
    const double lambda = model.sv[i] * model.sv[i];
    if (lambda > 0.0) sum += lambda / (model.sigma2 + v * lambda);
  }
  return static_cast<double>(model.n) / sum;
}

}  // namespace

double gamma_coeff(const SpectralDensity& spectrum, double sigma2, double v) {
  if (spectrum.empty()) throw Error(Errc::empty_spectrum, "gamma of an empty spectrum");
  check_inputs(sigma2, v);
  const double inv = spectrum.delta() * spectrum.integrate([&](double lambda) {
    return lambda > 0.0 ? lambda / (sigma2 + v * lambda) : 0.0;
  });
  if (!(inv > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / inv;
}

LmmseOutput lmmse_step(const MeasurementModel& model, const CVector& y, const CVector& x_ba,
                       double v_ba) {
  if (y.size() != model.m) {
    throw Error(Errc::dimension_mismatch,
                fmt::format("y has length {}, expected M = {}", y.size(), model.m));
  }
  return lmmse_step_svd(model, model.u.apply_adjoint(y), x_ba, v_ba);
}

LmmseOutput lmmse_step_svd(const MeasurementModel& model, const CVector& y_svd,
                           const CVector& x_ba, double v_ba) {
  if (y_svd.size() != model.m || x_ba.size() != model.n) {
    throw Error(Errc::dimension_mismatch, "lmmse_step: message dimensions do not match the model");
  }
  check_inputs(model.sigma2, v_ba);

  const CVector b = model.v.apply_adjoint(x_ba);
  CVector d = CVector::Zero(model.n);
  for (Index i = 0; i < model.m; ++i) {
    const double s = model.sv[i];
    d[i] = s * (y_svd[i] - s * b[i]) / (model.sigma2 + v_ba * s * s);
  }

  LmmseOutput out;
  out.gamma = realized_gamma(model, v_ba);
  out.x_ab = x_ba + out.gamma * model.v.apply(d);
  out.v_ab = out.gamma - v_ba;
  return out;
}

EpTrajectory run_ep(const MeasurementModel& model, const PriorSpec& prior, const CVector& y,
                    const std::optional<CVector>& x_true, int iterations, const EpOptions& opts) {
  if (iterations < 1) throw Error(Errc::invalid_parameter, "iteration count must be >= 1");
  if (y.size() != model.m) throw Error(Errc::dimension_mismatch, "y has the wrong length");
  if (x_true && x_true->size() != model.n) {
    throw Error(Errc::dimension_mismatch, "x_true has the wrong length");
  }
  prior.validate();

  const CVector y_svd = model.u.apply_adjoint(y);
  const double inv_n = 1.0 / static_cast<double>(model.n);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  EpTrajectory traj;
  traj.iterations.reserve(static_cast<std::size_t>(iterations));
  CVector x_ba = CVector::Zero(model.n);
  double v_ba = 1.0;

  for (int t = 0; t < iterations; ++t) {
    LmmseOutput a = lmmse_step_svd(model, y_svd, x_ba, v_ba);
    if (!(a.v_ab > 0.0)) {
      throw NumericalFailure(t, fmt::format("v_AB = {} is not positive (gamma = {}, v_BA = {})",
                                            a.v_ab, a.gamma, v_ba));
    }
    if (!a.x_ab.allFinite() || !std::isfinite(a.gamma)) {
      throw NumericalFailure(t, "module A produced a non-finite message");
    }
    const double v_ab = std::max(a.v_ab, opts.v_floor);

    const ExtrinsicDenoiser eta(prior, v_ab);
    CVector estimate(model.n);
    CVector x_next(model.n);
    for (Index i = 0; i < model.n; ++i) {
      estimate[i] = eta.posterior_mean(a.x_ab[i]);
      x_next[i] = eta(a.x_ab[i]);
    }
    double v_next = std::max(eta.output_variance(), opts.v_floor);

    EpIteration rec;
    rec.t = t;
    rec.v_ba = v_ba;
    rec.v_ab = v_ab;
    rec.gamma = a.gamma;
    rec.mse = x_true ? (*x_true - estimate).squaredNorm() * inv_n : nan;
    rec.mse_ab = x_true ? (*x_true - a.x_ab).squaredNorm() * inv_n : nan;
    traj.iterations.push_back(rec);
    traj.estimate = std::move(estimate);
    if (opts.keep_messages) traj.x_ab.push_back(a.x_ab);

    if (!x_next.allFinite() || !std::isfinite(v_next)) {
      throw NumericalFailure(t, "module B produced a non-finite message");
    }

    if (opts.early_stop_tol > 0.0 && t > 0) {
      const auto& prev = traj.iterations[traj.iterations.size() - 2];
      const double cur_val = x_true ? rec.mse : rec.v_ab;
      const double prev_val = x_true ? prev.mse : prev.v_ab;
      if (std::abs(cur_val - prev_val) < opts.early_stop_tol * cur_val) {
        traj.early_stopped = true;
        break;
      }
    }

    if (opts.damping > 0.0) {
      x_next = (1.0 - opts.damping) * x_next + opts.damping * x_ba;
      v_next = (1.0 - opts.damping) * v_next + opts.damping * v_ba;
    }
    x_ba = std::move(x_next);
    v_ba = v_next;
  }
  return traj;
}

}  // namespace epsel
