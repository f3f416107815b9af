#include "epsel/priors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epsel/error.hpp"
#include "quadrature.hpp"

namespace epsel {

namespace {

void check_variance(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(Errc::invalid_variance, fmt::format("noise variance v = {} must be positive", v));
  }
}

// Logistic function 1 / (1 + exp(-x)) without overflow.
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Posterior activity weight w(|r|^2) = logistic(offset + slope * |r|^2).
struct ActivityLogit {
  double offset;
  double slope;

  ActivityLogit(const PriorSpec& prior, double v) {
    const double c1 = prior.active_var + v;
    offset = std::log(prior.rho_s / (1.0 - prior.rho_s)) + std::log(v / c1);
    slope = 1.0 / v - 1.0 / c1;
  }
};

}  // namespace

PriorSpec PriorSpec::bernoulli_gaussian(double rho_s) {
  PriorSpec p{rho_s, 1.0 / rho_s};
  p.validate();
  return p;
}

void PriorSpec::validate() const {
  if (!(rho_s > 0.0 && rho_s <= 1.0)) {
    throw Error(Errc::invalid_parameter, fmt::format("rho_s = {} outside (0, 1]", rho_s));
  }
  if (!(active_var > 0.0) || !std::isfinite(active_var)) {
    throw Error(Errc::invalid_parameter, fmt::format("active_var = {} must be positive", active_var));
  }
  if (std::abs(rho_s * active_var - 1.0) > 1e-9) {
    throw Error(Errc::invalid_parameter,
                fmt::format("rho_s * active_var = {} but the signal must have unit variance",
                            rho_s * active_var));
  }
}

CVector sample_signal(const PriorSpec& prior, Index n, Seed seed) {
  Rng rng = make_rng(seed, Stream::signal);
  return sample_signal(prior, n, rng);
}

CVector sample_signal(const PriorSpec& prior, Index n, Rng& rng) {
  prior.validate();
  if (n < 1) throw Error(Errc::invalid_dimension, "signal length must be >= 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ComplexNormal active(prior.active_var);
  CVector x(n);
  for (Index i = 0; i < n; ++i) {
    const bool on = prior.is_gaussian() || uniform(rng) < prior.rho_s;
    x[i] = on ? active(rng) : Complex{};
  }
  return x;
}

Complex posterior_mean(const PriorSpec& prior, Complex r, double v) {
  check_variance(v);
  const double shrink = prior.active_var / (prior.active_var + v);
  if (prior.is_gaussian()) return shrink * r;
  const ActivityLogit logit(prior, v);
  const double w = logistic(logit.offset + logit.slope * std::norm(r));
  return (w * shrink) * r;
}

CVector posterior_mean(const PriorSpec& prior, const CVector& r, double v) {
  check_variance(v);
  CVector out(r.size());
  for (Index i = 0; i < r.size(); ++i) out[i] = posterior_mean(prior, r[i], v);
  return out;
}

double mmse(const PriorSpec& prior, double v) {
  check_variance(v);
  const double a = prior.active_var;
  const double c1 = a + v;
  const double s = a * v / c1;  // posterior variance of the active component
  if (prior.is_gaussian()) return s;

  // With u = |r|^2 and w(u) the posterior activity,
  //   MMSE = rho s + rho kappa^2 c1 J,  kappa = a / c1,
  //   J = int_0^inf t e^{-t} (1 - w(c1 t)) dt,
  // and 1 - w(c1 t) = logistic(-(offset + k t)) with k = a / v.
  const ActivityLogit logit(prior, v);
  const double k = a / v;
  const double center = -logit.offset / k;
  const double scale = 1.0 / k;

  double upper = 60.0;
  const double cutoff_end = std::max(center, 0.0) + 40.0 * scale;
  if (cutoff_end < upper) upper = cutoff_end;

  std::vector<double> breaks{0.0, upper};
  for (double t : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    if (t < upper) breaks.push_back(t);
  }
  for (double j : {-32.0, -16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const double t = center + j * scale;
    if (t > 0.0 && t < upper) breaks.push_back(t);
  }

  const double j_integral = detail::integrate_panels(
      [&](double t) { return t * std::exp(-t) * logistic(-(logit.offset + k * t)); },
      std::move(breaks), 2.0);

  const double kappa = a / c1;
  return prior.rho_s * s + prior.rho_s * kappa * kappa * c1 * j_integral;
}

double extrinsic_variance(const PriorSpec& prior, double v) {
  check_variance(v);
  if (prior.is_gaussian()) return 1.0;
  const double m = mmse(prior, v);
  const double precision = 1.0 / m - 1.0 / v;
  if (!(precision > 0.0) || !std::isfinite(precision)) {
    spdlog::warn("extrinsic precision {} at v = {} is not positive; clamping variance to {}",
                 precision, v, kExtrinsicVarianceMax);
    return kExtrinsicVarianceMax;
  }
  return std::clamp(1.0 / precision, kExtrinsicVarianceMin, kExtrinsicVarianceMax);
}

ExtrinsicDenoiser::ExtrinsicDenoiser(const PriorSpec& prior, double v)
    : prior_(prior),
      v_(v),
      mmse_(epsel::mmse(prior, v)),
      v_out_(extrinsic_variance(prior, v)),
      shrink_(prior.active_var / (prior.active_var + v)),
      logit_offset_(0.0),
      logit_slope_(0.0) {
  if (!prior.is_gaussian()) {
    const ActivityLogit logit(prior, v);
    logit_offset_ = logit.offset;
    logit_slope_ = logit.slope;
  }
}

Complex ExtrinsicDenoiser::posterior_mean(Complex r) const {
  if (prior_.is_gaussian()) return shrink_ * r;
  const double w = logistic(logit_offset_ + logit_slope_ * std::norm(r));
  return (w * shrink_) * r;
}

Complex ExtrinsicDenoiser::operator()(Complex r) const {
  // A Gaussian prior's extrinsic message is the prior itself.
  if (prior_.is_gaussian()) return {};
  return v_out_ * (posterior_mean(r) / mmse_ - r / v_);
}

DenoiserOutput extrinsic_denoise(const PriorSpec& prior, const CVector& r, double v) {
  const ExtrinsicDenoiser eta(prior, v);
  DenoiserOutput out{CVector(r.size()), eta.output_variance()};
  for (Index i = 0; i < r.size(); ++i) out.mean[i] = eta(r[i]);
  return out;
}

}  // namespace epsel
