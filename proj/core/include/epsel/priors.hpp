#pragma once

#include "epsel/random.hpp"
#include "epsel/types.hpp"

namespace epsel {

/// Bernoulli-Gaussian signal law: x = 0 with probability 1 - rho_s, otherwise
/// x ~ CN(0, active_var). Unit variance requires rho_s * active_var = 1.
struct PriorSpec {
  double rho_s = 1.0;
  double active_var = 1.0;

  /// Unit-variance prior with the given sparsity rate.
  static PriorSpec bernoulli_gaussian(double rho_s);
  /// rho_s = 1. Closed-form test mode; the signal model asks for non-Gaussian x.
  static PriorSpec gaussian() { return {1.0, 1.0}; }

  [[nodiscard]] bool is_gaussian() const noexcept { return rho_s >= 1.0; }
  /// E|x|^4 = 2 rho_s active_var^2.
  [[nodiscard]] double fourth_moment() const noexcept { return 2.0 * rho_s * active_var * active_var; }

  /// Throws invalid-parameter unless 0 < rho_s <= 1 and rho_s * active_var = 1.
  void validate() const;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

/// Clamp range for the extrinsic variance of module B.
inline constexpr double kExtrinsicVarianceMin = 1e-12;
inline constexpr double kExtrinsicVarianceMax = 1e6;

/// i.i.d. draw of N signal entries, deterministic in `seed`.
CVector sample_signal(const PriorSpec& prior, Index n, Seed seed);
CVector sample_signal(const PriorSpec& prior, Index n, Rng& rng);

/// E[x | x + CN(0, v) = r] for one observation.
Complex posterior_mean(const PriorSpec& prior, Complex r, double v);
/// Elementwise posterior mean.
CVector posterior_mean(const PriorSpec& prior, const CVector& r, double v);

/// Per-coordinate MMSE of estimating x from x + CN(0, v).
///
/// Evaluated by deterministic composite Gauss-Legendre quadrature over the
/// squared radius |r|^2, so repeated calls return identical bits.
double mmse(const PriorSpec& prior, double v);

struct DenoiserOutput {
  CVector mean;     // eta(r)
  double variance;  // extrinsic variance v'
};

/// Extrinsic variance 1/v' = 1/MMSE(v) - 1/v, clamped to
/// [kExtrinsicVarianceMin, kExtrinsicVarianceMax]. Logs a warning when the
/// raw value is non-positive or infinite.
double extrinsic_variance(const PriorSpec& prior, double v);

/// Module-B extrinsic message: v' as above and
/// eta(r) = v' (posterior_mean(r) / MMSE(v) - r / v).
DenoiserOutput extrinsic_denoise(const PriorSpec& prior, const CVector& r, double v);

/// Precomputed scalar form of the extrinsic denoiser at a fixed input variance.
class ExtrinsicDenoiser {
 public:
  ExtrinsicDenoiser(const PriorSpec& prior, double v);

  [[nodiscard]] Complex operator()(Complex r) const;
  [[nodiscard]] Complex posterior_mean(Complex r) const;

  [[nodiscard]] double input_variance() const noexcept { return v_; }
  [[nodiscard]] double mmse() const noexcept { return mmse_; }
  [[nodiscard]] double output_variance() const noexcept { return v_out_; }

 private:
  PriorSpec prior_;
  double v_;
  double mmse_;
  double v_out_;
  double shrink_;
  double logit_offset_;
  double logit_slope_;
};

}  // namespace epsel
