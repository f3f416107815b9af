#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "epsel/ensembles.hpp"
#include "epsel/priors.hpp"
#include "epsel/state_evolution.hpp"
#include "epsel/types.hpp"

namespace epsel {

/// Instrumented error recursion. Columns are iterations; every Gram table
/// follows gram(t, s) = N^-1 x_s^H x_t.
struct ErrorTrace {
  Index n = 0;
  Index m = 0;
  int iterations = 0;
  std::optional<std::uint64_t> seed;

  CMatrix q;  // N x (T+1), q_0 = x
  CMatrix b;  // N x (T+1), b_t = V^H q_t
  CMatrix m_err;  // N x T
  CMatrix h;  // N x T, h_t = V m_t = x - x_AB^t

  CMatrix q_gram;  // (T+1) x (T+1)
  CMatrix b_gram;  // (T+1) x (T+1)
  CMatrix m_gram;  // T x T
  CMatrix h_gram;  // T x T
  CMatrix hq;      // T x (T+1), hq(t, s) = N^-1 h_t^H q_s
  CMatrix bm;      // T x (T+1), bm(t, s) = N^-1 b_s^H m_t

  /// mu_t = N^-1 |q_t^perp|^2 against span(q_0, ..., q_{t-1}).
  RVector mu;
  double min_q_eigenvalue = 0.0;  // smallest eigenvalue of the q Gram table
  bool rank_deficient = false;

  std::vector<double> v_ba;
  std::vector<double> v_ab;
  std::vector<double> gamma;
  std::vector<double> mse;     // N^-1 |x - posterior_mean(x_AB^t)|^2
  std::vector<double> mse_ab;  // N^-1 |h_t|^2
};

/// Runs the error recursion in SVD coordinates:
///   b_t = V^H q_t,  m_t = b_t - gamma_t W_t ((Sigma, O) b_t + U^H w),
///   h_t = V m_t,    q_{t+1} = x - eta_t(x - h_t),
/// with the same variance schedule as run_ep.
ErrorTrace instrumented_run(const MeasurementModel& model, const PriorSpec& prior,
                            const CVector& x_true, const CVector& w_noise, int iterations);

struct IdentityEntry {
  std::string identity;  // hq, bm, mmqq, hhmm or qq
  std::vector<int> indices;
  Complex measured;
  Complex predicted;
  double tol = 0.0;
  std::string policy;
  bool pass = false;

  [[nodiscard]] double deviation() const { return std::abs(measured - predicted); }
};

struct IdentityReport {
  Index n = 0;
  double tol_n = 0.0;  // tol_scale * N^-1/2
  std::vector<IdentityEntry> entries;
  bool pass = false;

  /// True when every entry of `identity` passes (vacuously true if absent).
  [[nodiscard]] bool family_pass(std::string_view identity) const;
  [[nodiscard]] std::size_t count(std::string_view identity) const;
};

void to_json(nlohmann::json& j, const IdentityEntry& e);
void to_json(nlohmann::json& j, const IdentityReport& r);

struct ReportTolerances {
  double tol_scale = 5.0;
  double rel_tol = 0.05;
};

/// Compares the measured Gram data with the asymptotic predictions.
///
/// hq, bm and hhmm are held to tol_scale / sqrt(N); mmqq and qq to
/// max(tol_scale / sqrt(N), rel_tol |prediction|). The covariance rows (mmqq,
/// hhmm) are emitted from T = 2 on.
IdentityReport orthogonality_report(const ErrorTrace& trace, const CovarianceTables& predictions,
                                    const ReportTolerances& tol = {});

struct Lemma1Result {
  Complex c1;             // E[conj(z) eta(x + z)]
  double c1_se = 0.0;
  Complex c2_minus_mmse;  // E[conj(z) posterior_mean(x + z)] - MMSE(v)
  double c2_se = 0.0;
  Index samples = 0;
};

/// Monte Carlo estimate of the two Stein-type identities behind the
/// extrinsic denoiser, with z ~ CN(0, v) independent of x ~ prior.
Lemma1Result lemma1_check(const PriorSpec& prior, double v, Index samples, std::uint64_t seed);

}  // namespace epsel
