#include "epsel/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "epsel/ep_core.hpp"
#include "epsel/error.hpp"
#include "epsel/parallel.hpp"
#include "epsel/random.hpp"

namespace epsel {

namespace {

constexpr double kVarianceFloor = 1e-12;
constexpr double kRankThreshold = 1e-8;

// gram(t, s) = N^-1 x_s^H x_t
CMatrix gram(const CMatrix& x) {
  return (x.adjoint() * x).transpose() / static_cast<double>(x.rows());
}

// cross(t, s) = N^-1 y_s^H x_t
CMatrix cross(const CMatrix& x, const CMatrix& y) {
  return (y.adjoint() * x).transpose() / static_cast<double>(x.rows());
}

RVector residual_norms(const CMatrix& q) {
  // Modified Gram-Schmidt against the earlier columns, skipping directions
  // that are already numerically spanned.
  const Index cols = q.cols();
  const double inv_n = 1.0 / static_cast<double>(q.rows());
  std::vector<CVector> basis;
  RVector mu(cols);
  for (Index t = 0; t < cols; ++t) {
    CVector r = q.col(t);
    for (int pass = 0; pass < 2; ++pass) {
      for (const CVector& e : basis) r -= e.dot(r) * e;
    }
    const double norm2 = r.squaredNorm();
    mu[t] = norm2 * inv_n;
    if (mu[t] > kRankThreshold * std::max(1.0, q.col(t).squaredNorm() * inv_n)) {
      basis.push_back(r / std::sqrt(norm2));
    }
  }
  return mu;
}

IdentityEntry make_entry(std::string identity, std::vector<int> indices, Complex measured,
                         Complex predicted, double tol, std::string policy) {
  IdentityEntry e;
  e.identity = std::move(identity);
  e.indices = std::move(indices);
  e.measured = measured;
  e.predicted = predicted;
  e.tol = tol;
  e.policy = std::move(policy);
  e.pass = e.deviation() < tol;
  return e;
}

}  // namespace

ErrorTrace instrumented_run(const MeasurementModel& model, const PriorSpec& prior,
                            const CVector& x_true, const CVector& w_noise, int iterations) {
  if (iterations < 1) throw Error(Errc::invalid_parameter, "iteration count must be >= 1");
  if (x_true.size() != model.n || w_noise.size() != model.m) {
    throw Error(Errc::dimension_mismatch,
                fmt::format("x has length {} and w length {}; the model is {} x {}",
                            x_true.size(), w_noise.size(), model.m, model.n));
  }
  prior.validate();

  const Index n = model.n;
  const int T = iterations;
  ErrorTrace tr;
  tr.n = n;
  tr.m = model.m;
  tr.iterations = T;
  tr.q.resize(n, T + 1);
  tr.b.resize(n, T + 1);
  tr.m_err.resize(n, T);
  tr.h.resize(n, T);

  const CVector w_tilde = model.u.apply_adjoint(w_noise);
  const double inv_n = 1.0 / static_cast<double>(n);
  tr.q.col(0) = x_true;
  double v_ba = 1.0;

  for (int t = 0; t < T; ++t) {
    tr.b.col(t) = model.v.apply_adjoint(tr.q.col(t));
    double inv_gamma = 0.0;
    for (Index i = 0; i < model.m; ++i) {
      const double lambda = model.sv[i] * model.sv[i];
      if (lambda > 0.0) inv_gamma += lambda / (model.sigma2 + v_ba * lambda);
    }
    const double gamma = static_cast<double>(n) / inv_gamma;

    auto m_t = tr.m_err.col(t);
    m_t = tr.b.col(t);
    for (Index i = 0; i < model.m; ++i) {
      const double s = model.sv[i];
      const Complex r = s * tr.b(i, t) + w_tilde[i];
      m_t[i] -= gamma * s * r / (model.sigma2 + v_ba * s * s);
    }
    tr.h.col(t) = model.v.apply(m_t);

    const double v_ab_raw = gamma - v_ba;
    if (!(v_ab_raw > 0.0) || !tr.h.col(t).allFinite()) {
      throw NumericalFailure(t, fmt::format("error recursion broke down (v_AB = {})", v_ab_raw));
    }
    const double v_ab = std::max(v_ab_raw, kVarianceFloor);
    const ExtrinsicDenoiser eta(prior, v_ab);

    double sq_err = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Complex x = x_true[i];
      const Complex r = x - tr.h(i, t);
      sq_err += std::norm(x - eta.posterior_mean(r));
      tr.q(i, t + 1) = x - eta(r);
    }
    if (!tr.q.col(t + 1).allFinite()) {
      throw NumericalFailure(t, "module B produced a non-finite message");
    }

    tr.v_ba.push_back(v_ba);
    tr.v_ab.push_back(v_ab);
    tr.gamma.push_back(gamma);
    tr.mse.push_back(sq_err * inv_n);
    tr.mse_ab.push_back(tr.h.col(t).squaredNorm() * inv_n);
    v_ba = std::max(eta.output_variance(), kVarianceFloor);
  }
  tr.b.col(T) = model.v.apply_adjoint(tr.q.col(T));

  tr.q_gram = gram(tr.q);
  tr.b_gram = gram(tr.b);
  tr.m_gram = gram(tr.m_err);
  tr.h_gram = gram(tr.h);
  tr.hq = cross(tr.h, tr.q);
  tr.bm = cross(tr.m_err, tr.b);
  tr.mu = residual_norms(tr.q);

  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(tr.q_gram, Eigen::EigenvaluesOnly);
  tr.min_q_eigenvalue = eig.eigenvalues().minCoeff();
  tr.rank_deficient = tr.min_q_eigenvalue < kRankThreshold;
  if (tr.rank_deficient) {
    spdlog::warn("q Gram matrix is nearly singular (min eigenvalue {:.3g}); mu values past the "
                 "first dependent iterate are zero",
                 tr.min_q_eigenvalue);
  }
  return tr;
}

bool IdentityReport::family_pass(std::string_view identity) const {
  return std::all_of(entries.begin(), entries.end(),
                     [&](const IdentityEntry& e) { return e.identity != identity || e.pass; });
}

std::size_t IdentityReport::count(std::string_view identity) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(),
                    [&](const IdentityEntry& e) { return e.identity == identity; }));
}

void to_json(nlohmann::json& j, const IdentityEntry& e) {
  j = nlohmann::json{{"identity", e.identity},
                     {"indices", e.indices},
                     {"measured", {e.measured.real(), e.measured.imag()}},
                     {"predicted", {e.predicted.real(), e.predicted.imag()}},
                     {"tol", e.tol},
                     {"policy", e.policy},
                     {"pass", e.pass}};
}

void to_json(nlohmann::json& j, const IdentityReport& r) {
  j = nlohmann::json{{"n", r.n}, {"tol_n", r.tol_n}, {"pass", r.pass}, {"entries", r.entries}};
}

IdentityReport orthogonality_report(const ErrorTrace& trace, const CovarianceTables& predictions,
                                    const ReportTolerances& tol) {
  const int T = trace.iterations;
  if (predictions.iterations != T || predictions.zeta.rows() != T + 1 ||
      trace.q_gram.rows() != T + 1) {
    throw Error(Errc::dimension_mismatch,
                fmt::format("trace covers T = {} but predictions cover T = {}", T,
                            predictions.iterations));
  }

  IdentityReport report;
  report.n = trace.n;
  report.tol_n = tol.tol_scale / std::sqrt(static_cast<double>(trace.n));
  const double tn = report.tol_n;
  const std::string abs_policy = fmt::format("abs {:.3g}/sqrt(N)", tol.tol_scale);
  const std::string mixed_policy =
      fmt::format("max(abs {:.3g}/sqrt(N), rel {:.3g})", tol.tol_scale, tol.rel_tol);
  const auto mixed = [&](Complex pred) { return std::max(tn, tol.rel_tol * std::abs(pred)); };

  for (int t = 0; t < T; ++t) {
    for (int s = 0; s <= t + 1; ++s) {
      report.entries.push_back(make_entry("hq", {t, s}, trace.hq(t, s), 0.0, tn, abs_policy));
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s <= t; ++s) {
      report.entries.push_back(make_entry("bm", {t, s}, trace.bm(t, s), 0.0, tn, abs_policy));
    }
  }
  if (T >= 2) {
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s <= t; ++s) {
        const Complex pred = predictions.m_cov(t, s);
        report.entries.push_back(
            make_entry("mmqq", {t, s}, trace.m_gram(t, s), pred, mixed(pred), mixed_policy));
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s <= t; ++s) {
        report.entries.push_back(make_entry("hhmm", {t, s}, trace.h_gram(t, s),
                                            trace.m_gram(t, s), tn, abs_policy));
      }
    }
  }
  for (int t = 0; t <= T; ++t) {
    for (int s = 0; s <= t; ++s) {
      const Complex pred = predictions.zeta(t, s);
      report.entries.push_back(
          make_entry("qq", {t, s}, trace.q_gram(t, s), pred, mixed(pred), mixed_policy));
    }
  }

  report.pass = std::all_of(report.entries.begin(), report.entries.end(),
                            [](const IdentityEntry& e) { return e.pass; });
  return report;
}

Lemma1Result lemma1_check(const PriorSpec& prior, double v, Index samples, std::uint64_t seed) {
  if (samples < 10'000) {
    throw Error(Errc::invalid_parameter,
                fmt::format("{} samples; at least 10000 are required", samples));
  }
  prior.validate();
  const ExtrinsicDenoiser eta(prior, v);  // validates v

  constexpr std::size_t kChunks = 16;
  struct Partial {
    Complex s1, s2;
    double sq1 = 0.0, sq2 = 0.0;
  };
  std::vector<Partial> partial(kChunks);
  parallel_for(kChunks, [&](std::size_t c) {
    const Index begin = samples * static_cast<Index>(c) / static_cast<Index>(kChunks);
    const Index end = samples * static_cast<Index>(c + 1) / static_cast<Index>(kChunks);
    Rng rng = make_rng(Seed{seed}, Stream::monte_carlo, c);
    const CVector x = sample_signal(prior, end - begin, rng);
    ComplexNormal noise(v);
    Partial& p = partial[c];
    for (Index i = 0; i < x.size(); ++i) {
      const Complex z = noise(rng);
      const Complex r = x[i] + z;
      const Complex a = std::conj(z) * eta(r);
      const Complex b = std::conj(z) * eta.posterior_mean(r);
      p.s1 += a;
      p.s2 += b;
      p.sq1 += std::norm(a);
      p.sq2 += std::norm(b);
    }
  });

  Partial total;
  for (const Partial& p : partial) {
    total.s1 += p.s1;
    total.s2 += p.s2;
    total.sq1 += p.sq1;
    total.sq2 += p.sq2;
  }
  const auto s = static_cast<double>(samples);
  const auto std_error = [&](Complex sum, double sum_sq) {
    const double var = std::max(0.0, (sum_sq - std::norm(sum) / s) / (s - 1.0));
    return std::sqrt(var / s);
  };

  Lemma1Result out;
  out.samples = samples;
  out.c1 = total.s1 / s;
  out.c1_se = std_error(total.s1, total.sq1);
  out.c2_minus_mmse = total.s2 / s - eta.mmse();
  out.c2_se = std_error(total.s2, total.sq2);
  return out;
}

}  // namespace epsel
