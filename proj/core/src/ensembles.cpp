#include "epsel/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "epsel/error.hpp"

namespace epsel {

namespace {

struct Reflector {
  double beta_abs;
  Complex phase;  // R_kk / |R_kk|
};

// Overwrites `x` with the unit vector u of H = I - 2 u u^H such that
// H x = R_kk e_0, and returns R_kk in polar form.
Reflector make_reflector(Eigen::Ref<CVector> x) {
  const double xnorm = x.norm();
  const Complex alpha = x[0];
  const double alpha_abs = std::abs(alpha);
  const Complex e = alpha_abs > 0.0 ? alpha / alpha_abs : Complex{1.0, 0.0};
  // R_kk = -e * |x|; the sign keeps x[0] - R_kk free of cancellation.
  x[0] += e * xnorm;
  const double vnorm = x.norm();
  if (vnorm > 0.0) {
    x /= vnorm;
  } else {
    x.setZero();
  }
  return {xnorm, -e};
}

void reflect(const Eigen::Ref<const CVector>& u, Eigen::Ref<CVector> z) {
  const Complex c = u.dot(z);  // u^H z
  z.noalias() -= (2.0 * c) * u;
}

}  // namespace

UnitaryMatrix UnitaryMatrix::identity(Index n) {
  if (n < 1) throw Error(Errc::invalid_dimension, "unitary dimension must be >= 1");
  UnitaryMatrix q;
  q.n_ = n;
  q.data_ = CMatrix::Identity(n, n);
  return q;
}

UnitaryMatrix UnitaryMatrix::from_dense(CMatrix q, double tol) {
  if (q.rows() != q.cols() || q.rows() < 1) {
    throw Error(Errc::invalid_dimension, "unitary matrix must be square and non-empty");
  }
  const Index n = q.rows();
  const double dev = (q.adjoint() * q - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (dev > tol) {
    throw Error(Errc::invalid_parameter,
                fmt::format("matrix is not unitary (max |Q^H Q - I| = {:.3e})", dev));
  }
  UnitaryMatrix out;
  out.n_ = n;
  out.data_ = std::move(q);
  return out;
}

UnitaryMatrix UnitaryMatrix::from_qr(const CMatrix& gaussian) {
  if (gaussian.rows() != gaussian.cols() || gaussian.rows() < 1) {
    throw Error(Errc::invalid_dimension, "QR input must be square and non-empty");
  }
  const Index n = gaussian.rows();
  UnitaryMatrix q;
  q.n_ = n;
  q.factored_ = true;
  q.data_ = gaussian;
  q.phase_.resize(n);
  for (Index k = 0; k < n; ++k) {
    const Index len = n - k;
    auto col = q.data_.col(k).tail(len);
    const Reflector r = make_reflector(col);
    if (r.beta_abs == 0.0) throw Error(Errc::invalid_parameter, "QR input is singular");
    q.phase_[k] = r.phase;
    for (Index j = k + 1; j < n; ++j) {
      reflect(q.data_.col(k).tail(len), q.data_.col(j).tail(len));
    }
  }
  // Entries above the diagonal held R; the factored form only reads the
  // lower trapezoid, but clear them so the storage is well defined.
  q.data_.triangularView<Eigen::StrictlyUpper>().setZero();
  return q;
}

UnitaryMatrix sample_haar_unitary(Index n, Seed seed) {
  Rng rng = make_rng(seed, Stream::haar);
  return sample_haar_unitary(n, rng);
}

UnitaryMatrix sample_haar_unitary(Index n, Rng& rng) {
  if (n < 1) throw Error(Errc::invalid_dimension, "unitary dimension must be >= 1");
  ComplexNormal draw(1.0);

  UnitaryMatrix q;
  q.n_ = n;
  q.factored_ = true;
  q.data_ = CMatrix::Zero(n, n);
  q.phase_.resize(n);
  for (Index k = 0; k < n; ++k) {
    const Index len = n - k;
    auto col = q.data_.col(k).tail(len);
    for (Index i = 0; i < len; ++i) col[i] = draw(rng);
    q.phase_[k] = make_reflector(col).phase;
  }
  return q;
}

CVector UnitaryMatrix::apply(const CVector& x) const {
  if (x.size() != n_) {
    throw Error(Errc::dimension_mismatch,
                fmt::format("unitary of size {} applied to vector of size {}", n_, x.size()));
  }
  if (!factored_) return data_ * x;
  CVector z = phase_.cwiseProduct(x);
  for (Index k = n_ - 1; k >= 0; --k) {
    const Index len = n_ - k;
    reflect(data_.col(k).tail(len), z.tail(len));
  }
  return z;
}

CVector UnitaryMatrix::apply_adjoint(const CVector& x) const {
  if (x.size() != n_) {
    throw Error(Errc::dimension_mismatch,
                fmt::format("unitary of size {} applied to vector of size {}", n_, x.size()));
  }
  if (!factored_) return data_.adjoint() * x;
  CVector z = x;
  for (Index k = 0; k < n_; ++k) {
    const Index len = n_ - k;
    reflect(data_.col(k).tail(len), z.tail(len));
  }
  return phase_.conjugate().cwiseProduct(z);
}

CMatrix UnitaryMatrix::dense() const {
  if (!factored_) return data_;
  CMatrix z = phase_.asDiagonal();
  for (Index k = n_ - 1; k >= 0; --k) {
    const Index len = n_ - k;
    const auto u = data_.col(k).tail(len);
    auto rows = z.bottomRows(len);
    const Eigen::RowVectorXcd c = u.adjoint() * rows;
    rows.noalias() -= 2.0 * u * c;
  }
  return z;
}

std::string_view to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::iid_gaussian: return "iid_gaussian";
    case EnsembleKind::row_orthogonal: return "row_orthogonal";
    case EnsembleKind::custom_spectrum: return "custom_spectrum";
  }
  return "unknown";
}

EnsembleKind ensemble_kind_from_string(std::string_view name) {
  if (name == "iid_gaussian") return EnsembleKind::iid_gaussian;
  if (name == "row_orthogonal") return EnsembleKind::row_orthogonal;
  if (name == "custom_spectrum") return EnsembleKind::custom_spectrum;
  throw Error(Errc::invalid_parameter, fmt::format("unknown ensemble '{}'", name));
}

// --- SpectralDensity --------------------------------------------------------

SpectralDensity::SpectralDensity(Kind kind, std::vector<double> eigenvalues, double delta)
    : kind_(kind), eigenvalues_(std::move(eigenvalues)), delta_(delta) {
  if (!(delta_ > 0.0 && delta_ <= 1.0)) {
    throw Error(Errc::invalid_parameter, fmt::format("delta = {} outside (0, 1]", delta_));
  }
  for (double lambda : eigenvalues_) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
      throw Error(Errc::invalid_parameter,
                  fmt::format("eigenvalue {} is negative or not finite", lambda));
    }
  }
}

SpectralDensity SpectralDensity::point_mass(double lambda0, double delta) {
  return SpectralDensity(Kind::point_mass, {lambda0}, delta);
}

SpectralDensity SpectralDensity::empirical(std::vector<double> eigenvalues, double delta) {
  return SpectralDensity(Kind::empirical, std::move(eigenvalues), delta);
}

SpectralDensity SpectralDensity::sampled_reference(const EnsembleSpec& ensemble, Index reference_n,
                                                   double delta, Seed seed) {
  if (reference_n < 1) throw Error(Errc::invalid_dimension, "reference dimension must be >= 1");
  const auto m = std::max<Index>(1, std::llround(delta * static_cast<double>(reference_n)));
  if (m > reference_n) throw Error(Errc::unsupported_shape, "reference M exceeds N");
  RVector sv;
  if (ensemble.kind == EnsembleKind::iid_gaussian) {
    Rng rng = make_rng(seed, Stream::reference_spectrum);
    sv = iid_gaussian_singular_values(m, reference_n, rng);
  } else if (ensemble.kind == EnsembleKind::row_orthogonal) {
    sv = RVector::Constant(m, std::sqrt(static_cast<double>(reference_n) / static_cast<double>(m)));
  } else {
    throw Error(Errc::invalid_parameter,
                "custom spectra have no reference ensemble; use empirical()");
  }
  std::vector<double> eig(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) eig[static_cast<std::size_t>(i)] = sv[i] * sv[i];
  return SpectralDensity(Kind::sampled_reference, std::move(eig),
                         static_cast<double>(m) / static_cast<double>(reference_n));
}

double SpectralDensity::moment(int k) const {
  if (empty()) throw Error(Errc::empty_spectrum, "moment of an empty spectrum");
  return integrate([k](double lambda) { return std::pow(lambda, k); });
}

// --- MeasurementModel -------------------------------------------------------

CVector MeasurementModel::apply(const CVector& x) const {
  if (x.size() != n) throw Error(Errc::dimension_mismatch, "A x: x has the wrong length");
  const CVector z = v.apply_adjoint(x);
  return u.apply(sv.cast<Complex>().cwiseProduct(z.head(m)));
}

CVector MeasurementModel::apply_adjoint(const CVector& y) const {
  if (y.size() != m) throw Error(Errc::dimension_mismatch, "A^H y: y has the wrong length");
  const CVector t = u.apply_adjoint(y);
  CVector z = CVector::Zero(n);
  z.head(m) = sv.cast<Complex>().cwiseProduct(t);
  return v.apply(z);
}

CMatrix MeasurementModel::dense() const {
  CMatrix sigma = CMatrix::Zero(m, n);
  for (Index i = 0; i < m; ++i) sigma(i, i) = sv[i];
  return u.dense() * sigma * v.dense().adjoint();
}

namespace {

RVector normalize_energy(RVector sv, Index n) {
  const double energy = sv.squaredNorm();
  if (!(energy > 0.0)) throw Error(Errc::invalid_parameter, "singular values are all zero");
  sv *= std::sqrt(static_cast<double>(n) / energy);
  return sv;
}

}  // namespace

RVector iid_gaussian_singular_values(Index m, Index n, Rng& rng) {
  const CMatrix g = [&] {
    ComplexNormal draw(1.0 / static_cast<double>(m));
    CMatrix out(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) out(i, j) = draw(rng);
    return out;
  }();
  CMatrix gram(m, m);
  gram.setZero();
  gram.selfadjointView<Eigen::Lower>().rankUpdate(g);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  RVector sv = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().reverse();
  return normalize_energy(std::move(sv), n);
}

MeasurementModel build_measurement(const EnsembleSpec& ensemble, Index m, Index n, double sigma2,
                                   Seed seed) {
  if (m < 1 || n < 1) throw Error(Errc::invalid_dimension, "M and N must be >= 1");
  if (m > n) {
    throw Error(Errc::unsupported_shape, fmt::format("M = {} exceeds N = {}", m, n));
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw Error(Errc::invalid_parameter, fmt::format("sigma2 = {} must be positive", sigma2));
  }

  MeasurementModel model;
  model.m = m;
  model.n = n;
  model.sigma2 = sigma2;

  switch (ensemble.kind) {
    case EnsembleKind::iid_gaussian: {
      Rng rng = make_rng(seed, Stream::singular_values);
      model.sv = iid_gaussian_singular_values(m, n, rng);
      break;
    }
    case EnsembleKind::row_orthogonal:
      model.sv = RVector::Constant(m, std::sqrt(static_cast<double>(n) / static_cast<double>(m)));
      break;
    case EnsembleKind::custom_spectrum: {
      if (static_cast<Index>(ensemble.singular_values.size()) != m) {
        throw Error(Errc::dimension_mismatch,
                    fmt::format("custom spectrum has {} singular values, expected M = {}",
                                ensemble.singular_values.size(), m));
      }
      RVector sv = Eigen::Map<const RVector>(ensemble.singular_values.data(), m);
      if (!sv.allFinite() || (sv.array() < 0.0).any()) {
        throw Error(Errc::invalid_parameter, "custom singular values must be finite and >= 0");
      }
      model.sv = normalize_energy(std::move(sv), n);
      break;
    }
  }

  Rng rng_u = make_rng(seed, Stream::left_unitary);
  Rng rng_v = make_rng(seed, Stream::right_unitary);
  model.u = sample_haar_unitary(m, rng_u);
  model.v = sample_haar_unitary(n, rng_v);
  return model;
}

SpectralDensity spectrum_of(const MeasurementModel& model) {
  std::vector<double> eig(static_cast<std::size_t>(model.m));
  for (Index i = 0; i < model.m; ++i) eig[static_cast<std::size_t>(i)] = model.sv[i] * model.sv[i];
  return SpectralDensity::empirical(std::move(eig), model.delta());
}

SpectralDensity limiting_spectrum(const EnsembleSpec& ensemble, double delta, Index reference_n,
                                  Seed seed) {
  switch (ensemble.kind) {
    case EnsembleKind::row_orthogonal:
      return SpectralDensity::point_mass(1.0 / delta, delta);
    case EnsembleKind::iid_gaussian:
      return SpectralDensity::sampled_reference(ensemble, reference_n, delta, seed);
    case EnsembleKind::custom_spectrum: {
      const auto& sv = ensemble.singular_values;
      if (sv.empty()) throw Error(Errc::empty_spectrum, "custom spectrum is empty");
      double energy = 0.0;
      for (double s : sv) energy += s * s;
      if (!(energy > 0.0)) throw Error(Errc::invalid_parameter, "singular values are all zero");
      // Mean eigenvalue 1/delta, matching sum(sv^2) = N.
      const double scale = static_cast<double>(sv.size()) / (delta * energy);
      std::vector<double> eig;
      eig.reserve(sv.size());
      for (double s : sv) eig.push_back(s * s * scale);
      return SpectralDensity::empirical(std::move(eig), delta);
    }
  }
  throw Error(Errc::invalid_parameter, "unknown ensemble");
}

TraceLawStatistics trace_law_statistics(const UnitaryMatrix& v, const CVector& a,
                                        const CVector& b, const CMatrix& d) {
  const Index n = v.size();
  if (a.size() != n || b.size() != n || d.rows() != n || d.cols() != n) {
    throw Error(Errc::dimension_mismatch, "trace law: V, a, b and D must share dimension N");
  }
  const CVector va = v.apply(a);
  const CVector vb = v.apply(b);
  const double inv_n = 1.0 / static_cast<double>(n);
  return {b.dot(va) * inv_n, vb.dot(d * va) * inv_n};
}

TraceLawStatistics trace_law_statistics(const UnitaryMatrix& v, const CVector& a,
                                        const CVector& b, const RVector& d_diag) {
  const Index n = v.size();
  if (a.size() != n || b.size() != n || d_diag.size() != n) {
    throw Error(Errc::dimension_mismatch, "trace law: V, a, b and D must share dimension N");
  }
  const CVector va = v.apply(a);
  const CVector vb = v.apply(b);
  const double inv_n = 1.0 / static_cast<double>(n);
  return {b.dot(va) * inv_n, vb.dot(d_diag.cast<Complex>().cwiseProduct(va)) * inv_n};
}

}  // namespace epsel
