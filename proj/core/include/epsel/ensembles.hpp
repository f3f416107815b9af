#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "epsel/random.hpp"
#include "epsel/types.hpp"

namespace epsel {

/// An n x n unitary matrix.
///
/// Sampled instances are held as the Householder factorization produced by a
/// QR decomposition, Q = H_0 H_1 ... H_{n-1} diag(phase), with the unit
/// reflector vectors packed into the lower trapezoid of an n x n array.
/// Storage is n^2 complex entries and applying Q or Q^H to a vector costs one
/// dense matrix-vector product, so the factored form behaves like dense
/// storage without ever paying the O(n^3) accumulation of the explicit Q.
/// Matrices supplied directly (identity, tests) are stored as-is.
class UnitaryMatrix {
 public:
  UnitaryMatrix() = default;

  static UnitaryMatrix identity(Index n);

  /// Wraps an explicit matrix. Throws if it is not square or not unitary to `tol`.
  static UnitaryMatrix from_dense(CMatrix q, double tol = 1e-10);

  /// QR decomposition of `gaussian` with the R-diagonal phase correction, so
  /// that R has a positive real diagonal and Q is unique.
  static UnitaryMatrix from_qr(const CMatrix& gaussian);

  [[nodiscard]] Index size() const noexcept { return n_; }

  /// U x
  [[nodiscard]] CVector apply(const CVector& x) const;
  /// U^H x
  [[nodiscard]] CVector apply_adjoint(const CVector& x) const;
  /// Explicit n x n matrix. O(n^3) for factored instances.
  [[nodiscard]] CMatrix dense() const;

 private:
  friend UnitaryMatrix sample_haar_unitary(Index n, Rng& rng);

  Index n_ = 0;
  bool factored_ = false;
  CMatrix data_;   // dense entries, or packed unit reflectors when factored_
  CVector phase_;  // R_jj / |R_jj| for factored instances
};

/// Haar-distributed unitary of dimension n, deterministic in `seed`.
///
/// Householder QR of an i.i.d. CN(0,1) matrix with the R-diagonal phase
/// correction. Each reflector leaves the trailing block of the Gaussian
/// matrix i.i.d. CN(0,1) and independent of the reflectors built so far, so
/// the trailing column is drawn fresh at every step instead of being updated.
UnitaryMatrix sample_haar_unitary(Index n, Seed seed);
UnitaryMatrix sample_haar_unitary(Index n, Rng& rng);

enum class EnsembleKind { iid_gaussian, row_orthogonal, custom_spectrum };

std::string_view to_string(EnsembleKind kind);
EnsembleKind ensemble_kind_from_string(std::string_view name);

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::row_orthogonal;
  /// Singular values for custom_spectrum (length M, before normalization).
  std::vector<double> singular_values;

  static EnsembleSpec iid_gaussian() { return {EnsembleKind::iid_gaussian, {}}; }
  static EnsembleSpec row_orthogonal() { return {EnsembleKind::row_orthogonal, {}}; }
  static EnsembleSpec custom(std::vector<double> sv) {
    return {EnsembleKind::custom_spectrum, std::move(sv)};
  }
};

/// Limiting (or empirical) eigenvalue distribution of A A^H together with
/// the compression rate delta = M/N.
///
/// Every kind is represented by a list of equally weighted eigenvalues, so
/// integrals against d rho(lambda) are plain averages.
class SpectralDensity {
 public:
  enum class Kind { point_mass, empirical, sampled_reference };

  static SpectralDensity point_mass(double lambda0, double delta);
  static SpectralDensity empirical(std::vector<double> eigenvalues, double delta);
  /// Normalized spectrum of one draw of `ensemble` at dimension
  /// (round(delta * reference_n), reference_n).
  static SpectralDensity sampled_reference(const EnsembleSpec& ensemble, Index reference_n,
                                           double delta, Seed seed);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double delta() const noexcept { return delta_; }
  [[nodiscard]] const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
  [[nodiscard]] bool empty() const noexcept { return eigenvalues_.empty(); }

  /// Integral of f(lambda) against rho.
  template <class F>
  [[nodiscard]] auto integrate(F&& f) const {
    using R = decltype(f(0.0));
    R sum{};
    for (double lambda : eigenvalues_) sum += f(lambda);
    return sum / static_cast<double>(eigenvalues_.size());
  }

  /// k-th raw moment of the eigenvalue distribution.
  [[nodiscard]] double moment(int k) const;

 private:
  SpectralDensity(Kind kind, std::vector<double> eigenvalues, double delta);

  Kind kind_ = Kind::empirical;
  std::vector<double> eigenvalues_;
  double delta_ = 1.0;
};

/// y = A x + w with A = U (Sigma, O) V^H, held in SVD-factored form.
struct MeasurementModel {
  Index m = 0;
  Index n = 0;
  UnitaryMatrix u;  // M x M
  UnitaryMatrix v;  // N x N
  RVector sv;       // M singular values, sum of squares = N
  double sigma2 = 0.0;

  [[nodiscard]] double delta() const noexcept {
    return static_cast<double>(m) / static_cast<double>(n);
  }

  /// A x
  [[nodiscard]] CVector apply(const CVector& x) const;
  /// A^H y
  [[nodiscard]] CVector apply_adjoint(const CVector& y) const;
  /// Explicit M x N matrix (tests and small instances).
  [[nodiscard]] CMatrix dense() const;
};

/// Draws U, V independently from the Haar measure and singular values from
/// the ensemble, normalized so that sum(sv^2) = N.
MeasurementModel build_measurement(const EnsembleSpec& ensemble, Index m, Index n, double sigma2,
                                   Seed seed);

/// Singular values of an M x N matrix with i.i.d. CN(0, 1/M) entries,
/// normalized so that sum(sv^2) = N.
RVector iid_gaussian_singular_values(Index m, Index n, Rng& rng);

/// Empirical spectrum {sv_i^2} of the realized model with delta = M/N.
SpectralDensity spectrum_of(const MeasurementModel& model);

/// Limiting spectrum the state evolution should use for an ensemble at rate delta.
/// row_orthogonal is a point mass at 1/delta; iid_gaussian is a sampled
/// reference draw; custom_spectrum is the normalized list itself.
SpectralDensity limiting_spectrum(const EnsembleSpec& ensemble, double delta, Index reference_n,
                                  Seed seed);

struct TraceLawStatistics {
  Complex s1;  // N^-1 b^H V a
  Complex s2;  // N^-1 b^H V^H D V a
};

/// Finite-N statistics of the Haar strong law for a Hermitian D.
TraceLawStatistics trace_law_statistics(const UnitaryMatrix& v, const CVector& a,
                                        const CVector& b, const CMatrix& d);

/// Same, for a real diagonal D = diag(d_diag).
TraceLawStatistics trace_law_statistics(const UnitaryMatrix& v, const CVector& a,
                                        const CVector& b, const RVector& d_diag);

}  // namespace epsel
