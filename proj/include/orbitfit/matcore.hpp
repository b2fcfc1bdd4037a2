// Dense complex-matrix kernel used by the orbit flows and the oracle suite.
//
// Everything here is a pure function of its inputs. The routines are
// templated on the real scalar type; the rest of the library instantiates
// them with double and all stated tolerances assume double precision.

#ifndef ORBITFIT_MATCORE_HPP
#define ORBITFIT_MATCORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace orbitfit {

template <typename Real>
using CMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using RVectorT = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;
using CMatrix = CMatrixT<double>;
using RVector = RVectorT<double>;

/// Raised when matrix dimensions do not fit the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input violates a structural precondition
/// (Hermitian, skew-Hermitian, near-unitary, finite, ...).
class StructureError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class SpectrumKind { eigen, singular };

template <typename Real>
struct SpectralDataT {
  RVectorT<Real> values;      // non-increasing
  CMatrixT<Real> vectors;     // columns pair with values
  SpectrumKind kind = SpectrumKind::eigen;
};
using SpectralData = SpectralDataT<double>;

/// M = u * diag(s) * v, with u (rows x rows) and v (cols x cols) unitary.
template <typename Real>
struct SvdT {
  CMatrixT<Real> u;
  SpectralDataT<Real> s;
  CMatrixT<Real> v;
};
using Svd = SvdT<double>;

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols())
    throw ShapeError(std::string(what) + ": matrix must be square, got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw StructureError(std::string(what) + ": non-finite entry");
}

template <typename Real>
Real symmetrization_tolerance(Real scale) {
  return Real(1e-8) * std::max(Real(1), scale);
}

}  // namespace detail

template <typename Derived>
auto frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

/// (X)_s = (X - X*)/2
template <typename Derived>
auto skew_part(const Eigen::MatrixBase<Derived>& m) {
  detail::require_square(m, "skew_part");
  using Scalar = typename Derived::Scalar;
  using Plain = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return Plain((m - m.adjoint()) / typename Derived::RealScalar(2));
}

/// (X + X*)/2
template <typename Derived>
auto herm_part(const Eigen::MatrixBase<Derived>& m) {
  detail::require_square(m, "herm_part");
  using Scalar = typename Derived::Scalar;
  using Plain = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return Plain((m + m.adjoint()) / typename Derived::RealScalar(2));
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
/// Inputs within 1e-8 max(1, ||H||) of Hermitian are symmetrized first.
template <typename Real>
SpectralDataT<Real> herm_eig(const CMatrixT<Real>& h) {
  detail::require_square(h, "herm_eig");
  detail::require_finite(h, "herm_eig");
  const Real asym = (h - h.adjoint()).norm();
  if (asym > detail::symmetrization_tolerance<Real>(h.norm()))
    throw StructureError("herm_eig: matrix is not Hermitian (||H - H*|| = " +
                         std::to_string(static_cast<double>(asym)) + ")");
  const CMatrixT<Real> sym = (h + h.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<CMatrixT<Real>> solver(sym);
  if (solver.info() != Eigen::Success) throw StructureError("herm_eig: solver failed");

  // Eigen returns ascending order; reverse both values and columns.
  SpectralDataT<Real> out;
  out.kind = SpectrumKind::eigen;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

/// Descending eigenvalues only.
template <typename Real>
RVectorT<Real> herm_eigenvalues(const CMatrixT<Real>& h) {
  return herm_eig<Real>(h).values;
}

/// Full SVD in the orbit convention M = U diag(s) V.
template <typename Real>
SvdT<Real> svd(const CMatrixT<Real>& m) {
  detail::require_finite(m, "svd");
  Eigen::JacobiSVD<CMatrixT<Real>> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdT<Real> out;
  out.u = solver.matrixU();
  out.v = solver.matrixV().adjoint();
  out.s.kind = SpectrumKind::singular;
  out.s.values = solver.singularValues();  // already non-increasing
  out.s.vectors = out.u;
  return out;
}

template <typename Real>
RVectorT<Real> singular_values(const CMatrixT<Real>& m) {
  detail::require_finite(m, "singular_values");
  return Eigen::JacobiSVD<CMatrixT<Real>>(m).singularValues();
}

/// exp(Omega) for skew-Hermitian Omega. With i*Omega = V diag(l) V*,
/// exp(Omega) = V diag(exp(-i l)) V*, which is unitary by construction.
template <typename Real>
CMatrixT<Real> expm_skew(const CMatrixT<Real>& omega) {
  detail::require_square(omega, "expm_skew");
  detail::require_finite(omega, "expm_skew");
  const Real defect = (omega + omega.adjoint()).norm();
  if (defect > detail::symmetrization_tolerance<Real>(omega.norm()))
    throw StructureError("expm_skew: matrix is not skew-Hermitian");
  const std::complex<Real> i(0, 1);
  const CMatrixT<Real> h = (i * omega + (i * omega).adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<CMatrixT<Real>> solver(h);
  const auto& v = solver.eigenvectors();
  Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1> phases(v.cols());
  for (Eigen::Index k = 0; k < phases.size(); ++k)
    phases(k) = std::polar(Real(1), -solver.eigenvalues()(k));
  return v * phases.asDiagonal() * v.adjoint();
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of diag(R) moved into Q.
template <typename Real = double, typename Rng>
CMatrixT<Real> haar_unitary(Eigen::Index n, Rng& rng) {
  if (n <= 0) throw ShapeError("haar_unitary: dimension must be positive");
  std::normal_distribution<Real> normal(Real(0), Real(1) / std::sqrt(Real(2)));
  CMatrixT<Real> z(n, n);
  // fill column by column so the draw order is independent of storage order
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) {
      const Real re = normal(rng);
      const Real im = normal(rng);
      z(r, c) = std::complex<Real>(re, im);
    }
  Eigen::HouseholderQR<CMatrixT<Real>> qr(z);
  CMatrixT<Real> q = qr.householderQ();
  const CMatrixT<Real> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Real mag = std::abs(r(k, k));
    const std::complex<Real> phase = mag > Real(0) ? r(k, k) / mag : std::complex<Real>(1);
    q.col(k) *= phase;
  }
  return q;
}

template <typename Real>
Real unitarity_defect(const CMatrixT<Real>& u) {
  return (u.adjoint() * u - CMatrixT<Real>::Identity(u.cols(), u.cols())).norm();
}

/// Polar factor (nearest unitary in Frobenius norm) of a near-unitary matrix.
template <typename Real>
CMatrixT<Real> reunitarize(const CMatrixT<Real>& m) {
  detail::require_square(m, "reunitarize");
  detail::require_finite(m, "reunitarize");
  if (unitarity_defect<Real>(m) > Real(1e-2))
    throw StructureError("reunitarize: matrix is too far from unitary");
  Eigen::JacobiSVD<CMatrixT<Real>> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (solver.singularValues().minCoeff() <= std::numeric_limits<Real>::epsilon())
    throw StructureError("reunitarize: matrix is singular");
  return solver.matrixU() * solver.matrixV().adjoint();
}

/// Sum of the k largest singular values.
template <typename Real>
Real ky_fan_norm(const CMatrixT<Real>& m, Eigen::Index k) {
  const Eigen::Index p = std::min(m.rows(), m.cols());
  if (k < 1 || k > p)
    throw std::out_of_range("ky_fan_norm: k = " + std::to_string(k) + " outside [1, " +
                            std::to_string(p) + "]");
  return singular_values<Real>(m).head(k).sum();
}

}  // namespace orbitfit

#endif  // ORBITFIT_MATCORE_HPP
