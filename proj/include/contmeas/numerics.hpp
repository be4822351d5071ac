#pragma once

// Dense Hermitian kernels: eigendecomposition, spectral calculus, clipping of
// rounding-level negative eigenvalues.

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <type_traits>

#include <Eigen/Dense>

#include "contmeas/errors.hpp"

namespace contmeas {

using Real = double;
using Complex = std::complex<Real>;
using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

inline constexpr Real kHermitianTol = 1e-10;
inline constexpr Real kClipTol = 1e-12;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RealOf = typename Eigen::NumTraits<Scalar>::Real;

template <typename Scalar>
struct Spectrum {
  Eigen::Matrix<RealOf<Scalar>, Eigen::Dynamic, 1> eigenvalues;  // ascending
  MatrixX<Scalar> eigenvectors;                                  // columns

  Eigen::Index dim() const { return eigenvalues.size(); }

  MatrixX<Scalar> reconstruct() const {
    return eigenvectors * eigenvalues.template cast<Scalar>().asDiagonal() *
           eigenvectors.adjoint();
  }
};

template <typename Derived>
RealOf<typename Derived::Scalar> hermiticity_residual(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.adjoint()).norm();
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues come out ascending;
/// each eigenvector is rotated so that its largest-magnitude component is real
/// and positive, which makes the decomposition reproducible.
template <typename Derived>
Spectrum<typename Derived::Scalar> hermitian_eig(const Eigen::MatrixBase<Derived>& m,
                                                 RealOf<typename Derived::Scalar> tol = kHermitianTol) {
  using Scalar = typename Derived::Scalar;
  using R = RealOf<Scalar>;
  require_square(m, "hermitian_eig");
  const R scale = std::max<R>(R(1), m.norm());
  const R residual = hermiticity_residual(m);
  if (!(residual <= tol * scale)) {
    std::ostringstream os;
    os << "||M - M*||_F = " << residual << " exceeds " << tol * scale;
    throw Error(ErrorKind::NonHermitianInput, os.str());
  }
  const MatrixX<Scalar> sym = (m + m.adjoint()) / R(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::DomainError, "hermitian_eig: eigensolver did not converge");
  }
  Spectrum<Scalar> out{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < out.eigenvectors.cols(); ++c) {
    Eigen::Index arg = 0;
    out.eigenvectors.col(c).cwiseAbs().maxCoeff(&arg);
    const Scalar pivot = out.eigenvectors(arg, c);
    if (std::abs(pivot) > R(0)) {
      if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
        out.eigenvectors.col(c) *= std::conj(pivot) / std::abs(pivot);
      } else {
        out.eigenvectors.col(c) *= pivot < R(0) ? R(-1) : R(1);
      }
    }
  }
  return out;
}

/// Maps eigenvalues in (-floor_tol * lambda_max, 0] to zero, where lambda_max
/// is the largest eigenvalue magnitude. Anything more negative is a genuine
/// PSD violation.
template <typename Vec>
Vec clip_spectrum(Vec eigenvalues, typename Vec::Scalar floor_tol = kClipTol) {
  using R = typename Vec::Scalar;
  if (floor_tol < R(0)) {
    throw Error(ErrorKind::InvalidParameters, "clip_spectrum: floor_tol must be >= 0");
  }
  if (eigenvalues.size() == 0) return eigenvalues;
  const R lambda_max = eigenvalues.cwiseAbs().maxCoeff();
  const R floor = floor_tol * lambda_max;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    R& l = eigenvalues[i];
    if (l < -floor) {
      std::ostringstream os;
      os << "eigenvalue " << l << " below -" << floor;
      throw Error(ErrorKind::NotPositiveSemidefinite, os.str());
    }
    if (l < R(0)) l = R(0);
  }
  return eigenvalues;
}

enum class SpectrumPolicy { Raw, ClipPsd };

/// V diag(f(lambda)) V*.
template <typename Derived, typename F>
MatrixX<typename Derived::Scalar> spectral_apply(const Eigen::MatrixBase<Derived>& m, F&& f,
                                                 SpectrumPolicy policy = SpectrumPolicy::Raw) {
  using Scalar = typename Derived::Scalar;
  auto spec = hermitian_eig(m);
  if (policy == SpectrumPolicy::ClipPsd) spec.eigenvalues = clip_spectrum(spec.eigenvalues);
  for (Eigen::Index i = 0; i < spec.dim(); ++i) {
    const auto fx = f(spec.eigenvalues[i]);
    if (!std::isfinite(fx)) {
      std::ostringstream os;
      os << "spectral_apply: f undefined at eigenvalue " << spec.eigenvalues[i];
      throw Error(ErrorKind::DomainError, os.str());
    }
    spec.eigenvalues[i] = fx;
  }
  MatrixX<Scalar> out = spec.reconstruct();
  return (out + out.adjoint()) / RealOf<Scalar>(2);
}

/// x log x with the 0 log 0 = 0 convention.
template <typename R>
R xlogx(R x) {
  return x > R(0) ? x * std::log(x) : R(0);
}

}  // namespace contmeas
