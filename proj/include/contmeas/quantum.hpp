#pragma once

// States, entropies, Kraus maps and instruments.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contmeas/numerics.hpp"

namespace contmeas {

/// Real number extended with a distinguished +infinity. Relative entropies
/// are +inf exactly when a support condition fails; the flag keeps that case
/// apart from any finite magnitude.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(Real v) : value_(v) {}  // NOLINT(google-explicit-constructor)

  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }

  /// Finite value; +inf maps to std::numeric_limits<Real>::infinity().
  constexpr Real value() const {
    return infinite_ ? std::numeric_limits<Real>::infinity() : value_;
  }

  friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return ExtendedReal(a.value_ + b.value_);
  }
  /// Non-negative weight times value; 0 * inf = 0 (null branches carry no mass).
  friend constexpr ExtendedReal operator*(Real w, ExtendedReal a) {
    if (w == Real(0)) return ExtendedReal(0);
    if (a.infinite_) return infinity();
    return ExtendedReal(w * a.value_);
  }

 private:
  Real value_ = 0;
  bool infinite_ = false;
};

inline constexpr Real kSupportTol = 1e-12;
inline constexpr Real kTraceTol = 1e-10;
inline constexpr Real kCompletenessTol = 1e-10;
inline constexpr Real kProbabilityTol = 1e-12;

/// Unit-trace positive semidefinite matrix.
class DensityOperator {
 public:
  /// Validates the invariants; small negative eigenvalues are clipped first.
  static DensityOperator checked(Matrix m);
  /// Divides by the trace, then validates.
  static DensityOperator normalized(const Matrix& m);
  /// Wraps a matrix whose invariants the caller already guarantees.
  static DensityOperator trusted(Matrix m) { return DensityOperator(std::move(m)); }

  static DensityOperator pure(const Eigen::Ref<const Eigen::VectorXcd>& psi);
  static DensityOperator maximally_mixed(Eigen::Index dim);

  const Matrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  explicit DensityOperator(Matrix m) : m_(std::move(m)) {}
  Matrix m_;
};

/// Positive semidefinite matrix whose trace is a probability mass.
struct UnnormalizedState {
  Matrix matrix;

  UnnormalizedState() = default;
  explicit UnnormalizedState(Matrix m) : matrix(std::move(m)) {}
  UnnormalizedState(Real w, const DensityOperator& rho) : matrix(w * rho.matrix()) {}

  Real weight() const { return matrix.trace().real(); }
  Eigen::Index dim() const { return matrix.rows(); }
  /// The conditional state; requires weight() > 0.
  DensityOperator conditional() const;
};

struct KrausMap {
  std::vector<Matrix> operators;

  KrausMap() = default;
  explicit KrausMap(std::vector<Matrix> ops);

  Eigen::Index dim() const { return operators.front().rows(); }
  /// sum_j K_j^* K_j
  Matrix effect() const;
};

/// Finite family of Kraus maps indexed by outcome labels.
struct Instrument {
  std::vector<std::string> labels;
  std::vector<KrausMap> maps;

  Instrument() = default;
  Instrument(std::vector<std::string> labels, std::vector<KrausMap> maps);

  std::size_t outcomes() const { return maps.size(); }
  Eigen::Index dim() const { return maps.front().dim(); }

  /// ||sum_{v,j} K_{v,j}^* K_{v,j} - I||_F
  Real completeness_residual() const;
  bool single_kraus_per_outcome() const;
};

/// Probability vector; validated on construction.
class ClassicalDistribution {
 public:
  explicit ClassicalDistribution(std::vector<Real> weights);

  std::span<const Real> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  Real operator[](std::size_t i) const { return weights_[i]; }

 private:
  std::vector<Real> weights_;
};

Real von_neumann_entropy(const DensityOperator& tau);
/// Entropy of a (clipped) eigenvalue list normalized by its sum.
Real entropy_of_spectrum(const RealVector& eigenvalues);

/// Tr{a (log a - log b)} for PSD a, b of any trace. +inf when a has mass
/// outside the support of b.
ExtendedReal relative_entropy_psd(const Matrix& a, const Matrix& b);

ExtendedReal quantum_relative_entropy(const DensityOperator& sigma, const DensityOperator& tau);
ExtendedReal classical_relative_entropy(const ClassicalDistribution& p,
                                        const ClassicalDistribution& q);

struct HybridRelativeEntropy {
  ExtendedReal direct;      // sum over atoms of Tr{s1 (log s1 - log s2)}
  ExtendedReal decomposed;  // S_c(q1|q2) + sum q1 S_q(rho1|rho2)
};

/// Relative entropy of two quantum/classical states on a finite index set,
/// computed both atom-wise and through the classical/quantum split.
HybridRelativeEntropy hybrid_relative_entropy(std::span<const UnnormalizedState> first,
                                              std::span<const UnnormalizedState> second);

UnnormalizedState apply_kraus(const KrausMap& map, const UnnormalizedState& sigma);
/// Outcome-averaged evolution: sum over outcomes of apply_kraus.
UnnormalizedState a_priori_step(const Instrument& inst, const UnnormalizedState& sigma);

struct EnsembleMember {
  Real probability;
  DensityOperator state;
};

DensityOperator average_state(std::span<const EnsembleMember> ensemble);
/// sum_y mu(y) S_q(rho(y) | rho_bar)
ExtendedReal chi_quantity(std::span<const EnsembleMember> ensemble);
/// S_q(rho_bar) - sum_y mu(y) S_q(rho(y)); equal to chi_quantity when finite.
Real chi_quantity_entropic(std::span<const EnsembleMember> ensemble);

}  // namespace contmeas
