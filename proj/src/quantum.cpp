#include "contmeas/quantum.hpp"

#include <cmath>
#include <sstream>

namespace contmeas {

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimensions " << a << " and " << b << " differ";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

}  // namespace

DensityOperator DensityOperator::checked(Matrix m) {
  require_square(m, "DensityOperator");
  auto spec = hermitian_eig(m);
  clip_spectrum(spec.eigenvalues);
  const Real tr = m.trace().real();
  if (std::abs(tr - 1) > kTraceTol) {
    std::ostringstream os;
    os << "DensityOperator: trace " << tr << " differs from 1";
    throw Error(ErrorKind::DomainError, os.str());
  }
  return DensityOperator((m + m.adjoint()) / 2.0);
}

DensityOperator DensityOperator::normalized(const Matrix& m) {
  require_square(m, "DensityOperator");
  const Real tr = m.trace().real();
  if (!(tr > 0)) throw Error(ErrorKind::DomainError, "DensityOperator: non-positive trace");
  return checked(m / tr);
}

DensityOperator DensityOperator::pure(const Eigen::Ref<const Eigen::VectorXcd>& psi) {
  const Real n = psi.norm();
  if (!(n > 0)) throw Error(ErrorKind::DomainError, "DensityOperator::pure: zero vector");
  const Eigen::VectorXcd u = psi / n;
  return DensityOperator(u * u.adjoint());
}

DensityOperator DensityOperator::maximally_mixed(Eigen::Index dim) {
  return DensityOperator(Matrix::Identity(dim, dim) / static_cast<Real>(dim));
}

DensityOperator UnnormalizedState::conditional() const {
  const Real w = weight();
  if (!(w > 0)) throw Error(ErrorKind::DomainError, "conditional state of a null branch");
  Matrix m = matrix / w;
  return DensityOperator::trusted((m + m.adjoint()) / 2.0);
}

KrausMap::KrausMap(std::vector<Matrix> ops) : operators(std::move(ops)) {
  if (operators.empty()) throw Error(ErrorKind::ShapeError, "KrausMap: no operators");
  const auto d = operators.front().rows();
  for (const auto& k : operators) {
    require_square(k, "KrausMap");
    require_same_dim(k.rows(), d, "KrausMap");
  }
}

Matrix KrausMap::effect() const {
  Matrix e = Matrix::Zero(dim(), dim());
  for (const auto& k : operators) e.noalias() += k.adjoint() * k;
  return e;
}

Instrument::Instrument(std::vector<std::string> l, std::vector<KrausMap> m)
    : labels(std::move(l)), maps(std::move(m)) {
  if (maps.empty()) throw Error(ErrorKind::ShapeError, "Instrument: no outcomes");
  if (labels.size() != maps.size()) {
    throw Error(ErrorKind::ShapeError, "Instrument: label count differs from map count");
  }
  for (const auto& map : maps) require_same_dim(map.dim(), maps.front().dim(), "Instrument");
}

Real Instrument::completeness_residual() const {
  Matrix total = Matrix::Zero(dim(), dim());
  for (const auto& map : maps) total += map.effect();
  return (total - Matrix::Identity(dim(), dim())).norm();
}

bool Instrument::single_kraus_per_outcome() const {
  for (const auto& map : maps) {
    if (map.operators.size() != 1) return false;
  }
  return true;
}

ClassicalDistribution::ClassicalDistribution(std::vector<Real> weights)
    : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error(ErrorKind::DomainError, "empty distribution");
  Real total = 0;
  for (Real w : weights_) {
    if (!(w >= 0)) throw Error(ErrorKind::DomainError, "negative probability");
    total += w;
  }
  if (std::abs(total - 1) > kProbabilityTol) {
    std::ostringstream os;
    os << "probabilities sum to " << total;
    throw Error(ErrorKind::DomainError, os.str());
  }
}

Real entropy_of_spectrum(const RealVector& eigenvalues) {
  const RealVector lambda = clip_spectrum(eigenvalues);
  const Real total = lambda.sum();
  if (!(total > 0)) return 0;
  Real s = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) s -= xlogx(lambda[i] / total);
  return s;
}

Real von_neumann_entropy(const DensityOperator& tau) {
  return entropy_of_spectrum(hermitian_eig(tau.matrix()).eigenvalues);
}

ExtendedReal relative_entropy_psd(const Matrix& a, const Matrix& b) {
  require_square(a, "relative_entropy");
  require_same_dim(a.rows(), b.rows(), "relative_entropy");
  auto ea = hermitian_eig(a);
  auto eb = hermitian_eig(b);
  ea.eigenvalues = clip_spectrum(ea.eigenvalues);
  eb.eigenvalues = clip_spectrum(eb.eigenvalues);

  const Real a_max = ea.eigenvalues.maxCoeff();
  if (!(a_max > 0)) return 0;
  const Real b_max = eb.eigenvalues.maxCoeff();

  Real a_log_a = 0;
  for (Eigen::Index i = 0; i < ea.dim(); ++i) a_log_a += xlogx(ea.eigenvalues[i]);

  // mass of a along each eigenvector of b
  const Matrix overlap = eb.eigenvectors.adjoint() * ea.eigenvectors;
  const RealVector mass = overlap.cwiseAbs2() * ea.eigenvalues;

  Real a_log_b = 0;
  for (Eigen::Index j = 0; j < eb.dim(); ++j) {
    const Real mu = eb.eigenvalues[j];
    if (b_max > 0 && mu > kSupportTol * b_max) {
      a_log_b += mass[j] * std::log(mu);
    } else if (mass[j] > kSupportTol * a_max) {
      return ExtendedReal::infinity();
    }
  }
  return a_log_a - a_log_b;
}

ExtendedReal quantum_relative_entropy(const DensityOperator& sigma, const DensityOperator& tau) {
  return relative_entropy_psd(sigma.matrix(), tau.matrix());
}

ExtendedReal classical_relative_entropy(const ClassicalDistribution& p,
                                        const ClassicalDistribution& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::DimensionMismatch, "classical_relative_entropy: length mismatch");
  }
  Real s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0) continue;
    if (q[i] == 0) return ExtendedReal::infinity();
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

HybridRelativeEntropy hybrid_relative_entropy(std::span<const UnnormalizedState> first,
                                              std::span<const UnnormalizedState> second) {
  if (first.size() != second.size()) {
    throw Error(ErrorKind::DimensionMismatch, "hybrid_relative_entropy: index sets differ");
  }
  ExtendedReal direct = 0;
  ExtendedReal classical = 0;
  ExtendedReal quantum = 0;
  for (std::size_t k = 0; k < first.size(); ++k) {
    require_same_dim(first[k].dim(), second[k].dim(), "hybrid_relative_entropy");
    direct = direct + relative_entropy_psd(first[k].matrix, second[k].matrix);

    const Real q1 = first[k].weight();
    const Real q2 = second[k].weight();
    if (!(q1 > 0)) continue;
    if (!(q2 > 0)) {
      classical = ExtendedReal::infinity();
      continue;
    }
    classical = classical + ExtendedReal(q1 * std::log(q1 / q2));
    quantum = quantum + q1 * quantum_relative_entropy(first[k].conditional(),
                                                      second[k].conditional());
  }
  return {direct, classical + quantum};
}

UnnormalizedState apply_kraus(const KrausMap& map, const UnnormalizedState& sigma) {
  require_same_dim(map.dim(), sigma.dim(), "apply_kraus");
  Matrix out = Matrix::Zero(sigma.dim(), sigma.dim());
  for (const auto& k : map.operators) out.noalias() += k * sigma.matrix * k.adjoint();
  return UnnormalizedState((out + out.adjoint()) / 2.0);
}

UnnormalizedState a_priori_step(const Instrument& inst, const UnnormalizedState& sigma) {
  require_same_dim(inst.dim(), sigma.dim(), "a_priori_step");
  Matrix out = Matrix::Zero(sigma.dim(), sigma.dim());
  for (const auto& map : inst.maps) out += apply_kraus(map, sigma).matrix;
  return UnnormalizedState(std::move(out));
}

DensityOperator average_state(std::span<const EnsembleMember> ensemble) {
  if (ensemble.empty()) throw Error(ErrorKind::DomainError, "empty ensemble");
  const auto d = ensemble.front().state.dim();
  Matrix avg = Matrix::Zero(d, d);
  for (const auto& m : ensemble) {
    require_same_dim(m.state.dim(), d, "ensemble");
    avg += m.probability * m.state.matrix();
  }
  return DensityOperator::trusted((avg + avg.adjoint()) / 2.0);
}

ExtendedReal chi_quantity(std::span<const EnsembleMember> ensemble) {
  const DensityOperator avg = average_state(ensemble);
  ExtendedReal chi = 0;
  for (const auto& m : ensemble) {
    chi = chi + m.probability * quantum_relative_entropy(m.state, avg);
  }
  return chi;
}

Real chi_quantity_entropic(std::span<const EnsembleMember> ensemble) {
  Real mean = 0;
  for (const auto& m : ensemble) mean += m.probability * von_neumann_entropy(m.state);
  return von_neumann_entropy(average_state(ensemble)) - mean;
}

}  // namespace contmeas
