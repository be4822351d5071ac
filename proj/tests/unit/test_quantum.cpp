#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "contmeas/errors.hpp"
#include "contmeas/model.hpp"
#include "contmeas/quantum.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace contmeas;
using testing_util::diag2;
using testing_util::ket_bra;
using testing_util::random_state;

namespace {

const double kLn2 = std::log(2.0);

DensityOperator dm(const Matrix& m) { return DensityOperator::checked(m); }

Real finite(ExtendedReal x) {
  REQUIRE(x.is_finite());
  return x.value();
}

Instrument projective_qubit() {
  return Instrument({"0", "1"}, {KrausMap({diag2(1, 0)}), KrausMap({diag2(0, 1)})});
}

/// Sum over outcomes of the instrument, as a channel on density matrices.
Matrix channel(const Instrument& inst, const Matrix& rho) {
  return a_priori_step(inst, UnnormalizedState(rho)).matrix;
}

}  // namespace

TEST_CASE("DensityOperator validation") {
  CHECK_NOTHROW(dm(diag2(0.5, 0.5)));
  try {
    dm(diag2(0.5, 0.6));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DomainError);
  }
  try {
    dm(diag2(1.5, -0.5));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositiveSemidefinite);
  }
  Matrix nh(2, 2);
  nh << 0.5, 0.3, 0.0, 0.5;
  try {
    dm(nh);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonHermitianInput);
  }
  CHECK((DensityOperator::normalized(diag2(2, 2)).matrix() - diag2(0.5, 0.5)).norm() < 1e-15);
}

TEST_CASE("ClassicalDistribution validation") {
  CHECK_NOTHROW(ClassicalDistribution({0.25, 0.75}));
  CHECK_THROWS_AS(ClassicalDistribution({0.6, 0.5}), Error);
  CHECK_THROWS_AS(ClassicalDistribution({1.2, -0.2}), Error);
}

TEST_CASE("von Neumann entropy examples") {
  CHECK(von_neumann_entropy(dm(ket_bra(1, 1))) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(von_neumann_entropy(dm(ket_bra(1, 0)))) < 1e-12);
  CHECK(std::abs(von_neumann_entropy(dm(diag2(0.5, 0.5))) - kLn2) < 1e-14);

  const Matrix eta = 0.5 * (ket_bra(1, 0) + ket_bra(1, 1));
  const double expected = oracle::binary_entropy((1 + 1 / std::sqrt(2.0)) / 2);
  CHECK(std::abs(expected - 0.416496) < 1e-4);
  CHECK(std::abs(von_neumann_entropy(dm(eta)) - expected) < 1e-12);
}

TEST_CASE("von Neumann entropy matches the matrix-log oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix rho = random_state(rng, 2 + trial % 4);
    CHECK(std::abs(von_neumann_entropy(dm(rho)) - oracle::entropy_logm(rho)) < 1e-10);
  }
}

TEST_CASE("quantum relative entropy examples") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rho = dm(random_state(rng, 3));
    CHECK(std::abs(finite(quantum_relative_entropy(rho, rho))) < 1e-10);
  }
  CHECK(quantum_relative_entropy(dm(ket_bra(1, 0)), dm(ket_bra(0, 1))).is_infinite());
  CHECK(std::abs(finite(quantum_relative_entropy(dm(ket_bra(1, 0)), dm(diag2(0.5, 0.5)))) - kLn2) <
        1e-12);
  // support containment in the other direction is fine
  CHECK(quantum_relative_entropy(dm(diag2(0.5, 0.5)), dm(ket_bra(1, 0))).is_infinite());
}

TEST_CASE("quantum relative entropy matches the matrix-log oracle") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const Matrix a = random_state(rng, d);
    const Matrix b = random_state(rng, d);
    CHECK(std::abs(finite(quantum_relative_entropy(dm(a), dm(b))) -
                   oracle::relative_entropy_logm(a, b)) < 1e-9);
  }
}

TEST_CASE("classical relative entropy examples") {
  const ClassicalDistribution half({0.5, 0.5});
  CHECK(finite(classical_relative_entropy(half, half)) == 0.0);
  CHECK(std::abs(finite(classical_relative_entropy(ClassicalDistribution({1, 0}), half)) - kLn2) <
        1e-15);
  const double two_term = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  CHECK(std::abs(finite(classical_relative_entropy(ClassicalDistribution({0.75, 0.25}), half)) -
                 two_term) < 1e-15);
  CHECK(classical_relative_entropy(half, ClassicalDistribution({1, 0})).is_infinite());
}

TEST_CASE("hybrid relative entropy examples") {
  std::mt19937_64 rng(24);
  const Matrix r0 = random_state(rng, 2), r1 = random_state(rng, 2);
  const Matrix t0 = random_state(rng, 2), t1 = random_state(rng, 2);

  std::vector<UnnormalizedState> s1{UnnormalizedState(0.3 * r0), UnnormalizedState(0.7 * r1)};
  auto same = hybrid_relative_entropy(s1, s1);
  CHECK(std::abs(finite(same.direct)) < 1e-12);
  CHECK(std::abs(finite(same.decomposed)) < 1e-12);

  std::vector<UnnormalizedState> s2{UnnormalizedState(0.3 * t0), UnnormalizedState(0.7 * t1)};
  const double expected = 0.3 * oracle::relative_entropy_logm(r0, t0) +
                          0.7 * oracle::relative_entropy_logm(r1, t1);
  auto eq_classical = hybrid_relative_entropy(s1, s2);
  CHECK(std::abs(finite(eq_classical.direct) - expected) < 1e-10);
  CHECK(std::abs(finite(eq_classical.decomposed) - expected) < 1e-10);

  std::vector<UnnormalizedState> q1{UnnormalizedState(0.75 * r0), UnnormalizedState(0.25 * r1)};
  std::vector<UnnormalizedState> q2{UnnormalizedState(0.5 * r0), UnnormalizedState(0.5 * r1)};
  auto two_point = hybrid_relative_entropy(q1, q2);
  const double two_term = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  CHECK(std::abs(finite(two_point.direct) - two_term) < 1e-12);
  CHECK(std::abs(finite(two_point.decomposed) - two_term) < 1e-12);
}

TEST_CASE("hybrid decomposition identity on random hybrid states") {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const std::size_t n = 2 + trial % 4;
    std::vector<double> w1(n), w2(n);
    double z1 = 0, z2 = 0;
    for (std::size_t i = 0; i < n; ++i) z1 += (w1[i] = u(rng)), z2 += (w2[i] = u(rng));
    std::vector<UnnormalizedState> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.emplace_back(w1[i] / z1 * random_state(rng, d));
      b.emplace_back(w2[i] / z2 * random_state(rng, d));
    }
    auto h = hybrid_relative_entropy(a, b);
    CHECK(std::abs(finite(h.direct) - finite(h.decomposed)) < 1e-9);
  }
}

TEST_CASE("apply_kraus and a_priori_step examples") {
  const UnnormalizedState plus(ket_bra(1, 1));
  auto same = apply_kraus(KrausMap({Matrix(Matrix::Identity(2, 2))}), plus);
  CHECK((same.matrix - plus.matrix).norm() < 1e-15);

  auto born = apply_kraus(KrausMap({diag2(1, 0)}), plus);
  CHECK(born.weight() == doctest::Approx(0.5));
  CHECK((born.matrix - 0.5 * diag2(1, 0)).norm() < 1e-15);

  const Instrument id({"0"}, {KrausMap({Matrix(Matrix::Identity(2, 2))})});
  CHECK((a_priori_step(id, plus).matrix - plus.matrix).norm() < 1e-15);
  CHECK((a_priori_step(projective_qubit(), plus).matrix - diag2(0.5, 0.5)).norm() < 1e-15);
}

TEST_CASE("instrument outcome weights sum to the input weight") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instrument(100 + trial, 3, 3, 2);
    CHECK(inst.completeness_residual() < 1e-12);
    const UnnormalizedState s(0.4 * random_state(rng, 3));
    double total = 0;
    for (const auto& map : inst.maps) total += apply_kraus(map, s).weight();
    CHECK(std::abs(total - 0.4) < 1e-13);
  }
}

TEST_CASE("Kraus maps are homogeneous and additive") {
  std::mt19937_64 rng(27);
  const auto inst = random_instrument(7, 2, 2, 2);
  const Matrix a = random_state(rng, 2), b = random_state(rng, 2);
  for (const auto& map : inst.maps) {
    const Matrix lhs = apply_kraus(map, UnnormalizedState(0.3 * a + 0.2 * b)).matrix;
    const Matrix rhs = 0.3 * apply_kraus(map, UnnormalizedState(a)).matrix +
                       0.2 * apply_kraus(map, UnnormalizedState(b)).matrix;
    CHECK((lhs - rhs).norm() < 1e-14);
  }
}

TEST_CASE("chi quantity examples") {
  std::vector<EnsembleMember> single{{1.0, dm(ket_bra(1, 1))}};
  CHECK(std::abs(finite(chi_quantity(single))) < 1e-12);

  std::vector<EnsembleMember> bit{{0.5, dm(ket_bra(1, 0))}, {0.5, dm(ket_bra(0, 1))}};
  CHECK(std::abs(finite(chi_quantity(bit)) - kLn2) < 1e-12);

  std::vector<EnsembleMember> ens{{0.5, dm(ket_bra(1, 0))}, {0.5, dm(ket_bra(1, 1))}};
  const double expected = oracle::binary_entropy((1 + 1 / std::sqrt(2.0)) / 2);
  CHECK(std::abs(finite(chi_quantity(ens)) - expected) < 1e-10);
  CHECK(std::abs(finite(chi_quantity(ens)) - 0.416496) < 1e-4);
}

TEST_CASE("chi quantity: both forms agree and stay below ln d") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const std::size_t n = 1 + trial % 4;
    std::vector<EnsembleMember> ens;
    for (std::size_t i = 0; i < n; ++i) {
      ens.push_back({1.0 / static_cast<double>(n),
                     trial % 2 ? random_density(1000 + trial * 10 + i, d, true)
                               : dm(random_state(rng, d))});
    }
    const double chi = finite(chi_quantity(ens));
    CHECK(std::abs(chi - chi_quantity_entropic(ens)) < 1e-9);
    CHECK(chi <= std::log(static_cast<double>(d)) + 1e-9);
    CHECK(chi >= -1e-12);
  }
}

TEST_CASE("Uhlmann monotonicity under random channels") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const Matrix rho = random_state(rng, d), tau = random_state(rng, d);
    const auto inst = random_instrument(500 + trial, d, 2 + trial % 2, 1 + trial % 2);
    const double before = finite(quantum_relative_entropy(dm(rho), dm(tau)));
    const double after =
        finite(quantum_relative_entropy(dm(channel(inst, rho)), dm(channel(inst, tau))));
    CHECK(after <= before + 1e-9);
  }
}

TEST_CASE("coarse-graining outcomes of hybrid states decreases relative entropy") {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 2 + trial % 2;
    const Matrix rho = random_state(rng, d), tau = random_state(rng, d);
    const auto inst = random_instrument(700 + trial, d, 4, 1);
    std::vector<UnnormalizedState> fine_a, fine_b, coarse_a, coarse_b;
    for (const auto& map : inst.maps) {
      fine_a.push_back(apply_kraus(map, UnnormalizedState(rho)));
      fine_b.push_back(apply_kraus(map, UnnormalizedState(tau)));
    }
    // merge outcomes {0,1} and {2,3}
    for (std::size_t k = 0; k < 4; k += 2) {
      coarse_a.emplace_back(fine_a[k].matrix + fine_a[k + 1].matrix);
      coarse_b.emplace_back(fine_b[k].matrix + fine_b[k + 1].matrix);
    }
    const double fine = finite(hybrid_relative_entropy(fine_a, fine_b).direct);
    const double coarse = finite(hybrid_relative_entropy(coarse_a, coarse_b).direct);
    const double full = finite(quantum_relative_entropy(dm(rho), dm(tau)));
    CHECK(coarse <= fine + 1e-9);
    CHECK(fine <= full + 1e-9);
  }
}

TEST_CASE("joint convexity spot check") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const Matrix r1 = random_state(rng, d), r2 = random_state(rng, d);
    const Matrix t1 = random_state(rng, d), t2 = random_state(rng, d);
    const double mixed = finite(quantum_relative_entropy(dm(0.5 * (r1 + r2)), dm(0.5 * (t1 + t2))));
    const double avg = 0.5 * finite(quantum_relative_entropy(dm(r1), dm(t1))) +
                       0.5 * finite(quantum_relative_entropy(dm(r2), dm(t2)));
    CHECK(mixed <= avg + 1e-9);
  }
}

TEST_CASE("extended reals") {
  const ExtendedReal inf = ExtendedReal::infinity();
  CHECK((inf + 1.0).is_infinite());
  CHECK((0.0 * inf).is_finite());
  CHECK((0.0 * inf).value() == 0.0);
  CHECK((0.5 * inf).is_infinite());
  CHECK(std::isinf(inf.value()));
}
