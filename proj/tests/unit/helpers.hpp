#pragma once

#include <cmath>
#include <complex>
#include <random>

#include "contmeas/quantum.hpp"

namespace testing_util {

using contmeas::Complex;
using contmeas::Matrix;

inline Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> g;
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = Complex(g(rng), g(rng));
  return (a + a.adjoint()) / 2.0;
}

/// Full-rank density matrix G G^* / Tr.
inline Matrix random_state(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> g;
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = Complex(g(rng), g(rng));
  Matrix s = a * a.adjoint();
  return s / s.trace().real();
}

inline Matrix ket_bra(double a0, double a1) {
  Eigen::VectorXcd v(2);
  v << a0, a1;
  v.normalize();
  return v * v.adjoint();
}

inline Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace testing_util
