#pragma once

#include <cstdint>
#include <random>

#include "qsdc/hilbert.hpp"

namespace qsdc::test {

inline Vector random_vector(Index d, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = Complex(n(gen), n(gen));
  return v;
}

inline Matrix random_matrix(Index d, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = Complex(n(gen), n(gen));
  return m;
}

inline Matrix random_hermitian(Index d, std::uint32_t seed) {
  const Matrix m = random_matrix(d, seed);
  return Matrix(0.5 * (m + m.adjoint()));
}

// Random full-rank density matrix A A^dag / Tr.
inline Matrix random_density(Index d, std::uint32_t seed) {
  const Matrix a = random_matrix(d, seed);
  Matrix r = a * a.adjoint();
  r /= r.trace().real();
  return r;
}

inline StateVector random_state(Index d, std::uint32_t seed) { return StateVector::normalize(random_vector(d, seed)); }

}  // namespace qsdc::test
