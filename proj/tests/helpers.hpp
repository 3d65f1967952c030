#pragma once

// Fixed-seed random operators for property tests.

#include <random>

#include "ttm/liouville.hpp"

namespace testing_util {

using ttm::ComplexMatrix;
using ttm::Index;

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20181105);
  return gen;
}

inline ComplexMatrix random_matrix(Index rows, Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = {n(rng()), n(rng())};
  return m;
}

inline ComplexMatrix random_hermitian(Index d) {
  const ComplexMatrix a = random_matrix(d, d);
  return 0.5 * (a + a.adjoint());
}

inline ComplexMatrix random_density(Index d) {
  const ComplexMatrix a = random_matrix(d, d);
  ComplexMatrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

inline double max_abs(const ComplexMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing_util
