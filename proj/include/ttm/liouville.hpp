#pragma once

// Dense Liouville-space linear algebra.
//
// Conventions used throughout the library:
//  * Operators are column-stacked: vec(X)[r + c*rows] = X(r, c), so that
//    vec(A X B) = (B^T (x) A) vec(X).
//  * Joint spaces put the system factor first: index(s, e) = s*dimE + e.
//  * The norm of a superoperator is the largest singular value of its matrix.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <string>

#include "ttm/errors.hpp"

namespace ttm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

/// Matrix on vectorized operators. Square, d^2 x d^2 for operators of size d.
class Superoperator {
 public:
  Superoperator() = default;
  explicit Superoperator(ComplexMatrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) {
      throw SizeError("superoperator matrix must be square");
    }
    const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(matrix_.rows()))));
    if (d * d != matrix_.rows()) {
      throw SizeError("superoperator size " + std::to_string(matrix_.rows()) +
                      " is not a perfect square");
    }
    dim_ = d;
  }

  static Superoperator identity(Index dim) {
    return Superoperator(ComplexMatrix::Identity(dim * dim, dim * dim));
  }
  static Superoperator zero(Index dim) {
    return Superoperator(ComplexMatrix::Zero(dim * dim, dim * dim));
  }

  /// Hilbert-space dimension of the operators it acts on.
  Index dim() const { return dim_; }
  const ComplexMatrix& matrix() const { return matrix_; }

  ComplexMatrix apply(const ComplexMatrix& x) const;

  Superoperator operator*(const Superoperator& rhs) const {
    check_same(rhs);
    return Superoperator(matrix_ * rhs.matrix_);
  }
  Superoperator operator+(const Superoperator& rhs) const {
    check_same(rhs);
    return Superoperator(matrix_ + rhs.matrix_);
  }
  Superoperator operator-(const Superoperator& rhs) const {
    check_same(rhs);
    return Superoperator(matrix_ - rhs.matrix_);
  }
  Superoperator operator*(Complex s) const { return Superoperator(matrix_ * s); }
  friend Superoperator operator*(Complex s, const Superoperator& op) { return op * s; }

 private:
  void check_same(const Superoperator& rhs) const {
    if (rhs.dim_ != dim_) throw SizeError("superoperator dimension mismatch");
  }

  ComplexMatrix matrix_;
  Index dim_ = 0;
};

/// System/environment factorization of a joint Hilbert space.
struct SpaceLayout {
  Index dimS = 2;
  Index dimE = 1;

  Index joint() const { return dimS * dimE; }

  void validate() const {
    if (dimS < 2) throw ValidationError("layout: dimS must be >= 2");
    if (dimE < 1) throw ValidationError("layout: dimE must be >= 1");
  }
};

enum class Keep { System, Environment };

// ---------------------------------------------------------------------------
// Vectorization

inline ComplexVector vectorize(const ComplexMatrix& x) {
  return Eigen::Map<const ComplexVector>(x.data(), x.size());
}

inline ComplexMatrix devectorize(const ComplexVector& v, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0 || v.size() != rows * cols) {
    throw SizeError("devectorize: length " + std::to_string(v.size()) + " != " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

inline ComplexMatrix Superoperator::apply(const ComplexMatrix& x) const {
  if (x.rows() != dim_ || x.cols() != dim_) {
    throw SizeError("superoperator of dim " + std::to_string(dim_) + " applied to " +
                    std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " operator");
  }
  return devectorize(matrix_ * vectorize(x), dim_, dim_);
}

// ---------------------------------------------------------------------------
// Tensor products and partial traces

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline ComplexMatrix partial_trace(const ComplexMatrix& x, const SpaceLayout& layout, Keep keep) {
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  if (x.rows() != ds * de || x.cols() != ds * de) {
    throw SizeError("partial_trace: operator is " + std::to_string(x.rows()) + "x" +
                    std::to_string(x.cols()) + ", layout expects " + std::to_string(ds * de));
  }
  if (keep == Keep::System) {
    ComplexMatrix out = ComplexMatrix::Zero(ds, ds);
    for (Index s = 0; s < ds; ++s)
      for (Index t = 0; t < ds; ++t)
        for (Index e = 0; e < de; ++e) out(s, t) += x(s * de + e, t * de + e);
    return out;
  }
  ComplexMatrix out = ComplexMatrix::Zero(de, de);
  for (Index e = 0; e < de; ++e)
    for (Index f = 0; f < de; ++f)
      for (Index s = 0; s < ds; ++s) out(e, f) += x(s * de + e, s * de + f);
  return out;
}

/// Matrix of X -> tr_E X, mapping vec on the joint space to vec on S.
inline ComplexMatrix partial_trace_env_matrix(const SpaceLayout& layout) {
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  const Index dj = ds * de;
  ComplexMatrix out = ComplexMatrix::Zero(ds * ds, dj * dj);
  for (Index s = 0; s < ds; ++s)
    for (Index t = 0; t < ds; ++t)
      for (Index e = 0; e < de; ++e) out(s + t * ds, (s * de + e) + (t * de + e) * dj) = 1.0;
  return out;
}

/// Matrix of X -> tr_S X, mapping vec on the joint space to vec on E.
inline ComplexMatrix partial_trace_sys_matrix(const SpaceLayout& layout) {
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  const Index dj = ds * de;
  ComplexMatrix out = ComplexMatrix::Zero(de * de, dj * dj);
  for (Index e = 0; e < de; ++e)
    for (Index f = 0; f < de; ++f)
      for (Index s = 0; s < ds; ++s) out(e + f * de, (s * de + e) + (s * de + f) * dj) = 1.0;
  return out;
}

/// Matrix of X -> X (x) env, mapping vec on S to vec on the joint space.
inline ComplexMatrix append_env_matrix(const ComplexMatrix& env, const SpaceLayout& layout) {
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  if (env.rows() != de || env.cols() != de) throw SizeError("append_env_matrix: env size mismatch");
  const Index dj = ds * de;
  ComplexMatrix out = ComplexMatrix::Zero(dj * dj, ds * ds);
  for (Index s = 0; s < ds; ++s)
    for (Index t = 0; t < ds; ++t)
      for (Index e = 0; e < de; ++e)
        for (Index f = 0; f < de; ++f) out((s * de + e) + (t * de + f) * dj, s + t * ds) = env(e, f);
  return out;
}

/// Matrix of Y -> sys (x) Y, mapping vec on E to vec on the joint space.
inline ComplexMatrix prepend_sys_matrix(const ComplexMatrix& sys, const SpaceLayout& layout) {
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  if (sys.rows() != ds || sys.cols() != ds) throw SizeError("prepend_sys_matrix: sys size mismatch");
  const Index dj = ds * de;
  ComplexMatrix out = ComplexMatrix::Zero(dj * dj, de * de);
  for (Index s = 0; s < ds; ++s)
    for (Index t = 0; t < ds; ++t)
      for (Index e = 0; e < de; ++e)
        for (Index f = 0; f < de; ++f) out((s * de + e) + (t * de + f) * dj, e + f * de) = sys(s, t);
  return out;
}

/// Superoperator of X -> A X B^dagger.
inline Superoperator sandwich_superop(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw SizeError("sandwich_superop: A and B must be square and of equal size");
  }
  return Superoperator(kron(b.conjugate(), a));
}

/// Superoperator lifting S-space map `s` to S(x)E by acting as s (x) id_E.
inline Superoperator lift_system_map(const Superoperator& s, const SpaceLayout& layout) {
  if (s.dim() != layout.dimS) throw SizeError("lift_system_map: dimension mismatch");
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  const Index dj = ds * de;
  ComplexMatrix out = ComplexMatrix::Zero(dj * dj, dj * dj);
  // (s (x) id)(|a><b| (x) |e><f|) = s(|a><b|) (x) |e><f|
  for (Index a = 0; a < ds; ++a)
    for (Index b = 0; b < ds; ++b)
      for (Index e = 0; e < de; ++e)
        for (Index f = 0; f < de; ++f) {
          const Index col = (a * de + e) + (b * de + f) * dj;
          for (Index c = 0; c < ds; ++c)
            for (Index d = 0; d < ds; ++d)
              out((c * de + e) + (d * de + f) * dj, col) = s.matrix()(c + d * ds, a + b * ds);
        }
  return Superoperator(std::move(out));
}

// ---------------------------------------------------------------------------
// Exponentials and norms

/// exp(scale * m) by Pade scaling-and-squaring.
inline ComplexMatrix matrix_exponential(const ComplexMatrix& m, double scale) {
  if (m.rows() != m.cols()) throw SizeError("matrix_exponential: matrix must be square");
  const ComplexMatrix scaled = m * scale;
  return scaled.exp();
}

inline Superoperator matrix_exponential(const Superoperator& s, double scale) {
  return Superoperator(matrix_exponential(s.matrix(), scale));
}

inline Eigen::VectorXd singular_values(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues();
}

inline double operator_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}
inline double operator_norm(const Superoperator& s) { return operator_norm(s.matrix()); }

inline double trace_norm(const ComplexMatrix& x) {
  if (x.size() == 0) return 0.0;
  return singular_values(x).sum();
}

inline double trace_distance(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) {
    throw SizeError("trace_distance: operand size mismatch");
  }
  return trace_norm(rho - sigma);
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& x) { return 0.5 * (x + x.adjoint()); }

inline double hermiticity_deviation(const ComplexMatrix& x) {
  return (x - x.adjoint()).cwiseAbs().maxCoeff();
}

/// Row vector c with c * vec(X) = tr X.
inline ComplexVector identity_costate(Index dim) {
  return vectorize(ComplexMatrix::Identity(dim, dim));
}

/// max_k |(vec(I)^dagger S - vec(I)^dagger)_k|; zero for trace-preserving S.
inline double trace_preservation_deviation(const Superoperator& s) {
  const ComplexVector id = identity_costate(s.dim());
  return (id.adjoint() * s.matrix() - id.adjoint()).cwiseAbs().maxCoeff();
}

/// max_k |(vec(I)^dagger S)_k|; zero for trace-annihilating generators.
inline double trace_annihilation_deviation(const Superoperator& s) {
  const ComplexVector id = identity_costate(s.dim());
  return (id.adjoint() * s.matrix()).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Density operators

struct DensityReport {
  double hermiticity_dev = 0.0;
  double trace_dev = 0.0;
  double min_eigenvalue = 0.0;
  bool pass = false;
};

inline constexpr double kHermiticityTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPositivityTol = -1e-10;

/// Explicit physicality check; construction never validates implicitly.
inline DensityReport check_density(const ComplexMatrix& x, double herm_tol = kHermiticityTol,
                                   double trace_tol = kTraceTol,
                                   double positivity_tol = kPositivityTol) {
  DensityReport r;
  if (x.rows() != x.cols() || x.rows() == 0) throw SizeError("density operator must be square");
  if (!x.allFinite()) return r;
  r.hermiticity_dev = hermiticity_deviation(x);
  r.trace_dev = std::abs(x.trace() - 1.0);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(x), Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues()(0);
  r.pass = r.hermiticity_dev <= herm_tol && r.trace_dev <= trace_tol &&
           r.min_eigenvalue >= positivity_tol;
  return r;
}

/// Hermitian unit-trace positive operator.
class DensityOperator {
 public:
  DensityOperator() = default;

  /// Wraps without checking; see check_density / validated.
  static DensityOperator unchecked(ComplexMatrix m) {
    DensityOperator d;
    d.matrix_ = std::move(m);
    return d;
  }

  static DensityOperator validated(ComplexMatrix m, const std::string& what = "state") {
    const DensityReport r = check_density(m);
    if (!r.pass) {
      throw ValidationError(what + " is not a density operator (hermiticity dev " +
                            std::to_string(r.hermiticity_dev) + ", trace dev " +
                            std::to_string(r.trace_dev) + ", min eigenvalue " +
                            std::to_string(r.min_eigenvalue) + ")");
    }
    return unchecked(std::move(m));
  }

  Index dim() const { return matrix_.rows(); }
  const ComplexMatrix& matrix() const { return matrix_; }

 private:
  ComplexMatrix matrix_;
};

// ---------------------------------------------------------------------------
// Common single-qubit operators

namespace pauli {
inline ComplexMatrix I() { return ComplexMatrix::Identity(2, 2); }
inline ComplexMatrix X() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline ComplexMatrix Y() {
  ComplexMatrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}
inline ComplexMatrix Z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

inline ComplexMatrix ket_bra(Index dim, Index row, Index col) {
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(row, col) = 1.0;
  return m;
}

inline ComplexMatrix projector(const ComplexVector& psi) { return psi * psi.adjoint(); }

}  // namespace ttm
