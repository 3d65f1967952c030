#pragma once

// Time-dependent Lindblad models on the joint system-environment space and
// their time-ordered propagators.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ttm/errors.hpp"
#include "ttm/liouville.hpp"

namespace ttm {

struct JumpTerm {
  ComplexMatrix op;
  double rate = 0.0;  // 1/time
};

struct LindbladModel {
  SpaceLayout layout;
  std::function<ComplexMatrix(double)> hamiltonian;
  std::vector<JumpTerm> jumps;
  std::optional<double> period;

  /// Checks Hermiticity, rates and declared periodicity on `samples` times in [0, span).
  void validate(int samples = 16, double span = 10.0) const;
};

struct TimeGrid {
  double t0 = 0.0;
  double dt = 1.0;
  int steps = 1;

  double time(int j) const { return t0 + j * dt; }
  int points() const { return steps + 1; }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time grid: dt must be > 0");
    if (steps < 1) throw DomainError("time grid: steps must be >= 1");
  }
};

inline constexpr int kDefaultSubsteps = 64;

// ---------------------------------------------------------------------------

inline Superoperator commutator_superop(const ComplexMatrix& h) {
  const Index d = h.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  return Superoperator(-kI * (kron(id, h) - kron(h.transpose(), id)));
}

inline Superoperator dissipator_superop(const ComplexMatrix& l, double rate) {
  const Index d = l.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix ldl = l.adjoint() * l;
  return Superoperator(rate * (kron(l.conjugate(), l) - 0.5 * kron(id, ldl) -
                               0.5 * kron(ldl.transpose(), id)));
}

/// rho -> -i[H_t, rho] + sum_k rate_k (L rho L^dag - {L^dag L, rho}/2).
inline Superoperator liouvillian_at(const LindbladModel& model, double t) {
  const ComplexMatrix h = model.hamiltonian(t);
  const Index d = model.layout.joint();
  if (h.rows() != d || h.cols() != d) {
    throw SizeError("hamiltonian at t=" + std::to_string(t) + " has wrong dimension");
  }
  if (hermiticity_deviation(h) > 1e-12) {
    throw ValidationError("hamiltonian at t=" + std::to_string(t) + " is not Hermitian");
  }
  Superoperator out = commutator_superop(h);
  for (const auto& j : model.jumps) out = out + dissipator_superop(j.op, j.rate);
  return out;
}

inline void LindbladModel::validate(int samples, double span) const {
  layout.validate();
  if (!hamiltonian) throw ValidationError("model: hamiltonian missing");
  const Index d = layout.joint();
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    if (jumps[k].rate < 0.0 || !std::isfinite(jumps[k].rate)) {
      throw ValidationError("model: jumps[" + std::to_string(k) + "].rate must be >= 0");
    }
    if (jumps[k].op.rows() != d || jumps[k].op.cols() != d) {
      throw SizeError("model: jumps[" + std::to_string(k) + "].op has wrong dimension");
    }
  }
  if (period && !(*period > 0.0)) throw ValidationError("model: period must be > 0");
  for (int k = 0; k < samples; ++k) {
    const double t = span * (k + 0.37) / samples;
    const ComplexMatrix h = hamiltonian(t);
    if (h.rows() != d || h.cols() != d) throw SizeError("model: hamiltonian has wrong dimension");
    if (!h.allFinite()) throw ValidationError("model: hamiltonian has non-finite entries");
    if (hermiticity_deviation(h) > 1e-12) {
      throw ValidationError("model: hamiltonian not Hermitian at t=" + std::to_string(t));
    }
    if (period) {
      const double dev = (hamiltonian(t + *period) - h).cwiseAbs().maxCoeff();
      if (dev > 1e-12) {
        throw ValidationError("model: hamiltonian not periodic with declared period (dev " +
                              std::to_string(dev) + ")");
      }
    }
  }
}

/// U_{t:s} as an ordered product of exp(h L(midpoint)) over `substeps` pieces.
inline Superoperator propagator(const LindbladModel& model, double s, double t, int substeps) {
  if (t < s) throw DomainError("propagator: t < s");
  if (substeps < 1) throw DomainError("propagator: substeps must be >= 1");
  const Index d = model.layout.joint();
  Superoperator u = Superoperator::identity(d);
  if (t == s) return u;
  const double h = (t - s) / substeps;
  for (int k = 0; k < substeps; ++k) {
    const double mid = s + (k + 0.5) * h;
    u = matrix_exponential(liouvillian_at(model, mid), h) * u;
  }
  return u;
}

/// Adjacent-step propagators on a grid; longer intervals are composed.
class PropagatorCache {
 public:
  PropagatorCache(const LindbladModel& model, TimeGrid grid, int substeps = kDefaultSubsteps)
      : grid_(grid), substeps_(substeps), dim_(model.layout.joint()) {
    grid_.validate();
    if (substeps < 1) throw DomainError("propagator cache: substeps must be >= 1");
    adjacent_.reserve(grid.steps);
    for (int j = 0; j < grid.steps; ++j) {
      adjacent_.push_back(propagator(model, grid.time(j), grid.time(j + 1), substeps));
    }
  }

  const TimeGrid& grid() const { return grid_; }
  int substeps() const { return substeps_; }

  const Superoperator& step(int j) const { return adjacent_.at(j); }

  /// U_{t_j : t_i}
  Superoperator between(int i, int j) const {
    if (i < 0 || j > grid_.steps || j < i) {
      throw CoverageError("propagator cache: no interval (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
    }
    Superoperator u = Superoperator::identity(dim_);
    for (int k = i; k < j; ++k) u = adjacent_[k] * u;
    return u;
  }

 private:
  TimeGrid grid_;
  int substeps_;
  Index dim_;
  std::vector<Superoperator> adjacent_;
};

using Trajectory = std::vector<ComplexMatrix>;

inline Trajectory evolve_state(const ComplexMatrix& rho0, const PropagatorCache& cache) {
  const Index d = cache.step(0).dim();
  if (rho0.rows() != d || rho0.cols() != d) throw SizeError("evolve_state: state size mismatch");
  Trajectory out;
  out.reserve(cache.grid().points());
  out.push_back(rho0);
  for (int j = 0; j < cache.grid().steps; ++j) out.push_back(cache.step(j).apply(out.back()));
  return out;
}

/// Joint trajectory rho^SE_{t_j}, j = 0..N.
inline Trajectory evolve_state(const DensityOperator& rho0, const LindbladModel& model,
                               const TimeGrid& grid, int substeps = kDefaultSubsteps) {
  const DensityReport r = check_density(rho0.matrix());
  if (!r.pass) throw ValidationError("evolve_state: initial state is not a density operator");
  return evolve_state(rho0.matrix(), PropagatorCache(model, grid, substeps));
}

// ---------------------------------------------------------------------------
// Two-qubit driven dissipative example

struct ExampleParameters {
  double omega = 1.0;       // system splitting
  double gamma = 1.0;       // environment pumping rate
  double omega_env = 16.0;  // environment splitting
  double coupling = 2.0;    // g
  double drive = 2.0;       // Omega, frequency of the yy modulation
};

/// H_t = (w/2) sz(x)1 + (w'/2) 1(x)sz + g[sx(x)sx + cos(W t) sy(x)sy],
/// single jump 1(x)|0><1| at rate Gamma.
inline LindbladModel example_model(const ExampleParameters& p = {}) {
  using namespace pauli;
  const ComplexMatrix h0 = 0.5 * p.omega * kron(Z(), I()) + 0.5 * p.omega_env * kron(I(), Z()) +
                           p.coupling * kron(X(), X());
  const ComplexMatrix h1 = p.coupling * kron(Y(), Y());
  LindbladModel m;
  m.layout = SpaceLayout{2, 2};
  const double drive = p.drive;
  m.hamiltonian = [h0, h1, drive](double t) -> ComplexMatrix { return h0 + std::cos(drive * t) * h1; };
  m.jumps.push_back(JumpTerm{kron(I(), ket_bra(2, 0, 1)), p.gamma});
  if (p.drive != 0.0) m.period = 2.0 * std::numbers::pi / p.drive;
  return m;
}

/// (3/4)|0><0|(x)|+><+| + (1/4)|1><1|(x)|-><-|
inline DensityOperator example_initial_state() {
  ComplexVector plus(2), minus(2);
  const double r = 1.0 / std::sqrt(2.0);
  plus << r, r;
  minus << r, -r;
  const ComplexMatrix rho = 0.75 * kron(ket_bra(2, 0, 0), projector(plus)) +
                            0.25 * kron(ket_bra(2, 1, 1), projector(minus));
  return DensityOperator::unchecked(rho);
}

}  // namespace ttm
