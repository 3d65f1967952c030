#pragma once

// Memory-kernel master equation  d rho/dt = L_t rho + int K_{t,s} rho_s ds + J_{t,t0}
// from two routes: the small-dt limit of transfer tensors, and directly from
// time-dependent projectors  P_t X = tr_E X (x) tau_t,  Q_t = 1 - P_t:
//
//   L_t rho    = tr_E{ P_t L_t P_t (rho (x) x) }
//   K_{t,s}rho = tr_E{ P_t L_t G_{t,s} (Q_s L_s P_s - dP_s/ds) (rho (x) x) }
//   J_{t,t0}   = tr_E{ P_t L_t G_{t,t0} Q_t0 A rho^SE_t0 }
//
// with G_{t,s} the time-ordered exponential of Q L and x any unit-trace
// environment operator.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ttm/errors.hpp"
#include "ttm/liouville.hpp"
#include "ttm/model.hpp"
#include "ttm/tomography.hpp"
#include "ttm/transfer_tensor.hpp"

namespace ttm {

struct ProjectorChoice {
  EnvironmentSchedule schedule;
  double derivative_step = 1.0 / 256.0;
  std::optional<ComplexMatrix> x_env;  // default I/d_E

  const SpaceLayout& layout() const { return schedule.model().layout; }
  std::string name() const { return schedule.policy().name(); }

  ComplexMatrix x() const {
    if (x_env) return *x_env;
    const Index de = layout().dimE;
    return ComplexMatrix::Identity(de, de) / static_cast<double>(de);
  }

  ComplexMatrix tau(double t) const {
    ComplexMatrix tau = schedule.at(t);
    if (std::abs(tau.trace() - 1.0) > 1e-9) {
      throw ValidationError("projector: reference state at t=" + std::to_string(t) + " is not unit trace");
    }
    return tau;
  }
};

/// (P_t, Q_t) on the joint space.
inline std::pair<Superoperator, Superoperator> projector_superop(const ProjectorChoice& choice, double t) {
  const auto& lay = choice.layout();
  const ComplexMatrix p = append_env_matrix(choice.tau(t), lay) * partial_trace_env_matrix(lay);
  const Index n = p.rows();
  return {Superoperator(p), Superoperator(ComplexMatrix::Identity(n, n) - p)};
}

/// dP_s/ds : X -> tr_E X (x) d tau_s/ds.
inline Superoperator projector_derivative(const ProjectorChoice& choice, double s) {
  const auto& lay = choice.layout();
  return Superoperator(append_env_matrix(choice.schedule.derivative(s, choice.derivative_step), lay) *
                       partial_trace_env_matrix(lay));
}

/// Q_t L_t at time t.
inline ComplexMatrix projected_generator(const ProjectorChoice& choice, double t) {
  return projector_superop(choice, t).second.matrix() * liouvillian_at(choice.schedule.model(), t).matrix();
}

// ---------------------------------------------------------------------------
// Direct route

/// Time-local generator tr_E{ P_t L_t P_t (. (x) x) } on the system space.
inline Superoperator generator_direct(const ProjectorChoice& choice, double t) {
  const auto& lay = choice.layout();
  const ComplexMatrix p = projector_superop(choice, t).first.matrix();
  return Superoperator(partial_trace_env_matrix(lay) * p * liouvillian_at(choice.schedule.model(), t).matrix() *
                       p * append_env_matrix(choice.x(), lay));
}

/// K_{t_i, s} for each t_i in the ascending list `times` (> s); G is advanced
/// with `substeps_per_unit * (t - s)` midpoint pieces (at least one per interval).
inline std::vector<Superoperator> kernel_sweep(const ProjectorChoice& choice, double s,
                                               const std::vector<double>& times, double substeps_per_unit,
                                               bool include_projector_derivative = true) {
  const auto& lay = choice.layout();
  const auto& model = choice.schedule.model();
  const ComplexMatrix tr_env = partial_trace_env_matrix(lay);
  const auto [ps, qs] = projector_superop(choice, s);
  ComplexMatrix right = qs.matrix() * liouvillian_at(model, s).matrix() * ps.matrix();
  if (include_projector_derivative) right -= projector_derivative(choice, s).matrix();
  ComplexMatrix v = right * append_env_matrix(choice.x(), lay);

  std::vector<Superoperator> out;
  out.reserve(times.size());
  double now = s;
  for (double t : times) {
    if (!(t > s) || t < now) throw DomainError("kernel: requires t > s and ascending times");
    const int pieces = t > now ? std::max(1, static_cast<int>(std::ceil((t - now) * substeps_per_unit - 1e-9))) : 0;
    const double h = pieces > 0 ? (t - now) / pieces : 0.0;
    for (int k = 0; k < pieces; ++k) {
      const double mid = now + (k + 0.5) * h;
      v = matrix_exponential(projected_generator(choice, mid), h) * v;
    }
    now = t;
    const ComplexMatrix pt = projector_superop(choice, t).first.matrix();
    out.emplace_back(tr_env * pt * liouvillian_at(model, t).matrix() * v);
  }
  return out;
}

/// K_{t,s} built directly from the projector choice, G with `substeps` pieces.
inline Superoperator nz_kernel_direct(const ProjectorChoice& choice, double s, double t, int substeps,
                                      bool include_projector_derivative = true) {
  if (!(t > s)) throw DomainError("nz_kernel_direct: requires t > s");
  if (substeps < 1) throw DomainError("nz_kernel_direct: substeps must be >= 1");
  return kernel_sweep(choice, s, {t}, substeps / (t - s), include_projector_derivative).front();
}

/// J_{t,t0} for preparation A applied to rho^SE_0 at the schedule's t0.
inline ComplexMatrix nz_inhomogeneity(const ProjectorChoice& choice, const Superoperator& preparation,
                                      const ComplexMatrix& rho_se0, double t, int substeps) {
  const auto& lay = choice.layout();
  const auto& model = choice.schedule.model();
  const double t0 = choice.schedule.t0();
  if (rho_se0.rows() != lay.joint() || rho_se0.cols() != lay.joint()) {
    throw SizeError("nz_inhomogeneity: joint state has wrong dimension");
  }
  if (!check_density(rho_se0, 1e-10, 1e-10, -1e-9).pass) {
    throw ValidationError("nz_inhomogeneity: initial joint state is not a density operator");
  }
  if (t < t0) throw DomainError("nz_inhomogeneity: t < t0");
  ComplexVector v = projector_superop(choice, t0).second.matrix() *
                    vectorize(lift_system_map(preparation, lay).apply(rho_se0));
  if (t > t0) {
    const int pieces = std::max(1, substeps);
    const double h = (t - t0) / pieces;
    for (int k = 0; k < pieces; ++k) {
      v = matrix_exponential(projected_generator(choice, t0 + (k + 0.5) * h), h) * v;
    }
  }
  const ComplexMatrix pt = projector_superop(choice, t).first.matrix();
  return devectorize(partial_trace_env_matrix(lay) * pt * liouvillian_at(model, t).matrix() * v, lay.dimS, lay.dimS);
}

// ---------------------------------------------------------------------------
// Discrete route

/// (Lambda_{N:N-1} - I) / dt
inline Superoperator discrete_generator(const DynamicalMapFamily& family, int end) {
  const double dt = family.grid().dt;
  if (!(dt > 0.0)) throw DomainError("discrete_generator: dt must be > 0");
  const auto& lam = family.at(end - 1, end);
  return Superoperator((lam.matrix() - ComplexMatrix::Identity(lam.matrix().rows(), lam.matrix().cols())) / dt);
}

/// T^(N-j)_{N:j} / dt^2
inline Superoperator discrete_kernel(const TransferTensorSet& set, int end, int start) {
  const double dt = set.config().dt;
  if (!(dt > 0.0)) throw DomainError("discrete_kernel: dt must be > 0");
  if (end <= start) throw DomainError("discrete_kernel: end must exceed start");
  return Superoperator(set.at(start, end - start).matrix() / (dt * dt));
}

inline ComplexMatrix discrete_inhomogeneity(const ComplexMatrix& residual, double dt) {
  if (!(dt > 0.0)) throw DomainError("discrete_inhomogeneity: dt must be > 0");
  return residual / dt;
}

/// Grid-sampled master equation. All objects carry the label of the later
/// time of their interval: generator[N] ~ L_{t_N}, kernel[N][j] ~ K_{t_N,t_j}
/// (j <= N-2), inhomogeneity[N] ~ J_{t_N,t_0}.
struct KernelSeries {
  TimeGrid grid;
  std::string choice;
  std::vector<Superoperator> generator;             // index N = 1..steps
  std::vector<std::vector<Superoperator>> kernel;   // kernel[N][j]
  std::vector<ComplexMatrix> inhomogeneity;         // index N = 1..steps
};

/// Series from transfer tensors (set must hold lengths up to grid.steps and residuals).
inline KernelSeries discrete_series(const DynamicalMapFamily& family, const TransferTensorSet& set) {
  const auto& grid = family.grid();
  KernelSeries out;
  out.grid = grid;
  out.choice = family.policy();
  out.generator.resize(grid.steps + 1);
  out.kernel.resize(grid.steps + 1);
  out.inhomogeneity.resize(grid.steps + 1);
  const Index d = family.layout().dimS;
  out.inhomogeneity[0] = ComplexMatrix::Zero(d, d);
  for (int n = 1; n <= grid.steps; ++n) {
    out.generator[n] = discrete_generator(family, n);
    for (int j = 0; j <= n - 2; ++j) out.kernel[n].push_back(discrete_kernel(set, n, j));
    out.inhomogeneity[n] = n <= set.residual_count() ? discrete_inhomogeneity(set.residual(n), grid.dt)
                                                     : ComplexMatrix::Zero(d, d);
  }
  return out;
}

/// Series from the projector route on `grid`.
inline KernelSeries direct_series(const ProjectorChoice& choice, const TimeGrid& grid,
                                  const Superoperator& preparation, const ComplexMatrix& rho_se0,
                                  int substeps_per_step) {
  KernelSeries out;
  out.grid = grid;
  out.choice = choice.name();
  out.generator.resize(grid.steps + 1);
  out.kernel.resize(grid.steps + 1);
  out.inhomogeneity.resize(grid.steps + 1);
  const double per_unit = substeps_per_step / grid.dt;
  std::vector<std::vector<Superoperator>> by_start(grid.steps + 1);
  for (int j = 0; j + 2 <= grid.steps; ++j) {
    std::vector<double> times;
    for (int n = j + 2; n <= grid.steps; ++n) times.push_back(grid.time(n));
    by_start[j] = kernel_sweep(choice, grid.time(j), times, per_unit);
  }
  const Index d = choice.layout().dimS;
  out.inhomogeneity[0] = ComplexMatrix::Zero(d, d);
  for (int n = 1; n <= grid.steps; ++n) {
    out.generator[n] = generator_direct(choice, grid.time(n));
    for (int j = 0; j <= n - 2; ++j) out.kernel[n].push_back(by_start[j][n - j - 2]);
    out.inhomogeneity[n] = nz_inhomogeneity(choice, preparation, rho_se0, grid.time(n), n * substeps_per_step);
  }
  return out;
}

/// Right-hand side on [t_j, t_{j+1}]:
///   L_{t_{j+1}} rho_j + dt sum_{i<j} K_{t_{j+1}, t_i} rho_i + J_{t_{j+1}, t_0},
/// which equals (rho_{j+1} - rho_j)/dt identically for a discrete series.
inline ComplexMatrix master_equation_rhs(const KernelSeries& series, const Trajectory& trajectory, int j) {
  if (j < 0 || j + 1 > series.grid.steps) throw ArgumentError("master_equation_rhs: step outside series grid");
  if (static_cast<int>(trajectory.size()) <= j) throw ArgumentError("master_equation_rhs: trajectory too short");
  const int n = j + 1;
  ComplexMatrix out = series.generator[n].apply(trajectory[j]);
  for (int i = 0; i < j; ++i) out += series.grid.dt * series.kernel[n][i].apply(trajectory[i]);
  out += series.inhomogeneity[n];
  return out;
}

// ---------------------------------------------------------------------------
// Studies

struct KernelNormPoint {
  std::string choice;
  double t;
  double norm;
};

/// ||K_{t,t0}|| at the given times for each choice.
inline std::vector<KernelNormPoint> kernel_norm_curve(const std::vector<ProjectorChoice>& choices,
                                                      const std::vector<double>& times,
                                                      double substeps_per_unit) {
  std::vector<KernelNormPoint> out;
  for (const auto& c : choices) {
    const auto ks = kernel_sweep(c, c.schedule.t0(), times, substeps_per_unit);
    for (std::size_t i = 0; i < times.size(); ++i) out.push_back({c.name(), times[i], operator_norm(ks[i])});
  }
  return out;
}

struct ConvergencePoint {
  double t;
  int n;
  double relative_difference;
  double tensor_norm;
};

/// || dt^2 K_{t,t0} - T^(N)_{t:t0} || / || T^(N)_{t:t0} ||  with dt = (t - t0)/N.
inline std::vector<ConvergencePoint> convergence_study(const ProjectorChoice& choice,
                                                       const std::vector<double>& t_values,
                                                       const std::vector<int>& n_values,
                                                       int substeps_per_step) {
  const auto& model = choice.schedule.model();
  const double t0 = choice.schedule.t0();
  std::vector<ConvergencePoint> out;
  for (double t : t_values) {
    if (!(t > t0)) throw DomainError("convergence_study: t must exceed t0");
    for (int n : n_values) {
      if (n < 2) throw DomainError("convergence_study: N must be >= 2");
      const TimeGrid grid{t0, (t - t0) / n, n};
      const PropagatorCache cache(model, grid, substeps_per_step);
      const auto family = reconstruct_family(cache, choice.schedule);
      const auto tensors = tensors_ending_at(family, n, n);
      const Superoperator& tn = tensors[n];
      const Superoperator k = nz_kernel_direct(choice, t0, t, n * substeps_per_step);
      const double dt = grid.dt;
      const double tnorm = operator_norm(tn);
      out.push_back({t, n, operator_norm(dt * dt * k.matrix() - tn.matrix()) / tnorm, tnorm});
    }
  }
  return out;
}

}  // namespace ttm
