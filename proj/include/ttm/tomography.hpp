#pragma once

// Numerical process tomography of reduced dynamics.
//
// A dynamical map is Lambda_{t:s} rho = tr_E{ U_{t:s} (rho (x) tau_s) } where
// the reference environment state tau_s is fixed by a ReferenceStatePolicy.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ttm/errors.hpp"
#include "ttm/liouville.hpp"
#include "ttm/model.hpp"

namespace ttm {

struct ReferenceStatePolicy {
  /// tau_t = tau for all t.
  struct Fixed {
    DensityOperator tau;
  };
  /// tau_t = tr_S rho^SE_t of the freely evolved joint state.
  struct TrueEnvironment {};
  /// tau_t solves d/dt tau = tr_S{ L^SE_t (sigma_t (x) tau) }, i.e. the system
  /// is continually reset to sigma_t.
  struct FrozenSystem {
    std::function<ComplexMatrix(double)> sigma;
  };

  std::variant<Fixed, TrueEnvironment, FrozenSystem> kind;
  std::optional<double> period;

  static ReferenceStatePolicy fixed(DensityOperator tau) { return {Fixed{std::move(tau)}, {}}; }
  static ReferenceStatePolicy true_environment() { return {TrueEnvironment{}, {}}; }
  static ReferenceStatePolicy frozen(std::function<ComplexMatrix(double)> sigma) {
    return {FrozenSystem{std::move(sigma)}, {}};
  }
  static ReferenceStatePolicy frozen(const ComplexMatrix& sigma) {
    return frozen([sigma](double) { return sigma; });
  }

  std::string name() const {
    switch (kind.index()) {
      case 0: return "fixed";
      case 1: return "true-env";
      default: return "frozen";
    }
  }
  bool is_time_independent() const { return kind.index() == 0; }
};

/// tr_S{ L^SE_t (sigma (x) .) } as a superoperator on E.
inline Superoperator averaged_env_generator(const LindbladModel& model, const ComplexMatrix& sigma,
                                            double t) {
  const auto& lay = model.layout;
  return Superoperator(partial_trace_sys_matrix(lay) * liouvillian_at(model, t).matrix() *
                       prepend_sys_matrix(sigma, lay));
}

/// Reference environment state tau_t for t >= t0, precomputed on a lattice.
///
/// Checkpoints sit every `resolution` time units; off-lattice times are reached
/// by midpoint-exponential steps from the preceding checkpoint. With resolution
/// dt/substeps the checkpoints coincide with the substep boundaries used by
/// PropagatorCache on the same grid.
class EnvironmentSchedule {
 public:
  EnvironmentSchedule(const ReferenceStatePolicy& policy, const LindbladModel& model, double t0,
                      double t_max, double resolution,
                      const std::optional<ComplexMatrix>& joint_initial = std::nullopt)
      : policy_(policy), model_(model), t0_(t0), h_(resolution) {
    if (!(resolution > 0.0)) throw DomainError("environment schedule: resolution must be > 0");
    if (t_max < t0) throw DomainError("environment schedule: t_max < t0");
    const auto& lay = model.layout;
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ReferenceStatePolicy::Fixed>) {
            if (k.tau.dim() != lay.dimE) throw SizeError("fixed reference state has wrong dimension");
            if (!check_density(k.tau.matrix()).pass) {
              throw ValidationError("fixed reference state is not a density operator");
            }
          } else {
            if (!joint_initial) {
              throw ArgumentError(policy.name() + " policy requires the initial joint state");
            }
            if (joint_initial->rows() != lay.joint()) {
              throw SizeError("initial joint state has wrong dimension");
            }
          }
        },
        policy.kind);
    if (policy.is_time_independent()) return;

    const int count = static_cast<int>(std::ceil((t_max - t0) / h_ - 1e-9));
    const bool joint = std::holds_alternative<ReferenceStatePolicy::TrueEnvironment>(policy.kind);
    ComplexMatrix state = joint ? *joint_initial
                                : partial_trace(*joint_initial, lay, Keep::Environment);
    checkpoints_.reserve(count + 1);
    checkpoints_.push_back(state);
    for (int k = 0; k < count; ++k) {
      const double a = t0 + k * h_;
      state = step(state, a, a + h_, 1);
      checkpoints_.push_back(state);
    }
  }

  const LindbladModel& model() const { return model_; }
  const ReferenceStatePolicy& policy() const { return policy_; }
  double t0() const { return t0_; }

  ComplexMatrix at(double t) const {
    if (const auto* f = std::get_if<ReferenceStatePolicy::Fixed>(&policy_.kind)) {
      return f->tau.matrix();
    }
    if (t < t0_ - 1e-12) throw DomainError("environment schedule: t before t0");
    const double x = (t - t0_) / h_;
    const int k = std::clamp(static_cast<int>(std::floor(x + 1e-9)), 0,
                             static_cast<int>(checkpoints_.size()) - 1);
    const double tk = t0_ + k * h_;
    ComplexMatrix state = checkpoints_[k];
    if (t - tk > 1e-12 * std::max(1.0, std::abs(t))) {
      const int pieces = std::max(1, static_cast<int>(std::ceil((t - tk) / h_ - 1e-9)));
      state = step(state, tk, t, pieces);
    }
    if (std::holds_alternative<ReferenceStatePolicy::TrueEnvironment>(policy_.kind)) {
      return partial_trace(state, model_.layout, Keep::Environment);
    }
    return state;
  }

  /// d tau / dt by central difference with step h; second-order one-sided
  /// difference where t - h < t0.
  ComplexMatrix derivative(double t, double h) const {
    if (policy_.is_time_independent()) {
      const Index de = model_.layout.dimE;
      return ComplexMatrix::Zero(de, de);
    }
    if (!(h > 0.0)) throw DomainError("environment schedule: derivative step must be > 0");
    if (t - h >= t0_ - 1e-12) return (at(t + h) - at(t - h)) / (2.0 * h);
    return (-3.0 * at(t) + 4.0 * at(t + h) - at(t + 2.0 * h)) / (2.0 * h);
  }

  /// d tau / dt evaluated from the generator (no finite difference).
  ComplexMatrix generator_derivative(double t) const {
    const auto& lay = model_.layout;
    if (policy_.is_time_independent()) return ComplexMatrix::Zero(lay.dimE, lay.dimE);
    if (const auto* fz = std::get_if<ReferenceStatePolicy::FrozenSystem>(&policy_.kind)) {
      return averaged_env_generator(model_, fz->sigma(t), t).apply(at(t));
    }
    const double x = (t - t0_) / h_;
    const int k = std::clamp(static_cast<int>(std::floor(x + 1e-9)), 0,
                             static_cast<int>(checkpoints_.size()) - 1);
    const double tk = t0_ + k * h_;
    ComplexMatrix joint = checkpoints_[k];
    if (t - tk > 1e-12) {
      joint = step(joint, tk, t, std::max(1, static_cast<int>(std::ceil((t - tk) / h_ - 1e-9))));
    }
    return partial_trace(liouvillian_at(model_, t).apply(joint), lay, Keep::Environment);
  }

 private:
  ComplexMatrix step(const ComplexMatrix& state, double a, double b, int pieces) const {
    const double h = (b - a) / pieces;
    ComplexMatrix out = state;
    const bool joint = std::holds_alternative<ReferenceStatePolicy::TrueEnvironment>(policy_.kind);
    for (int p = 0; p < pieces; ++p) {
      const double mid = a + (p + 0.5) * h;
      Superoperator gen = joint ? liouvillian_at(model_, mid)
                                : averaged_env_generator(
                                      model_,
                                      std::get<ReferenceStatePolicy::FrozenSystem>(policy_.kind).sigma(mid),
                                      mid);
      out = matrix_exponential(gen, h).apply(out);
    }
    return out;
  }

  ReferenceStatePolicy policy_;
  LindbladModel model_;
  double t0_;
  double h_;
  std::vector<ComplexMatrix> checkpoints_;
};

/// tau^E_t under `policy`; builds a one-off schedule with the given resolution.
inline ComplexMatrix reference_state(const ReferenceStatePolicy& policy, const LindbladModel& model,
                                     double t0, double t,
                                     const std::optional<ComplexMatrix>& joint_initial = std::nullopt,
                                     double resolution = 1.0 / 128.0) {
  return EnvironmentSchedule(policy, model, t0, std::max(t, t0), resolution, joint_initial).at(t);
}

// ---------------------------------------------------------------------------
// Maps

/// tr_E{ U (. (x) tau) } for a joint-space propagator U.
inline Superoperator reduce_propagator(const Superoperator& u, const ComplexMatrix& tau,
                                       const SpaceLayout& layout) {
  return Superoperator(partial_trace_env_matrix(layout) * u.matrix() *
                       append_env_matrix(tau, layout));
}

/// Lambda_{t:s} = tr_E{ U_{t:s} (. (x) tau) }.
inline Superoperator dynamical_map(const LindbladModel& model, double s, double t,
                                   const DensityOperator& tau, int substeps) {
  if (t < s) throw DomainError("dynamical_map: t < s");
  if (!check_density(tau.matrix()).pass) throw ValidationError("dynamical_map: tau is not a state");
  return reduce_propagator(propagator(model, s, t, substeps), tau.matrix(), model.layout);
}

/// Choi matrix sum_{ij} |i><j| (x) S(|i><j|), unnormalized.
inline ComplexMatrix choi_matrix(const Superoperator& s) {
  const Index d = s.dim();
  ComplexMatrix choi(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index a = 0; a < d; ++a)
      for (Index j = 0; j < d; ++j)
        for (Index b = 0; b < d; ++b) choi(i * d + a, j * d + b) = s.matrix()(a + b * d, i + j * d);
  return choi;
}

struct CptpReport {
  double trace_dev = 0.0;
  double choi_min_eig = 0.0;
  bool pass = false;
};

inline CptpReport check_cptp(const Superoperator& s, double tol = 1e-8) {
  CptpReport r;
  r.trace_dev = trace_preservation_deviation(s);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(choi_matrix(s)),
                                                  Eigen::EigenvaluesOnly);
  r.choi_min_eig = es.eigenvalues()(0);
  if (std::abs(r.choi_min_eig) < 1e-15) r.choi_min_eig = 0.0;
  r.pass = s.matrix().allFinite() && r.trace_dev <= tol && r.choi_min_eig >= -tol;
  return r;
}

class DynamicalMapFamily {
 public:
  DynamicalMapFamily() = default;
  DynamicalMapFamily(TimeGrid grid, std::string policy, int band, SpaceLayout layout)
      : grid_(grid), policy_(std::move(policy)), band_(band), layout_(layout) {
    maps_.resize(grid.steps);
    for (int i = 0; i < grid.steps; ++i) maps_[i].resize(std::min(band, grid.steps - i));
    reference_states_.resize(grid.points());
  }

  const TimeGrid& grid() const { return grid_; }
  const std::string& policy() const { return policy_; }
  int band() const { return band_; }
  const SpaceLayout& layout() const { return layout_; }

  bool contains(int i, int j) const {
    return i >= 0 && j > i && j <= grid_.steps && j - i <= band_;
  }

  /// Lambda_{t_j : t_i}
  const Superoperator& at(int i, int j) const {
    if (!contains(i, j)) {
      throw CoverageError("map family has no map (" + std::to_string(i) + "," + std::to_string(j) +
                          "): grid steps " + std::to_string(grid_.steps) + ", band " +
                          std::to_string(band_));
    }
    return maps_[i][j - i - 1];
  }
  void set(int i, int j, Superoperator m) {
    if (!contains(i, j)) throw CoverageError("map family: (i,j) outside band");
    maps_[i][j - i - 1] = std::move(m);
  }

  const ComplexMatrix& reference_state(int j) const { return reference_states_.at(j); }
  void set_reference_state(int j, ComplexMatrix tau) { reference_states_.at(j) = std::move(tau); }

 private:
  TimeGrid grid_;
  std::string policy_;
  int band_ = 0;
  SpaceLayout layout_;
  std::vector<std::vector<Superoperator>> maps_;
  std::vector<ComplexMatrix> reference_states_;
};

/// Reconstructs Lambda_{t_j : t_i} for all 0 <= i < j <= N with j - i <= band.
inline DynamicalMapFamily reconstruct_family(const PropagatorCache& cache,
                                             const EnvironmentSchedule& schedule,
                                             std::optional<int> band = std::nullopt) {
  const TimeGrid& grid = cache.grid();
  const auto& lay = schedule.model().layout;
  const int b = std::clamp(band.value_or(grid.steps), 1, grid.steps);
  DynamicalMapFamily family(grid, schedule.policy().name(), b, lay);
  const ComplexMatrix tr_env = partial_trace_env_matrix(lay);
  for (int j = 0; j <= grid.steps; ++j) family.set_reference_state(j, schedule.at(grid.time(j)));
  for (int i = 0; i < grid.steps; ++i) {
    const ComplexMatrix embed = append_env_matrix(family.reference_state(i), lay);
    ComplexMatrix u = cache.step(i).matrix() * embed;
    for (int j = i + 1; j <= std::min(grid.steps, i + b); ++j) {
      if (j > i + 1) u = cache.step(j - 1).matrix() * u;
      Superoperator m(tr_env * u);
      const CptpReport r = check_cptp(m, 1e-8);
      if (!r.pass) {
        throw NumericalError("reconstruct_family: map (" + std::to_string(i) + "," +
                             std::to_string(j) + ") is not CPTP (trace dev " +
                             std::to_string(r.trace_dev) + ", Choi min eig " +
                             std::to_string(r.choi_min_eig) + ")");
      }
      family.set(i, j, std::move(m));
    }
  }
  return family;
}

inline DynamicalMapFamily reconstruct_family(const LindbladModel& model, const TimeGrid& grid,
                                             const ReferenceStatePolicy& policy, int substeps,
                                             const std::optional<ComplexMatrix>& joint_initial = std::nullopt,
                                             std::optional<int> band = std::nullopt) {
  const PropagatorCache cache(model, grid, substeps);
  const EnvironmentSchedule schedule(policy, model, grid.t0, grid.time(grid.steps),
                                     grid.dt / substeps, joint_initial);
  return reconstruct_family(cache, schedule, band);
}

// ---------------------------------------------------------------------------
// Superchannel and initial-state decomposition

/// tr_E{ U_{t:t0} (A (x) id_E) rho^SE_0 }.
inline ComplexMatrix superchannel_apply(const LindbladModel& model, const Superoperator& preparation,
                                        const ComplexMatrix& rho_se0, double t0, double t,
                                        int substeps) {
  const auto& lay = model.layout;
  if (preparation.dim() != lay.dimS) throw SizeError("superchannel_apply: preparation acts on wrong space");
  if (rho_se0.rows() != lay.joint() || rho_se0.cols() != lay.joint()) {
    throw SizeError("superchannel_apply: joint state has wrong dimension");
  }
  const ComplexMatrix prepared = lift_system_map(preparation, lay).apply(rho_se0);
  return partial_trace(propagator(model, t0, t, substeps).apply(prepared), lay, Keep::System);
}

/// Preparation rho -> tr(rho) sigma.
inline Superoperator replace_preparation(const ComplexMatrix& sigma) {
  const Index d = sigma.rows();
  return Superoperator(vectorize(sigma) * identity_costate(d).adjoint());
}

/// Orthonormal Hermitian operator basis {I/sqrt(d), generalized Gell-Mann}.
inline std::vector<ComplexMatrix> hermitian_basis(Index d) {
  std::vector<ComplexMatrix> basis;
  basis.push_back(ComplexMatrix::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  const double r = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < d; ++j)
    for (Index k = j + 1; k < d; ++k) {
      basis.push_back(r * (ket_bra(d, j, k) + ket_bra(d, k, j)));
      basis.push_back(r * (-kI * ket_bra(d, j, k) + kI * ket_bra(d, k, j)));
    }
  for (Index l = 1; l < d; ++l) {
    ComplexMatrix m = ComplexMatrix::Zero(d, d);
    for (Index i = 0; i < l; ++i) m(i, i) = 1.0;
    m(l, l) = -static_cast<double>(l);
    basis.push_back(m / std::sqrt(static_cast<double>(l * (l + 1))));
  }
  return basis;
}

struct StateDecomposition {
  struct Term {
    Complex coefficient;
    ComplexMatrix system_operator;
    DensityOperator environment_state;
  };
  std::vector<Term> terms;

  ComplexMatrix reconstruct() const {
    ComplexMatrix out;
    for (const auto& t : terms) {
      const ComplexMatrix piece = t.coefficient * kron(t.system_operator, t.environment_state.matrix());
      if (out.size() == 0) out = piece;
      else out += piece;
    }
    return out;
  }
};

/// Writes rho^SE = sum_a c_a X_a (x) tau_a with d_S^2 linearly independent X_a
/// and density operators tau_a.
///
/// Uses the orthonormal Hermitian system basis of diagonal projectors |j><j|
/// and symmetric/antisymmetric off-diagonal pairs. Diagonal environment blocks
/// rho_jj are positive already. An off-diagonal factor Y_(jk) is shifted by
/// lambda (rho_jj + rho_kk) into a positive operator, lambda twice the least
/// shift that works; the compensating -lambda B_(jk) (x) rho_jj and
/// -lambda B_(jk) (x) rho_kk are absorbed into the diagonal terms j and k.
inline StateDecomposition decompose_initial_state(const ComplexMatrix& rho_se0, const SpaceLayout& layout) {
  const Index ds = layout.dimS;
  const Index de = layout.dimE;
  if (rho_se0.rows() != ds * de || rho_se0.cols() != ds * de) {
    throw SizeError("decompose_initial_state: state is not on the joint space");
  }
  if (!check_density(rho_se0, 1e-10, 1e-10, -1e-9).pass) {
    throw ValidationError("decompose_initial_state: input is not a density operator");
  }
  const ComplexMatrix rho_env = hermitian_part(partial_trace(rho_se0, layout, Keep::Environment));
  const ComplexMatrix id_e = ComplexMatrix::Identity(de, de);
  const auto env_factor = [&](const ComplexMatrix& b) {
    return hermitian_part(partial_trace(kron(b, id_e) * rho_se0, layout, Keep::Environment));
  };

  // Least lambda >= 0 with y + lambda z >= 0, z >= 0 and range(y) in range(z).
  const auto least_shift = [](const ComplexMatrix& y, const ComplexMatrix& z) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(z);
    const double zmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
    if (zmax <= 0.0) return 0.0;
    std::vector<Index> support;
    for (Index k = 0; k < z.rows(); ++k)
      if (es.eigenvalues()(k) > 1e-12 * zmax) support.push_back(k);
    ComplexMatrix whiten(z.rows(), static_cast<Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) {
      whiten.col(static_cast<Index>(c)) = es.eigenvectors().col(support[c]) / std::sqrt(es.eigenvalues()(support[c]));
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> ws(hermitian_part(whiten.adjoint() * y * whiten),
                                                    Eigen::EigenvaluesOnly);
    return std::max(0.0, -ws.eigenvalues()(0));
  };

  std::vector<ComplexMatrix> diag_ops(ds);
  std::vector<ComplexMatrix> diag_blocks(ds);
  for (Index j = 0; j < ds; ++j) {
    diag_ops[j] = ket_bra(ds, j, j);
    diag_blocks[j] = env_factor(diag_ops[j]);
  }

  StateDecomposition out;
  out.terms.resize(ds);  // diagonal terms first, filled below
  const double r = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < ds; ++j)
    for (Index k = j + 1; k < ds; ++k) {
      const ComplexMatrix pair[2] = {r * (ket_bra(ds, j, k) + ket_bra(ds, k, j)),
                                     r * (-kI * ket_bra(ds, j, k) + kI * ket_bra(ds, k, j))};
      const ComplexMatrix z = diag_blocks[j] + diag_blocks[k];
      for (const auto& b : pair) {
        const ComplexMatrix y = env_factor(b);
        const double lambda = 2.0 * least_shift(y, z);
        const ComplexMatrix shifted = y + lambda * z;
        const double weight = shifted.trace().real();
        diag_ops[j] -= lambda * b;
        diag_ops[k] -= lambda * b;
        if (weight > 1e-14) {
          out.terms.push_back({weight, b, DensityOperator::unchecked(hermitian_part(shifted / weight))});
        } else {
          out.terms.push_back({0.0, b, DensityOperator::unchecked(rho_env)});
        }
      }
    }
  for (Index j = 0; j < ds; ++j) {
    const double weight = diag_blocks[j].trace().real();
    if (weight > 1e-14) {
      out.terms[j] = {weight, diag_ops[j], DensityOperator::unchecked(diag_blocks[j] / weight)};
    } else {
      out.terms[j] = {0.0, diag_ops[j], DensityOperator::unchecked(rho_env)};
    }
  }
  return out;
}

}  // namespace ttm
