#pragma once

// Transfer tensors: the discrete memory kernel of a family of dynamical maps.
//
//   T^(1)_{N:N-1} = Lambda_{N:N-1}
//   T^(l)_{N:N-l} = Lambda_{N:N-l} - sum_{k=N-l+1}^{N-1} T^(N-k)_{N:k} Lambda_{k:N-l}
//
// and the system state decomposes exactly as
//   rho_k = sum_{j<k} T^(k-j)_{k:j} rho_j + Xi_k .
//
// Tensors are stored by start index. With driving period c steps and
// `transient_steps` initial steps computed explicitly, a tensor starting at
// step j is identified with the one starting at phase(j).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ttm/errors.hpp"
#include "ttm/liouville.hpp"
#include "ttm/model.hpp"
#include "ttm/tomography.hpp"

namespace ttm {

struct MemoryConfig {
  double dt = 1.0;
  int m = 1;                // memory cutoff in steps, t_m = m dt
  int c = 1;                // driving period in steps
  int transient_steps = 0;  // leading start indices stored without periodic reuse

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("memory config: dt must be > 0");
    if (m < 1) throw DomainError("memory config: m must be >= 1");
    if (c < 1) throw DomainError("memory config: c must be >= 1");
    if (transient_steps < 0) throw DomainError("memory config: transient_steps must be >= 0");
  }

  /// Number of distinct start indices that must be computed.
  int stored_starts() const { return transient_steps + c; }

  int phase(int j) const {
    if (j < stored_starts()) return j;
    return (j - transient_steps) % c + transient_steps;
  }

  static MemoryConfig periodic(double dt, int m, int c, int transient = 0) {
    return MemoryConfig{dt, m, c, transient};
  }
  /// No periodic reuse: every start index below `horizon` is computed.
  static MemoryConfig aperiodic(double dt, int m, int horizon) {
    return MemoryConfig{dt, m, 1, std::max(0, horizon - 1)};
  }
};

/// Driving period in grid steps if `period` is an integer multiple of dt.
inline std::optional<int> steps_per_period(std::optional<double> period, double dt) {
  if (!period) return std::nullopt;
  const double ratio = *period / dt;
  const double r = std::round(ratio);
  if (r >= 1.0 && std::abs(ratio - r) <= 1e-9 * std::max(1.0, ratio)) return static_cast<int>(r);
  return std::nullopt;
}

class TransferTensorSet {
 public:
  TransferTensorSet() = default;
  TransferTensorSet(MemoryConfig config, int max_length, Index dim)
      : config_(config), max_length_(max_length), dim_(dim) {
    tensors_.assign(config.stored_starts(), std::vector<Superoperator>(max_length));
  }

  const MemoryConfig& config() const { return config_; }
  int max_length() const { return max_length_; }
  Index dim() const { return dim_; }

  bool has(int phase, int length) const {
    return phase >= 0 && phase < config_.stored_starts() && length >= 1 && length <= max_length_ &&
           tensors_[phase][length - 1].dim() == dim_;
  }

  /// T^(length) starting at absolute step `start`.
  const Superoperator& at(int start, int length) const {
    if (start < 0) throw CoverageError("transfer tensor: negative start index");
    const int p = config_.phase(start);
    if (!has(p, length)) {
      throw CoverageError("transfer tensor T^(" + std::to_string(length) + ") at phase " +
                          std::to_string(p) + " not stored (max length " +
                          std::to_string(max_length_) + ")");
    }
    return tensors_[p][length - 1];
  }
  /// T^(length) stored at `phase` directly.
  const Superoperator& at_phase(int phase, int length) const {
    if (!has(phase, length)) throw CoverageError("transfer tensor not stored at phase");
    return tensors_[phase][length - 1];
  }
  void set(int phase, int length, Superoperator t) { tensors_.at(phase).at(length - 1) = std::move(t); }

  /// Xi_k for k = 1..residual_count(); index 0 unused.
  int residual_count() const { return static_cast<int>(residuals_.size()) - 1; }
  const ComplexMatrix& residual(int k) const {
    if (k < 1 || k > residual_count()) {
      throw CoverageError("inhomogeneous residual at step " + std::to_string(k) + " not tracked");
    }
    return residuals_[k];
  }
  void set_residuals(std::vector<ComplexMatrix> r) { residuals_ = std::move(r); }

 private:
  MemoryConfig config_;
  int max_length_ = 0;
  Index dim_ = 0;
  std::vector<std::vector<Superoperator>> tensors_;
  std::vector<ComplexMatrix> residuals_;
};

/// All tensors sharing end index N: result[l] = T^(l)_{N:N-l}, l = 1..min(max_length, N).
inline std::vector<Superoperator> tensors_ending_at(const DynamicalMapFamily& family, int end,
                                                    int max_length) {
  const int lmax = std::min(max_length, end);
  std::vector<Superoperator> t(lmax + 1);
  if (lmax < 1) return t;
  t[1] = family.at(end - 1, end);
  for (int l = 2; l <= lmax; ++l) {
    const int j = end - l;
    ComplexMatrix acc = family.at(j, end).matrix();
    for (int k = j + 1; k <= end - 1; ++k) acc.noalias() -= t[end - k].matrix() * family.at(j, k).matrix();
    t[l] = Superoperator(std::move(acc));
  }
  return t;
}

/// Builds tensors for start phases [0, stored_starts) and lengths 1..max_length
/// (default config.m; error bounds need 2m - 1).
inline TransferTensorSet build_tensors(const DynamicalMapFamily& family, const MemoryConfig& config,
                                       std::optional<int> max_length = std::nullopt) {
  config.validate();
  const int len = max_length.value_or(config.m);
  if (len < 1) throw DomainError("build_tensors: max_length must be >= 1");
  const int starts = config.stored_starts();
  const int last_end = starts - 1 + len;
  if (family.grid().steps < last_end) {
    throw CoverageError("build_tensors: family covers steps 0.." + std::to_string(family.grid().steps) +
                        ", tensors need maps up to step " + std::to_string(last_end));
  }
  if (family.band() < std::min(len, last_end)) {
    throw CoverageError("build_tensors: family band " + std::to_string(family.band()) +
                        " shorter than tensor length " + std::to_string(len));
  }
  TransferTensorSet set(config, len, family.layout().dimS);
  for (int end = 1; end <= last_end; ++end) {
    auto t = tensors_ending_at(family, end, len);
    for (int l = 1; l < static_cast<int>(t.size()); ++l) {
      const int start = end - l;
      if (start < starts) set.set(start, l, std::move(t[l]));
    }
  }
  return set;
}

/// Operator norm of Lambda_{N:j} - sum_{k=j+1}^{N} T^(N-k)... re-substituted,
/// i.e. max over j of || Lambda_{N:j} - T^(N-j) - sum_k T^(N-k) Lambda_{k:j} ||.
inline double recursion_residual(const DynamicalMapFamily& family, const TransferTensorSet& set, int end) {
  double worst = 0.0;
  const int lmax = std::min(set.max_length(), end);
  for (int l = 1; l <= lmax; ++l) {
    const int j = end - l;
    ComplexMatrix acc = family.at(j, end).matrix() - set.at(j, l).matrix();
    for (int k = j + 1; k <= end - 1; ++k) acc -= set.at(k, end - k).matrix() * family.at(j, k).matrix();
    worst = std::max(worst, operator_norm(acc));
  }
  return worst;
}

/// Xi_k = rho_k - sum_{j<k} T^(k-j)_{k:j} rho_j  (full memory, no cutoff).
inline ComplexMatrix inhomogeneous_residual(const Trajectory& exact_states, const TransferTensorSet& set,
                                            int k) {
  if (k < 1) throw ArgumentError("inhomogeneous_residual: k must be >= 1");
  if (k >= static_cast<int>(exact_states.size())) {
    throw ArgumentError("inhomogeneous_residual: exact states cover steps 0.." +
                        std::to_string(exact_states.size() - 1) + ", asked for " + std::to_string(k));
  }
  ComplexMatrix xi = exact_states[k];
  for (int j = 0; j < k; ++j) xi -= set.at(j, k - j).apply(exact_states[j]);
  return xi;
}

/// Stores Xi_1..Xi_kmax (default m) in the set.
inline void attach_residuals(TransferTensorSet& set, const Trajectory& exact_states,
                             std::optional<int> kmax = std::nullopt) {
  const int n = kmax.value_or(set.config().m);
  std::vector<ComplexMatrix> r(n + 1);
  r[0] = ComplexMatrix::Zero(set.dim(), set.dim());
  for (int k = 1; k <= n; ++k) r[k] = inhomogeneous_residual(exact_states, set, k);
  set.set_residuals(std::move(r));
}

/// rho_k = sum_{l=1}^{min(m,k)} T^(l)_{k:k-l} rho_{k-l} (+ Xi_k, k <= tracked)
/// for k >= seed size. States are re-Hermitized, never re-positivized.
inline Trajectory propagate(const TransferTensorSet& set, const Trajectory& seed, int total_steps,
                            bool include_residuals) {
  const int m = set.config().m;
  const int seeded = static_cast<int>(seed.size());
  if (seeded < 1) throw ArgumentError("propagate: seed is empty");
  if (!include_residuals && seeded < std::min(m, total_steps + 1)) {
    throw ArgumentError("propagate: seed covers " + std::to_string(seeded) + " steps, memory needs " +
                        std::to_string(m));
  }
  if (include_residuals && seeded <= std::min(m, total_steps) && set.residual_count() < std::min(m, total_steps)) {
    throw ArgumentError("propagate: residuals tracked to step " + std::to_string(set.residual_count()) +
                        ", propagation from step " + std::to_string(seeded) + " needs them to step " +
                        std::to_string(std::min(m, total_steps)));
  }
  Trajectory out(seed.begin(), seed.begin() + std::min(seeded, total_steps + 1));
  out.reserve(total_steps + 1);
  const Index d = set.dim();
  ComplexVector acc(d * d);
  for (int k = seeded; k <= total_steps; ++k) {
    acc.setZero();
    for (int l = 1; l <= std::min(m, k); ++l) acc.noalias() += set.at(k - l, l).matrix() * vectorize(out[k - l]);
    ComplexMatrix rho = devectorize(acc, d, d);
    if (include_residuals && k <= set.residual_count()) rho += set.residual(k);
    out.push_back(hermitian_part(rho));
  }
  return out;
}

/// Sum_{l=1}^{m} || T^(2m-l) from step k-2m+l to step k ||, start indices
/// reduced modulo the driving period.
inline double error_bound(const TransferTensorSet& set, int k) {
  const auto& cfg = set.config();
  const int m = cfg.m;
  if (set.max_length() < 2 * m - 1) {
    throw CoverageError("error_bound: needs tensors to length " + std::to_string(2 * m - 1) +
                        ", set holds " + std::to_string(set.max_length()));
  }
  int x = k - 2 * m;
  if (x < 0) {
    if (cfg.transient_steps != 0) throw CoverageError("error_bound: k < 2m inside transient window");
    x = ((x % cfg.c) + cfg.c) % cfg.c;
  }
  double sum = 0.0;
  for (int l = 1; l <= m; ++l) sum += operator_norm(set.at(x + l, 2 * m - l));
  return sum;
}

/// Largest error_bound over one driving period past the transients.
inline double error_bound_max(const TransferTensorSet& set) {
  const auto& cfg = set.config();
  double worst = 0.0;
  const int k0 = cfg.transient_steps + 2 * cfg.m;
  for (int k = k0; k < k0 + cfg.c; ++k) worst = std::max(worst, error_bound(set, k));
  return worst;
}

/// max over one period of || T^(m) ||, the tighter empirical error estimate.
inline double longest_tensor_norm(const TransferTensorSet& set) {
  const auto& cfg = set.config();
  double worst = 0.0;
  for (int p = cfg.transient_steps; p < cfg.stored_starts(); ++p) {
    worst = std::max(worst, operator_norm(set.at_phase(p, cfg.m)));
  }
  return worst;
}

struct TensorNorm {
  int phase;
  int length;
  double norm;
};

inline std::vector<TensorNorm> tensor_norm_profile(const TransferTensorSet& set) {
  std::vector<TensorNorm> out;
  for (int p = 0; p < set.config().stored_starts(); ++p)
    for (int l = 1; l <= set.max_length(); ++l)
      if (set.has(p, l)) out.push_back({p, l, operator_norm(set.at_phase(p, l))});
  return out;
}

// ---------------------------------------------------------------------------
// Correlated initial states without the inhomogeneous term

struct CorrelationFreeResult {
  Trajectory combined;
  std::vector<Trajectory> branches;  // propagated X_a, not weighted
  std::vector<Complex> coefficients;
};

/// Reference policy for a decomposition branch with initial environment tau;
/// the branch reference state at t0 equals tau, so no residual arises.
inline EnvironmentSchedule branch_schedule(const ReferenceStatePolicy& policy, const LindbladModel& model,
                                           const TimeGrid& grid, int substeps, const ComplexMatrix& tau) {
  const auto& lay = model.layout;
  const double t_max = grid.time(grid.steps);
  const double res = grid.dt / substeps;
  if (policy.is_time_independent()) {
    return EnvironmentSchedule(ReferenceStatePolicy::fixed(DensityOperator::unchecked(tau)), model,
                               grid.t0, t_max, res);
  }
  const ComplexMatrix mixed_sys = ComplexMatrix::Identity(lay.dimS, lay.dimS) / static_cast<double>(lay.dimS);
  return EnvironmentSchedule(policy, model, grid.t0, t_max, res, kron(mixed_sys, tau));
}

/// Propagates each uncorrelated branch X_a (x) tau_a with its own map family
/// and cutoff tensors, then recombines with the coefficients c_a.
inline CorrelationFreeResult propagate_correlation_free(const LindbladModel& model,
                                                        const StateDecomposition& decomposition,
                                                        const PropagatorCache& cache,
                                                        const ReferenceStatePolicy& policy,
                                                        const MemoryConfig& config, int total_steps) {
  const auto& lay = model.layout;
  if (decomposition.terms.size() != static_cast<std::size_t>(lay.dimS * lay.dimS)) {
    throw ValidationError("propagate_correlation_free: decomposition must have d_S^2 terms");
  }
  const int m = config.m;
  const int band = m;
  CorrelationFreeResult out;
  for (const auto& term : decomposition.terms) {
    if (term.system_operator.rows() != lay.dimS || term.environment_state.dim() != lay.dimE) {
      throw ValidationError("propagate_correlation_free: decomposition term has wrong dimensions");
    }
    if (!check_density(term.environment_state.matrix(), 1e-10, 1e-10, -1e-9).pass) {
      throw ValidationError("propagate_correlation_free: branch environment is not a state");
    }
    const auto schedule = branch_schedule(policy, model, cache.grid(), cache.substeps(),
                                          term.environment_state.matrix());
    const auto family = reconstruct_family(cache, schedule, band);
    const auto tensors = build_tensors(family, config);
    Trajectory seed{term.system_operator};
    for (int k = 1; k < std::min(m, total_steps + 1); ++k) seed.push_back(family.at(0, k).apply(term.system_operator));
    out.branches.push_back(propagate(tensors, seed, total_steps, false));
    out.coefficients.push_back(term.coefficient);
  }
  out.combined.assign(total_steps + 1, ComplexMatrix::Zero(lay.dimS, lay.dimS));
  for (std::size_t a = 0; a < out.branches.size(); ++a)
    for (int k = 0; k <= total_steps; ++k) out.combined[k] += out.coefficients[a] * out.branches[a][k];
  return out;
}

}  // namespace ttm
