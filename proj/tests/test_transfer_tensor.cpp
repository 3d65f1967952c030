#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "ttm/transfer_tensor.hpp"

using namespace ttm;
using namespace testing_util;

namespace {

const SpaceLayout kLay{2, 2};

ComplexMatrix env0() { return partial_trace(example_initial_state().matrix(), kLay, Keep::Environment); }

ReferenceStatePolicy fixed_env0() { return ReferenceStatePolicy::fixed(DensityOperator::unchecked(env0())); }

Trajectory reduced(const Trajectory& joint, const SpaceLayout& lay) {
  Trajectory out;
  for (const auto& x : joint) out.push_back(partial_trace(x, lay, Keep::System));
  return out;
}

// Single damped qubit with a trivial one-dimensional environment.
LindbladModel damped_qubit() {
  LindbladModel m;
  m.layout = SpaceLayout{2, 1};
  m.hamiltonian = [](double) { ComplexMatrix h = 0.5 * pauli::Z(); return h; };
  m.jumps = {{ket_bra(2, 0, 1), 0.3}, {pauli::Z(), 0.05}};
  return m;
}

}  // namespace

TEST_CASE("memory configuration") {
  const auto p = MemoryConfig::periodic(0.1, 4, 5, 2);
  CHECK(p.stored_starts() == 7);
  CHECK(p.phase(1) == 1);
  CHECK(p.phase(7) == 2);
  CHECK(p.phase(13) == 3);
  const auto a = MemoryConfig::aperiodic(0.625, 8, 100);
  CHECK(a.c == 1);
  CHECK(a.transient_steps == 99);
  CHECK(a.phase(50) == 50);
  CHECK(steps_per_period(std::numbers::pi, std::numbers::pi / 5).value() == 5);
  CHECK_FALSE(steps_per_period(std::numbers::pi, 0.625).has_value());
  CHECK_FALSE(steps_per_period(std::nullopt, 0.625).has_value());
  CHECK_THROWS_AS(MemoryConfig::periodic(0.1, 0, 1).validate(), DomainError);
}

TEST_CASE("recursion reproduces the maps") {
  const auto model = example_model();
  const TimeGrid g{0.0, 0.625, 20};
  const auto fam = reconstruct_family(model, g, fixed_env0(), 64);
  const auto cfg = MemoryConfig::aperiodic(g.dt, 7, 14);
  const auto set = build_tensors(fam, cfg);
  for (int end = 1; end <= 14; ++end) CHECK(recursion_residual(fam, set, end) <= 1e-12);
  CHECK(max_abs(set.at(3, 1).matrix() - fam.at(3, 4).matrix()) == 0.0);
  CHECK_THROWS_AS(build_tensors(fam, MemoryConfig::aperiodic(g.dt, 8, 14)), CoverageError);
}

TEST_CASE("full memory with residuals is exact") {
  const auto model = example_model();
  const ComplexMatrix rho0 = example_initial_state().matrix();
  const int n = 16;
  const TimeGrid g{0.0, 0.625, 2 * n};
  const PropagatorCache cache(model, g, 64);
  const Trajectory exact = reduced(evolve_state(rho0, cache), kLay);
  for (const auto& policy : {fixed_env0(), ReferenceStatePolicy::true_environment()}) {
    const EnvironmentSchedule sched(policy, model, g.t0, g.time(g.steps), g.dt / 64, rho0);
    const auto fam = reconstruct_family(cache, sched);
    auto set = build_tensors(fam, MemoryConfig::aperiodic(g.dt, n, n));
    attach_residuals(set, exact, n);
    const Trajectory got = propagate(set, Trajectory{exact[0]}, n, true);
    REQUIRE(got.size() == static_cast<std::size_t>(n + 1));
    double worst = 0.0;
    for (int k = 0; k <= n; ++k) worst = std::max(worst, trace_distance(got[k], exact[k]));
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("semigroup dynamics has no memory") {
  const auto model = damped_qubit();
  const TimeGrid g{0.0, 0.25, 10};
  const auto fam = reconstruct_family(model, g, ReferenceStatePolicy::fixed(DensityOperator::unchecked(ComplexMatrix::Identity(1, 1))), 32);
  const auto set = build_tensors(fam, MemoryConfig::periodic(g.dt, 5, 1));
  CHECK(operator_norm(set.at(0, 1)) > 0.5);
  for (int l = 2; l <= 5; ++l) CHECK(operator_norm(set.at(0, l)) <= 1e-10);
}

TEST_CASE("uncorrelated start with the matching reference state") {
  const auto model = example_model();
  const ComplexMatrix tau = random_density(2);
  const ComplexMatrix rho0 = kron(random_density(2), tau);
  const TimeGrid g{0.0, 0.625, 12};
  const PropagatorCache cache(model, g, 32);
  const Trajectory exact = reduced(evolve_state(rho0, cache), kLay);
  const EnvironmentSchedule sched(ReferenceStatePolicy::fixed(DensityOperator::unchecked(tau)), model, 0, g.time(12), g.dt / 32);
  auto set = build_tensors(reconstruct_family(cache, sched), MemoryConfig::aperiodic(g.dt, 6, 6));
  attach_residuals(set, exact, 6);
  for (int k = 1; k <= 6; ++k) CHECK(max_abs(set.residual(k)) <= 1e-10);
  CHECK_THROWS_AS(set.residual(7), CoverageError);
}

TEST_CASE("example tensors decay and keep states physical") {
  const auto model = example_model();
  const ComplexMatrix rho0 = example_initial_state().matrix();
  const int m = 8, total = 60;
  const TimeGrid g{0.0, 0.625, total};
  const PropagatorCache cache(model, g, 64);
  const Trajectory exact = reduced(evolve_state(rho0, cache), kLay);
  const EnvironmentSchedule sched(fixed_env0(), model, 0, g.time(total), g.dt / 64);
  const auto fam = reconstruct_family(cache, sched, 2 * m - 1);
  auto set = build_tensors(fam, MemoryConfig::aperiodic(g.dt, m, total - 2 * m + 2), 2 * m - 1);
  attach_residuals(set, exact, m);
  for (int start : {0, 10, 30}) CHECK(operator_norm(set.at(start, 8)) < operator_norm(set.at(start, 2)));
  const Trajectory got = propagate(set, Trajectory{exact[0]}, total, true);
  for (const auto& r : got) {
    CHECK(hermiticity_deviation(r) == 0.0);
    CHECK(std::abs(r.trace() - 1.0) < 1e-10);
  }
  // maps are trace preserving, so every tensor beyond the first annihilates the trace
  for (int l = 2; l <= m; ++l) CHECK(trace_annihilation_deviation(set.at(5, l)) < 1e-10);
  CHECK(error_bound(set, 40) > 0.0);
  CHECK(longest_tensor_norm(set) > 0.0);
  CHECK(tensor_norm_profile(set).size() > 0);
}

TEST_CASE("periodic driving repeats the tensors") {
  const auto model = example_model();
  const double dt = std::numbers::pi / 5;
  const int c = 5, m = 4;
  const TimeGrid g{0.0, dt, 3 * c + m};
  const auto fam = reconstruct_family(model, g, fixed_env0(), 64, std::nullopt, m);
  const auto explicit_set = build_tensors(fam, MemoryConfig::aperiodic(dt, m, 3 * c));
  for (int p = 0; p < 2 * c; ++p)
    for (int l = 1; l <= m; ++l) CHECK(max_abs(explicit_set.at(p, l).matrix() - explicit_set.at(p + c, l).matrix()) <= 1e-8);
  const auto periodic_set = build_tensors(fam, MemoryConfig::periodic(dt, m, c));
  for (int l = 1; l <= m; ++l) CHECK(max_abs(periodic_set.at(13, l).matrix() - explicit_set.at(13, l).matrix()) <= 1e-8);
}

TEST_CASE("propagation argument checks") {
  const auto model = example_model();
  const TimeGrid g{0.0, 0.625, 8};
  const auto fam = reconstruct_family(model, g, fixed_env0(), 16);
  const auto set = build_tensors(fam, MemoryConfig::periodic(g.dt, 4, 1));
  CHECK_THROWS_AS(propagate(set, Trajectory{}, 5, false), ArgumentError);
  CHECK_THROWS_AS(propagate(set, Trajectory{env0()}, 5, false), ArgumentError);
  CHECK_THROWS_AS(propagate(set, Trajectory{env0()}, 5, true), ArgumentError);
  CHECK_THROWS_AS(error_bound(set, 10), CoverageError);
}

TEST_CASE("correlation-free propagation") {
  const auto model = example_model();
  const int total = 16;
  const TimeGrid g{0.0, 0.625, 2 * total};  // full-memory tensors need maps to step 2 total - 1
  const PropagatorCache cache(model, g, 32);
  SECTION("product state") {
    const ComplexMatrix tau = random_density(2), rho = random_density(2);
    const ComplexMatrix rho0 = kron(rho, tau);
    const auto dec = decompose_initial_state(rho0, kLay);
    const auto res = propagate_correlation_free(model, dec, cache, ReferenceStatePolicy::fixed(DensityOperator::unchecked(tau)),
                                                MemoryConfig::aperiodic(g.dt, total, total), total);
    const Trajectory exact = reduced(evolve_state(rho0, cache), kLay);
    for (int k = 0; k <= total; ++k) CHECK(trace_distance(res.combined[k], exact[k]) < 1e-10);
  }
  SECTION("correlated example state") {
    const ComplexMatrix rho0 = example_initial_state().matrix();
    const auto dec = decompose_initial_state(rho0, kLay);
    Complex trace_sum = 0.0;
    for (const auto& t : dec.terms) trace_sum += t.coefficient * t.system_operator.trace();
    CHECK(std::abs(trace_sum - 1.0) < 1e-14);
    // full memory: each branch is exact, so the recombination is too
    const auto res = propagate_correlation_free(model, dec, cache, fixed_env0(), MemoryConfig::aperiodic(g.dt, total, total), total);
    const Trajectory exact = reduced(evolve_state(rho0, cache), kLay);
    for (int k = 0; k <= total; ++k) CHECK(trace_distance(res.combined[k], exact[k]) < 1e-9);
    CHECK(res.branches.size() == 4);
  }
  SECTION("wrong number of terms") {
    StateDecomposition dec;
    CHECK_THROWS_AS(propagate_correlation_free(model, dec, cache, fixed_env0(), MemoryConfig::periodic(g.dt, 2, 1), 4),
                    ValidationError);
  }
}
