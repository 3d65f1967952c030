// Acceptance suite: one PASS/FAIL line per criterion with the measured
// values. Exit status is the number of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ttm/config.hpp"
#include "ttm/experiments.hpp"
#include "ttm/memory_kernel.hpp"

using namespace ttm;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail, double seconds) {
  std::printf("%s [%2d] %s: %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

const SpaceLayout kLay{2, 2};
const double kDt = 0.625;

ComplexMatrix rho0() { return example_initial_state().matrix(); }
ComplexMatrix env0() { return partial_trace(rho0(), kLay, Keep::Environment); }

Trajectory reduced(const Trajectory& joint, const SpaceLayout& lay) {
  Trajectory out;
  for (const auto& x : joint) out.push_back(partial_trace(x, lay, Keep::System));
  return out;
}

std::vector<ReferenceStatePolicy> all_policies() {
  return {ReferenceStatePolicy::fixed(DensityOperator::unchecked(env0())), ReferenceStatePolicy::true_environment(),
          ReferenceStatePolicy::frozen(ket_bra(2, 0, 0))};
}

void full_memory() {
  Timer tm;
  const auto model = example_model();
  const int n = 16;  // omega t in [0, 10]
  const TimeGrid g{0.0, kDt, 2 * n};
  const PropagatorCache cache(model, g, kDefaultSubsteps);
  const Trajectory exact = reduced(evolve_state(rho0(), cache), kLay);
  const EnvironmentSchedule sched(all_policies()[0], model, 0, g.time(g.steps), g.dt / kDefaultSubsteps);
  auto set = build_tensors(reconstruct_family(cache, sched), MemoryConfig::aperiodic(kDt, n, n));
  attach_residuals(set, exact, n);
  const Trajectory got = propagate(set, Trajectory{exact[0]}, n, true);
  double worst = 0.0;
  for (int k = 0; k <= n; ++k) worst = std::max(worst, trace_distance(got[k], exact[k]));
  report(1, "full-memory decomposition is exact", worst <= 1e-10, fmt("max trace distance %.3g over %d steps (<= 1e-10)", worst, n),
         tm.seconds());
}

void semigroup() {
  Timer tm;
  LindbladModel model;
  model.layout = SpaceLayout{2, 1};
  model.hamiltonian = [](double) { ComplexMatrix h = 0.5 * pauli::Z() + 0.2 * pauli::X(); return h; };
  model.jumps = {{ket_bra(2, 0, 1), 0.3}, {pauli::Z(), 0.05}};
  const double dt = 0.25;
  const int steps = 40;
  const TimeGrid g{0.0, dt, steps};
  const PropagatorCache cache(model, g, kDefaultSubsteps);
  const EnvironmentSchedule sched(ReferenceStatePolicy::fixed(DensityOperator::unchecked(ComplexMatrix::Identity(1, 1))), model, 0,
                                  g.time(steps), dt / kDefaultSubsteps);
  const auto fam = reconstruct_family(cache, sched);
  const auto long_set = build_tensors(fam, MemoryConfig::aperiodic(dt, 10, 20));
  double worst_tail = 0.0;
  for (int s = 0; s < 20; ++s)
    for (int l = 2; l <= 10; ++l) worst_tail = std::max(worst_tail, operator_norm(long_set.at(s, l)));
  const auto m1 = build_tensors(fam, MemoryConfig::aperiodic(dt, 1, steps));
  ComplexMatrix start(2, 2);
  start << 0.3, Complex(0.2, -0.1), Complex(0.2, 0.1), 0.7;
  const Trajectory exact = reduced(evolve_state(start, cache), model.layout);
  const Trajectory got = propagate(m1, Trajectory{start}, steps, false);
  double worst = 0.0;
  for (int k = 0; k <= steps; ++k) worst = std::max(worst, trace_distance(got[k], exact[k]));
  report(2, "semigroup has no memory", worst_tail <= 1e-10 && worst <= 1e-10,
         fmt("max ||T^(l>=2)|| %.3g, m=1 propagation error %.3g (both <= 1e-10)", worst_tail, worst), tm.seconds());
}

void stability() {
  Timer tm;
  ExperimentConfig cfg;  // example model, fixed tr_S rho0, dt 5/8, m 8, 160 steps
  const int total = cfg.grid.steps;
  const auto b = detail::build_for(cfg, cfg.make_policy(), total, cfg.m);
  const Trajectory exact = reduced(evolve_state(cfg.initial_state, PropagatorCache(cfg.model, cfg.grid, cfg.substeps)), kLay);
  const Trajectory got = propagate(b.set, Trajectory{exact[0]}, total, true);
  double early = 0.0, late = 0.0;
  for (int k = 0; k <= total; ++k) {
    const double t = cfg.grid.time(k), e = trace_distance(got[k], exact[k]);
    if (t >= 5.0 - 1e-9 && t <= 10.0 + 1e-9) early = std::max(early, e);
    if (t >= 10.0 - 1e-9) late = std::max(late, e);
  }
  report(3, "long-time stability", late <= 3.0 * early,
         fmt("max error %.4g on [10,100] vs %.4g on [5,10] (ratio %.3g <= 3; storage %s)", late, early, late / early,
             b.set.config().c == 1 ? "aperiodic" : "periodic"),
         tm.seconds());
}

void bound_validity() {
  Timer tm;
  ExperimentConfig cfg;
  const auto cells = error_sweep(cfg);
  const double smallest_tm = *std::min_element(cfg.sweep_tm.begin(), cfg.sweep_tm.end());
  int physical = 0, within = 0, unphysical_small = 0;
  std::string violations;
  for (const auto& c : cells) {
    std::printf("       cell t_m=%-6g dt=%-8g m=%-3d error=%-10.4g bound=%-10.4g %s\n", c.t_m, c.dt, c.m, c.long_time_error,
                c.bound, c.physical ? (c.long_time_error <= c.bound ? "ok" : "ERROR > BOUND") : "unphysical");
    if (c.physical) {
      ++physical;
      if (c.long_time_error <= c.bound) ++within;
      else violations += fmt(" (t_m %g, dt %g)", c.t_m, c.dt);
    } else if (c.t_m == smallest_tm) {
      ++unphysical_small;
    }
  }
  const bool pass = within == physical && unphysical_small > 0;
  report(4, "error bound holds in physical cells", pass,
         fmt("%d/%d physical cells within bound, %d unphysical at smallest t_m%s%s", within, physical, unphysical_small,
             violations.empty() ? "" : "; exceeded at", violations.c_str()),
         tm.seconds());
}

void periodicity() {
  Timer tm;
  const auto model = example_model();
  const double dt = std::numbers::pi / 5;
  const int c = 5, m = 8, periods = 3;
  const TimeGrid g{0.0, dt, periods * c - 1 + m};
  const auto fam = reconstruct_family(model, g, all_policies()[0], kDefaultSubsteps, std::nullopt, m);
  const auto set = build_tensors(fam, MemoryConfig::aperiodic(dt, m, periods * c));
  double worst = 0.0;
  for (int p = 0; p < (periods - 1) * c; ++p)
    for (int l = 1; l <= m; ++l) worst = std::max(worst, operator_norm(set.at(p, l).matrix() - set.at(p + c, l).matrix()));
  report(5, "tensors repeat with the drive period", worst <= 1e-8,
         fmt("max ||T(p) - T(p+c)|| %.3g, c=%d, lengths 1..%d (<= 1e-8)", worst, c, m), tm.seconds());
}

void projector_identities() {
  Timer tm;
  const auto model = example_model();
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  double worst = 0.0;
  for (const auto& p : all_policies()) {
    const ProjectorChoice choice{EnvironmentSchedule(p, model, 0.0, 10.0, 1.0 / 256, rho0())};
    for (int k = 0; k < 100; ++k) {
      const double t = u(gen), s = u(gen);
      const auto [pt, qt] = projector_superop(choice, t);
      const auto [ps, qs] = projector_superop(choice, s);
      const ComplexMatrix &Pt = pt.matrix(), &Qt = qt.matrix(), &Ps = ps.matrix(), &Qs = qs.matrix();
      worst = std::max({worst, operator_norm(Pt * Ps - Pt), operator_norm(Qt * Qs - Qs), operator_norm(Pt * Qs),
                        operator_norm(Qt * Ps - (Ps - Pt))});
    }
  }
  report(6, "projector identities", worst <= 1e-12, fmt("max deviation %.3g over 100 pairs x 3 policies (<= 1e-12)", worst),
         tm.seconds());
}

void convergence() {
  Timer tm;
  const auto model = example_model();
  const ProjectorChoice fixed{EnvironmentSchedule(all_policies()[0], model, 0.0, 6.0, 1.0 / 512)};
  const std::vector<int> ns{8, 16, 32, 64};
  const auto pts = convergence_study(fixed, {2.5, 5.0}, ns, 32);
  auto rel = [&](double t, int n) {
    for (const auto& p : pts)
      if (p.t == t && p.n == n) return p.relative_difference;
    return std::nan("");
  };
  bool pass = true;
  for (double t : {2.5, 5.0}) pass = pass && rel(t, 64) < 0.95 * rel(t, 8);
  for (int n : ns) pass = pass && rel(5.0, n) > 1.05 * rel(2.5, n);
  std::string detail;
  for (double t : {2.5, 5.0}) {
    detail += fmt("t=%g:", t);
    for (int n : ns) detail += fmt(" N%d %.3g", n, rel(t, n));
    detail += "; ";
  }
  report(7, "discrete kernel converges", pass, detail + "N=64 < 0.95 N=8 and t=5 > 1.05 t=2.5", tm.seconds());
}

void kernel_ordering() {
  Timer tm;
  ExperimentConfig cfg;
  std::vector<double> times;
  for (int k = 1; k <= 40; ++k) times.push_back(0.25 * k);
  const auto choices = standard_choices(cfg, 11.0, 1.0 / 256);
  const auto curve = kernel_norm_curve(choices, times, 256);
  bool finite = true;
  double fixed5 = NAN, true5 = NAN, frozen5 = NAN;
  for (const auto& p : curve) {
    finite = finite && std::isfinite(p.norm);
    if (p.t == 5.0) {
      if (p.choice == "fixed") fixed5 = p.norm;
      if (p.choice == "true-env") true5 = p.norm;
      if (p.choice == "frozen") frozen5 = p.norm;
    }
  }
  report(8, "true environment gives the smaller kernel", finite && true5 < fixed5,
         fmt("||K|| at t=5: true-env %.4g, fixed %.4g, frozen %.4g; curves finite: %s", true5, fixed5, frozen5,
             finite ? "yes" : "no"),
         tm.seconds());
}

void correlation_free() {
  Timer tm;
  const auto model = example_model();
  const auto dec = decompose_initial_state(rho0(), kLay);
  const double reassembly = (dec.reconstruct() - rho0()).cwiseAbs().maxCoeff();
  // exact branch evolution, omega t in [0, 10]
  const int short_steps = 16;
  const PropagatorCache short_cache(model, TimeGrid{0.0, kDt, short_steps}, kDefaultSubsteps);
  const Trajectory exact_short = reduced(evolve_state(rho0(), short_cache), kLay);
  std::vector<Trajectory> branch_exact;
  for (const auto& t : dec.terms)
    branch_exact.push_back(reduced(evolve_state(kron(t.system_operator, t.environment_state.matrix()), short_cache), kLay));
  double combine = 0.0;
  for (int k = 0; k <= short_steps; ++k) {
    ComplexMatrix sum = ComplexMatrix::Zero(2, 2);
    for (std::size_t a = 0; a < dec.terms.size(); ++a) sum += dec.terms[a].coefficient * branch_exact[a][k];
    combine = std::max(combine, trace_distance(sum, exact_short[k]));
  }
  // tensor-propagated branches, m = 8, omega t in [0, 100]
  const int m = 8, total = 160;
  const PropagatorCache cache(model, TimeGrid{0.0, kDt, total + m}, kDefaultSubsteps);
  const Trajectory exact = reduced(evolve_state(rho0(), cache), kLay);
  std::string detail = fmt("reassembly %.3g, exact branches %.3g, tensor branches:", reassembly, combine);
  bool tensors_ok = true;
  for (const auto& p : all_policies()) {
    const auto res = propagate_correlation_free(model, dec, cache, p, MemoryConfig::aperiodic(kDt, m, total), total);
    double worst = 0.0;
    for (int k = 0; k <= total; ++k) worst = std::max(worst, trace_distance(res.combined[k], exact[k]));
    tensors_ok = tensors_ok && worst <= 2e-2;
    detail += fmt(" %s %.3g", p.name().c_str(), worst);
  }
  report(9, "correlation-free branch combination", reassembly <= 1e-12 && combine <= 1e-9 && tensors_ok,
         detail + " (limits 1e-12, 1e-9, 2e-2; dt 5/8)", tm.seconds());
}

void x_independence() {
  Timer tm;
  const auto model = example_model();
  ComplexMatrix x1(2, 2), x2(2, 2);
  x1 << 0.8, 0.1, 0.1, 0.2;
  x2 << 2.0, Complex(0.3, 0.4), Complex(0.3, -0.4), -1.0;
  const std::vector<std::pair<double, double>> pairs{{0.0, 1.0}, {0.5, 2.0}, {1.0, 4.0}, {2.0, 2.5}, {0.25, 3.0},
                                                     {3.0, 3.5}, {1.5, 5.0}, {0.0, 6.0}, {4.0, 7.5}, {2.2, 8.0}};
  double worst = 0.0;
  for (const auto& p : all_policies()) {
    ProjectorChoice a{EnvironmentSchedule(p, model, 0.0, 8.0, 1.0 / 256, rho0())};
    ProjectorChoice b = a;
    a.x_env = x1;
    b.x_env = x2;
    for (auto [s, t] : pairs) {
      const int substeps = static_cast<int>(std::ceil(64 * (t - s)));
      worst = std::max(worst, operator_norm(nz_kernel_direct(a, s, t, substeps).matrix() - nz_kernel_direct(b, s, t, substeps).matrix()));
    }
  }
  report(10, "kernel independent of x", worst <= 1e-10, fmt("max ||K(x1) - K(x2)|| %.3g over 10 pairs x 3 policies (<= 1e-10)", worst),
         tm.seconds());
}

void cptp() {
  Timer tm;
  const auto model = example_model();
  const TimeGrid g{0.0, kDt, 16};
  const PropagatorCache cache(model, g, kDefaultSubsteps);
  int checked = 0, passed = 0;
  double worst_eig = HUGE_VAL, worst_trace = 0.0;
  for (const auto& p : all_policies()) {
    const EnvironmentSchedule sched(p, model, 0.0, g.time(16), g.dt / kDefaultSubsteps, rho0());
    // build the maps without the CPTP guard inside reconstruct_family so failures are counted, not thrown
    const ComplexMatrix tr_env = partial_trace_env_matrix(kLay);
    for (int i = 0; i < 16; ++i) {
      ComplexMatrix u = append_env_matrix(sched.at(g.time(i)), kLay);
      for (int j = i + 1; j <= 16; ++j) {
        u = cache.step(j - 1).matrix() * u;
        const CptpReport r = check_cptp(Superoperator(tr_env * u), 1e-8);
        ++checked;
        passed += r.pass;
        worst_eig = std::min(worst_eig, r.choi_min_eig);
        worst_trace = std::max(worst_trace, r.trace_dev);
      }
    }
  }
  report(11, "reconstructed maps are CPTP", passed == checked,
         fmt("%d/%d maps pass (17-point grid, 3 policies), min Choi eig %.3g, max trace dev %.3g", passed, checked, worst_eig, worst_trace),
         tm.seconds());
}

}  // namespace

int main() {
  std::printf("transfer-tensor acceptance suite\n");
  full_memory();
  semigroup();
  stability();
  bound_validity();
  periodicity();
  projector_identities();
  convergence();
  kernel_ordering();
  correlation_free();
  x_independence();
  cptp();
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
