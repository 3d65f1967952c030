#pragma once

// Experiment drivers behind the command-line tool. Each writes CSV (and JSON
// where a data object is produced) into the output directory and returns the
// paths written. Everything is deterministic.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ttm/config.hpp"
#include "ttm/io.hpp"
#include "ttm/memory_kernel.hpp"
#include "ttm/model.hpp"
#include "ttm/tomography.hpp"
#include "ttm/transfer_tensor.hpp"

namespace ttm {

struct RunResult {
  std::vector<std::string> files;
};

/// One cell of the (t_m, dt) sweep.
struct SweepCell {
  double t_m = 0.0;
  double dt = 0.0;
  int m = 0;
  double long_time_error = 0.0;  // max trace norm over the window
  double bound = 0.0;            // max of the cutoff bound over the window
  double longest = 0.0;          // max ||T^(m)||
  bool physical = true;          // error <= 2
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> echo(const ExperimentConfig& cfg) {
  using C = CsvWriter;
  std::vector<std::pair<std::string, std::string>> p{
      {"experiment", experiment_name(cfg.experiment)},
      {"model", cfg.model_source},
      {"dim_s", C::cell(static_cast<long>(cfg.model.layout.dimS))},
      {"dim_e", C::cell(static_cast<long>(cfg.model.layout.dimE))},
      {"period", cfg.model.period ? C::cell(*cfg.model.period) : "none"},
      {"grid.t0", C::cell(cfg.grid.t0)},
      {"grid.dt", C::cell(cfg.grid.dt)},
      {"grid.steps", C::cell(cfg.grid.steps)},
      {"substeps", C::cell(cfg.substeps)},
      {"policy", cfg.policy},
      {"memory.m", C::cell(cfg.m)},
      {"memory.c", cfg.c ? C::cell(*cfg.c) : "auto"},
      {"memory.transient", C::cell(cfg.transient)},
      {"oracle", C::cell(cfg.oracle)},
  };
  return p;
}

inline std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name, RunResult& res) {
  std::filesystem::create_directories(cfg.output);
  const std::string path = (std::filesystem::path(cfg.output) / name).string();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  res.files.push_back(path);
  return f;
}

inline Trajectory system_states(const Trajectory& joint, const SpaceLayout& lay) {
  Trajectory out;
  out.reserve(joint.size());
  for (const auto& j : joint) out.push_back(partial_trace(j, lay, Keep::System));
  return out;
}

inline EnvironmentSchedule schedule_for(const ExperimentConfig& cfg, const ReferenceStatePolicy& policy,
                                        const TimeGrid& grid, int substeps) {
  return EnvironmentSchedule(policy, cfg.model, grid.t0, grid.time(grid.steps), grid.dt / substeps,
                             cfg.initial_state);
}

/// Tensors of lengths 1..len for propagation over `horizon` steps, with the
/// residuals Xi_1..Xi_m from the exact trajectory.
struct TensorBuild {
  TimeGrid grid;
  DynamicalMapFamily family;
  TransferTensorSet set;
};

inline TensorBuild build_for(const ExperimentConfig& cfg, const ReferenceStatePolicy& policy, int horizon,
                             int len) {
  const MemoryConfig mem = cfg.memory(horizon);
  const int steps = std::max(mem.stored_starts() - 1 + len, cfg.m);
  const TimeGrid grid{cfg.grid.t0, cfg.grid.dt, steps};
  const PropagatorCache cache(cfg.model, grid, cfg.substeps);
  const auto schedule = schedule_for(cfg, policy, grid, cfg.substeps);
  auto family = reconstruct_family(cache, schedule, len);
  auto set = build_tensors(family, mem, len);
  const auto exact = system_states(evolve_state(cfg.initial_state, cache), cfg.model.layout);
  attach_residuals(set, exact, std::min(cfg.m, steps));
  return {grid, std::move(family), std::move(set)};
}

}  // namespace detail

inline RunResult run_evolve(const ExperimentConfig& cfg) {
  RunResult res;
  const PropagatorCache cache(cfg.model, cfg.grid, cfg.substeps);
  const auto joint = evolve_state(cfg.initial_state, cache);
  const auto& lay = cfg.model.layout;
  auto f = detail::open_out(cfg, "evolve.csv", res);
  CsvWriter csv(f, "evolve: exact reduced trajectory", detail::echo(cfg));
  std::vector<std::string> cols{"step", "t"};
  for (auto& c : operator_columns(lay.dimS)) cols.push_back(c);
  cols.push_back("trace");
  cols.push_back("joint_min_eig");
  csv.columns(cols);
  for (int k = 0; k < cfg.grid.points(); ++k) {
    const ComplexMatrix rho = partial_trace(joint[k], lay, Keep::System);
    std::vector<std::string> row{CsvWriter::cell(k), CsvWriter::cell(cfg.grid.time(k))};
    for (auto& c : operator_cells(rho)) row.push_back(c);
    row.push_back(CsvWriter::cell(rho.trace().real()));
    row.push_back(CsvWriter::cell(check_density(joint[k]).min_eigenvalue));
    csv.row_strings(row);
  }
  return res;
}

inline RunResult run_tomography(const ExperimentConfig& cfg) {
  RunResult res;
  const PropagatorCache cache(cfg.model, cfg.grid, cfg.substeps);
  const auto policy = cfg.make_policy();
  const auto family = reconstruct_family(cache, detail::schedule_for(cfg, policy, cfg.grid, cfg.substeps));
  write_json(to_json(family), (std::filesystem::path(cfg.output) / "family.json").string());
  res.files.push_back((std::filesystem::path(cfg.output) / "family.json").string());
  auto f = detail::open_out(cfg, "tomography.csv", res);
  CsvWriter csv(f, "tomography: CPTP report per map", detail::echo(cfg));
  csv.columns({"i", "j", "t_i", "t_j", "trace_dev", "choi_min_eig", "pass"});
  for (int i = 0; i < cfg.grid.steps; ++i)
    for (int j = i + 1; j <= cfg.grid.steps; ++j) {
      const auto r = check_cptp(family.at(i, j));
      csv.row(i, j, cfg.grid.time(i), cfg.grid.time(j), r.trace_dev, r.choi_min_eig, r.pass);
    }
  return res;
}

inline RunResult run_tensors(const ExperimentConfig& cfg) {
  RunResult res;
  const auto policy = cfg.make_policy();
  const int len = 2 * cfg.m - 1;
  const auto b = detail::build_for(cfg, policy, cfg.grid.steps, len);
  std::filesystem::create_directories(cfg.output);
  const std::string json_path = (std::filesystem::path(cfg.output) / "tensors.json").string();
  write_json(to_json(b.set), json_path);
  res.files.push_back(json_path);
  auto f = detail::open_out(cfg, "tensor_norms.csv", res);
  auto params = detail::echo(cfg);
  params.push_back({"stored_starts", CsvWriter::cell(b.set.config().stored_starts())});
  params.push_back({"c_used", CsvWriter::cell(b.set.config().c)});
  params.push_back({"transient_used", CsvWriter::cell(b.set.config().transient_steps)});
  params.push_back({"longest_tensor_norm", CsvWriter::cell(longest_tensor_norm(b.set))});
  CsvWriter csv(f, "tensors: operator norm per stored tensor", params);
  csv.columns({"phase", "length", "norm"});
  for (const auto& n : tensor_norm_profile(b.set)) csv.row(n.phase, n.length, n.norm);
  return res;
}

inline RunResult run_propagate(const ExperimentConfig& cfg) {
  RunResult res;
  const auto policy = cfg.make_policy();
  const auto b = detail::build_for(cfg, policy, cfg.grid.steps, cfg.m);
  const auto prop = propagate(b.set, Trajectory{partial_trace(cfg.initial_state, cfg.model.layout, Keep::System)},
                              cfg.grid.steps, true);
  Trajectory exact;
  if (cfg.oracle) {
    exact = detail::system_states(evolve_state(cfg.initial_state, PropagatorCache(cfg.model, cfg.grid, cfg.substeps)),
                                  cfg.model.layout);
  }
  auto f = detail::open_out(cfg, "propagate.csv", res);
  CsvWriter csv(f, "propagate: transfer-tensor trajectory", detail::echo(cfg));
  std::vector<std::string> cols{"step", "t"};
  for (auto& c : operator_columns(cfg.model.layout.dimS)) cols.push_back(c);
  cols.push_back("trace");
  if (cfg.oracle) cols.push_back("trace_distance_exact");
  csv.columns(cols);
  for (int k = 0; k <= cfg.grid.steps; ++k) {
    std::vector<std::string> row{CsvWriter::cell(k), CsvWriter::cell(cfg.grid.time(k))};
    for (auto& c : operator_cells(prop[k])) row.push_back(c);
    row.push_back(CsvWriter::cell(prop[k].trace().real()));
    if (cfg.oracle) row.push_back(CsvWriter::cell(trace_distance(prop[k], exact[k])));
    csv.row_strings(row);
  }
  return res;
}

/// Long-time error and the cutoff bound, both maximised over steps whose time
/// lies in [window_start, window_end].
inline SweepCell sweep_cell(const ExperimentConfig& base, double dt, double t_m) {
  ExperimentConfig cfg = base;
  cfg.grid.dt = dt;
  cfg.m = std::max(1, static_cast<int>(std::lround(t_m / dt)));
  cfg.c.reset();
  const int total = static_cast<int>(std::ceil((cfg.window_end - cfg.grid.t0) / dt - 1e-9));
  cfg.grid.steps = total;
  const int len = 2 * cfg.m - 1;
  const auto policy = cfg.make_policy();
  const auto b = detail::build_for(cfg, policy, total, len);
  const PropagatorCache cache(cfg.model, TimeGrid{cfg.grid.t0, dt, total}, cfg.substeps);
  const auto exact = detail::system_states(evolve_state(cfg.initial_state, cache), cfg.model.layout);
  const auto prop = propagate(b.set, Trajectory{exact[0]}, total, true);

  SweepCell cell{t_m, dt, cfg.m};
  for (int k = 0; k <= total; ++k) {
    const double t = cfg.grid.time(k);
    if (t < cfg.window_start - 1e-9 || t > cfg.window_end + 1e-9) continue;
    const double e = trace_norm(exact[k] - prop[k]);
    cell.long_time_error = std::max(cell.long_time_error, std::isfinite(e) ? e : HUGE_VAL);
    if (k >= 2 * cfg.m) cell.bound = std::max(cell.bound, error_bound(b.set, k));
  }
  cell.longest = longest_tensor_norm(b.set);
  cell.physical = cell.long_time_error <= 2.0;
  return cell;
}

inline std::vector<SweepCell> error_sweep(const ExperimentConfig& cfg) {
  std::vector<SweepCell> out;
  for (double dt : cfg.sweep_dt)
    for (double tm : cfg.sweep_tm) out.push_back(sweep_cell(cfg, dt, tm));
  return out;
}

inline RunResult run_error_sweep(const ExperimentConfig& cfg) {
  RunResult res;
  const auto cells = error_sweep(cfg);
  auto f = detail::open_out(cfg, "error_sweep.csv", res);
  auto params = detail::echo(cfg);
  params.push_back({"window", CsvWriter::cell(cfg.window_start) + ".." + CsvWriter::cell(cfg.window_end)});
  std::string dts, tms;
  for (double x : cfg.sweep_dt) dts += (dts.empty() ? "" : " ") + CsvWriter::cell(x);
  for (double x : cfg.sweep_tm) tms += (tms.empty() ? "" : " ") + CsvWriter::cell(x);
  params.push_back({"sweep.dt", dts});
  params.push_back({"sweep.t_m", tms});
  CsvWriter csv(f, "error-sweep: long-time error against the cutoff bound", params);
  csv.columns({"t_m", "dt", "m", "long_time_error", "bound", "longest_tensor_norm", "physical"});
  for (const auto& c : cells) csv.row(c.t_m, c.dt, c.m, c.long_time_error, c.bound, c.longest, c.physical);
  return res;
}

/// The three reference choices: fixed tr_S rho0, frozen sigma, true environment.
inline std::vector<ProjectorChoice> standard_choices(const ExperimentConfig& cfg, double t_max, double resolution) {
  const ComplexMatrix tau0 = partial_trace(cfg.initial_state, cfg.model.layout, Keep::Environment);
  std::vector<ProjectorChoice> out;
  for (const auto& p : {ReferenceStatePolicy::fixed(DensityOperator::unchecked(tau0)),
                        ReferenceStatePolicy::frozen(cfg.sigma), ReferenceStatePolicy::true_environment()}) {
    out.push_back(ProjectorChoice{EnvironmentSchedule(p, cfg.model, cfg.grid.t0, t_max, resolution, cfg.initial_state)});
  }
  return out;
}

inline RunResult run_kernel_norms(const ExperimentConfig& cfg) {
  RunResult res;
  std::vector<double> times;
  for (int k = 1; k <= cfg.kernel_points; ++k) times.push_back(cfg.grid.t0 + k * cfg.kernel_dt);
  const auto choices = standard_choices(cfg, times.back() + 1.0, 1.0 / cfg.kernel_substeps_per_unit);
  const auto curve = kernel_norm_curve(choices, times, cfg.kernel_substeps_per_unit);
  auto f = detail::open_out(cfg, "kernel_norms.csv", res);
  auto params = detail::echo(cfg);
  params.push_back({"kernel_substeps_per_unit", CsvWriter::cell(cfg.kernel_substeps_per_unit)});
  params.push_back({"x_env", "maximally mixed"});
  CsvWriter csv(f, "kernel-norms: ||K_{t,t0}|| per reference choice", params);
  csv.columns({"choice", "t", "kernel_norm"});
  for (const auto& p : curve) csv.row(p.choice, p.t, p.norm);
  return res;
}

inline RunResult run_convergence(const ExperimentConfig& cfg) {
  RunResult res;
  double t_max = cfg.grid.t0;
  for (double t : cfg.convergence_t) t_max = std::max(t_max, t);
  const auto policy = cfg.make_policy();
  const ProjectorChoice choice{EnvironmentSchedule(policy, cfg.model, cfg.grid.t0, t_max + 1.0, 1.0 / 512.0,
                                                   cfg.initial_state)};
  const auto pts = convergence_study(choice, cfg.convergence_t, cfg.convergence_n, cfg.substeps);
  auto f = detail::open_out(cfg, "convergence.csv", res);
  CsvWriter csv(f, "convergence: ||dt^2 K_{t,t0} - T^(N)|| / ||T^(N)||", detail::echo(cfg));
  csv.columns({"t", "N", "dt", "relative_difference", "tensor_norm"});
  for (const auto& p : pts) csv.row(p.t, p.n, (p.t - cfg.grid.t0) / p.n, p.relative_difference, p.tensor_norm);
  return res;
}

inline RunResult run(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::Evolve: return run_evolve(cfg);
    case Experiment::Tomography: return run_tomography(cfg);
    case Experiment::Tensors: return run_tensors(cfg);
    case Experiment::Propagate: return run_propagate(cfg);
    case Experiment::ErrorSweep: return run_error_sweep(cfg);
    case Experiment::KernelNorms: return run_kernel_norms(cfg);
    case Experiment::Convergence: return run_convergence(cfg);
  }
  return {};
}

}  // namespace ttm
