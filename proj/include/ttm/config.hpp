#pragma once

// JSON configuration: model description and experiment settings.
//
// Model document:
//   {
//     "dims": {"system": 2, "environment": 2},
//     "hamiltonian": [
//       {"pauli": "ZI", "coefficient": 0.5},
//       {"pauli": "YY", "coefficient": 2.0,
//        "envelope": {"type": "cos", "frequency": 2.0, "phase": 0.0}},
//       {"matrix": [[1, 0], [0, -1]], ...}          // full joint-space literal
//     ],
//     "jumps": [{"matrix": [[0, [0.5, 0]], ...], "rate": 1.0}],
//     "period": 3.141592653589793                   // optional
//   }
// Pauli strings carry one letter per qubit, system qubits first. Matrix
// literals are arrays of rows; an entry is a number or a [re, im] pair.
// {"builtin": "example", "parameters": {...}} selects the two-qubit example.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ttm/errors.hpp"
#include "ttm/io.hpp"
#include "ttm/liouville.hpp"
#include "ttm/model.hpp"
#include "ttm/tomography.hpp"
#include "ttm/transfer_tensor.hpp"

namespace ttm {

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }

  std::string text() const {
    std::string s;
    for (const auto& e : errors) s += "error: " + e + "\n";
    for (const auto& w : warnings) s += "warning: " + w + "\n";
    if (errors.empty()) s += "config valid\n";
    return s;
  }
};

namespace detail {

inline Complex parse_entry(const Json& v, const std::string& field) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw ValidationError(field + ": matrix entry must be a number or [re, im]");
}

inline ComplexMatrix parse_matrix(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ValidationError(field + ": matrix must be a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = j[0].is_array() ? static_cast<Index>(j[0].size()) : 0;
  ComplexMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Index>(j[r].size()) != cols) {
      throw ValidationError(field + ": row " + std::to_string(r) + " has the wrong length");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = parse_entry(j[r][c], field);
  }
  return m;
}

inline ComplexMatrix pauli_string(const std::string& s, const std::string& field) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (char ch : s) {
    switch (ch) {
      case 'I': out = kron(out, pauli::I()); break;
      case 'X': out = kron(out, pauli::X()); break;
      case 'Y': out = kron(out, pauli::Y()); break;
      case 'Z': out = kron(out, pauli::Z()); break;
      default: throw ValidationError(field + ": unknown Pauli letter '" + std::string(1, ch) + "'");
    }
  }
  return out;
}

struct HamiltonianTerm {
  ComplexMatrix op;
  double coefficient = 1.0;
  bool cosine = false;
  double frequency = 0.0;
  double phase = 0.0;
};

template <class T>
T number(const Json& j, const std::string& key, const std::string& field, T fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ValidationError(field + "." + key + ": expected a number");
  return j.at(key).get<T>();
}

}  // namespace detail

/// Builds a model from a JSON document (see header comment).
inline LindbladModel model_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("model: expected an object");
  if (j.contains("builtin")) {
    if (j.at("builtin") != "example") throw ValidationError("model.builtin: only \"example\" is known");
    ExampleParameters p;
    if (j.contains("parameters")) {
      const auto& q = j.at("parameters");
      p.omega = detail::number(q, "omega", "model.parameters", p.omega);
      p.omega_env = detail::number(q, "omega_env", "model.parameters", p.omega_env);
      p.coupling = detail::number(q, "coupling", "model.parameters", p.coupling);
      p.drive = detail::number(q, "drive", "model.parameters", p.drive);
      p.gamma = detail::number(q, "gamma", "model.parameters", p.gamma);
    }
    if (p.gamma < 0.0) throw ValidationError("model.parameters.gamma: rate must be >= 0");
    return example_model(p);
  }
  if (!j.contains("dims")) throw ValidationError("model.dims: missing");
  LindbladModel model;
  model.layout.dimS = detail::number<Index>(j.at("dims"), "system", "model.dims", 0);
  model.layout.dimE = detail::number<Index>(j.at("dims"), "environment", "model.dims", 0);
  try {
    model.layout.validate();
  } catch (const std::exception& e) {
    throw ValidationError(std::string("model.dims: ") + e.what());
  }
  const Index d = model.layout.joint();

  std::vector<detail::HamiltonianTerm> terms;
  if (!j.contains("hamiltonian") || !j.at("hamiltonian").is_array()) {
    throw ValidationError("model.hamiltonian: expected an array of terms");
  }
  for (std::size_t k = 0; k < j.at("hamiltonian").size(); ++k) {
    const auto& t = j.at("hamiltonian")[k];
    const std::string field = "model.hamiltonian[" + std::to_string(k) + "]";
    detail::HamiltonianTerm term;
    if (t.contains("pauli")) {
      term.op = detail::pauli_string(t.at("pauli").get<std::string>(), field + ".pauli");
    } else if (t.contains("matrix")) {
      term.op = detail::parse_matrix(t.at("matrix"), field + ".matrix");
    } else {
      throw ValidationError(field + ": needs \"pauli\" or \"matrix\"");
    }
    if (term.op.rows() != d || term.op.cols() != d) {
      throw ValidationError(field + ": operator is " + std::to_string(term.op.rows()) + "x" +
                            std::to_string(term.op.cols()) + ", joint space is " + std::to_string(d));
    }
    if (hermiticity_deviation(term.op) > 1e-12) throw ValidationError(field + ": operator is not Hermitian");
    term.coefficient = detail::number(t, "coefficient", field, 1.0);
    if (t.contains("envelope")) {
      const auto& e = t.at("envelope");
      const std::string type = e.value("type", "constant");
      if (type == "cos") {
        term.cosine = true;
        term.frequency = detail::number(e, "frequency", field + ".envelope", 0.0);
        term.phase = detail::number(e, "phase", field + ".envelope", 0.0);
      } else if (type != "constant") {
        throw ValidationError(field + ".envelope.type: expected \"constant\" or \"cos\"");
      }
    }
    terms.push_back(std::move(term));
  }
  model.hamiltonian = [terms, d](double t) -> ComplexMatrix {
    ComplexMatrix h = ComplexMatrix::Zero(d, d);
    for (const auto& term : terms) {
      const double f = term.cosine ? std::cos(term.frequency * t + term.phase) : 1.0;
      h += term.coefficient * f * term.op;
    }
    return h;
  };

  if (j.contains("jumps")) {
    for (std::size_t k = 0; k < j.at("jumps").size(); ++k) {
      const auto& jt = j.at("jumps")[k];
      const std::string field = "model.jumps[" + std::to_string(k) + "]";
      if (!jt.contains("matrix")) throw ValidationError(field + ".matrix: missing");
      JumpTerm jump{detail::parse_matrix(jt.at("matrix"), field + ".matrix"), detail::number(jt, "rate", field, 0.0)};
      if (jump.op.rows() != d || jump.op.cols() != d) throw ValidationError(field + ".matrix: wrong dimension");
      if (!(jump.rate >= 0.0) || !std::isfinite(jump.rate)) {
        throw ValidationError(field + ".rate: must be >= 0 (got " + std::to_string(jump.rate) + ")");
      }
      model.jumps.push_back(std::move(jump));
    }
  }
  if (j.contains("period")) {
    const double p = detail::number(j, "period", "model", 0.0);
    if (!(p > 0.0)) throw ValidationError("model.period: must be > 0");
    model.period = p;
  }
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------

enum class Experiment { Evolve, Tomography, Tensors, Propagate, ErrorSweep, KernelNorms, Convergence };

inline const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Evolve: return "evolve";
    case Experiment::Tomography: return "tomography";
    case Experiment::Tensors: return "tensors";
    case Experiment::Propagate: return "propagate";
    case Experiment::ErrorSweep: return "error-sweep";
    case Experiment::KernelNorms: return "kernel-norms";
    case Experiment::Convergence: return "convergence";
  }
  return "?";
}

inline std::optional<Experiment> parse_experiment(const std::string& s) {
  for (auto e : {Experiment::Evolve, Experiment::Tomography, Experiment::Tensors, Experiment::Propagate,
                 Experiment::ErrorSweep, Experiment::KernelNorms, Experiment::Convergence}) {
    if (s == experiment_name(e)) return e;
  }
  return std::nullopt;
}

struct ExperimentConfig {
  Experiment experiment = Experiment::Propagate;
  std::string model_source = "builtin-example";  // or a file path
  LindbladModel model = example_model();
  ComplexMatrix initial_state = example_initial_state().matrix();

  TimeGrid grid{0.0, 0.625, 160};
  int substeps = kDefaultSubsteps;

  std::string policy = "fixed";
  std::optional<ComplexMatrix> tau;    // fixed policy, default tr_S rho0
  ComplexMatrix sigma = ket_bra(2, 0, 0);  // frozen policy

  int m = 8;
  std::optional<int> c;          // default: period / dt when commensurate
  int transient = 0;
  std::optional<double> t_m;     // declared memory time, checked against m dt

  bool oracle = false;
  std::string output = "out";

  // error-sweep
  std::vector<double> sweep_dt{1.25, 0.625, 0.3125, 0.15625};
  std::vector<double> sweep_tm{1.25, 2.5, 5.0, 10.0};
  double window_start = 50.0;
  double window_end = 100.0;

  // kernel-norms (times k * kernel_dt, k = 1..kernel_points) and convergence
  double kernel_dt = 0.25;
  int kernel_points = 40;
  double kernel_substeps_per_unit = 256.0;
  std::vector<double> convergence_t{2.5, 5.0};
  std::vector<int> convergence_n{8, 16, 32, 64};

  ReferenceStatePolicy make_policy() const {
    if (policy == "fixed") {
      const ComplexMatrix t = tau ? *tau : partial_trace(initial_state, model.layout, Keep::Environment);
      return ReferenceStatePolicy::fixed(DensityOperator::unchecked(t));
    }
    if (policy == "true-env") return ReferenceStatePolicy::true_environment();
    if (policy == "frozen") return ReferenceStatePolicy::frozen(sigma);
    throw ValidationError("policy: expected fixed, true-env or frozen (got \"" + policy + "\")");
  }

  /// Periodic tensor storage when the drive period is a whole number of steps,
  /// otherwise one stored start per step of the horizon.
  MemoryConfig memory(int horizon) const {
    const int cc = c.value_or(steps_per_period(model.period, grid.dt).value_or(0));
    if (cc >= 1 && (policy == "fixed" || transient > 0)) return MemoryConfig::periodic(grid.dt, m, cc, transient);
    return MemoryConfig::aperiodic(grid.dt, m, horizon);
  }
};

/// Range and compatibility checks.
inline ValidationReport validate(const ExperimentConfig& cfg) {
  ValidationReport r;
  if (!(cfg.grid.dt > 0.0) || !std::isfinite(cfg.grid.dt)) r.errors.push_back("grid.dt: must be > 0");
  if (cfg.grid.steps < 1) r.errors.push_back("grid.steps: must be >= 1");
  if (cfg.substeps < 1) r.errors.push_back("substeps: must be >= 1");
  if (cfg.m < 1) r.errors.push_back("memory.m: must be >= 1");
  if (cfg.c && *cfg.c < 1) r.errors.push_back("memory.c: must be >= 1");
  if (cfg.transient < 0) r.errors.push_back("memory.transient: must be >= 0");
  for (std::size_t k = 0; k < cfg.model.jumps.size(); ++k) {
    if (cfg.model.jumps[k].rate < 0.0) r.errors.push_back("model.jumps[" + std::to_string(k) + "].rate: must be >= 0");
  }
  if (cfg.policy != "fixed" && cfg.policy != "true-env" && cfg.policy != "frozen") {
    r.errors.push_back("policy: expected fixed, true-env or frozen (got \"" + cfg.policy + "\")");
  }
  const auto& lay = cfg.model.layout;
  if (cfg.initial_state.rows() != lay.joint() || cfg.initial_state.cols() != lay.joint()) {
    r.errors.push_back("initial_state: must be " + std::to_string(lay.joint()) + "x" + std::to_string(lay.joint()));
  } else if (!check_density(cfg.initial_state, 1e-10, 1e-10, -1e-9).pass) {
    r.errors.push_back("initial_state: not a density operator");
  }
  if (cfg.tau && (cfg.tau->rows() != lay.dimE || !check_density(*cfg.tau).pass)) {
    r.errors.push_back("policy.tau: must be a density operator on the environment");
  }
  if (cfg.policy == "frozen" && (cfg.sigma.rows() != lay.dimS || !check_density(cfg.sigma).pass)) {
    r.errors.push_back("policy.sigma: must be a density operator on the system");
  }
  if (cfg.t_m && cfg.grid.dt > 0.0) {
    const double implied = cfg.m * cfg.grid.dt;
    if (std::abs(implied - *cfg.t_m) > 1e-9 * std::max(1.0, *cfg.t_m)) {
      r.warnings.push_back("memory.t_m = " + CsvWriter::cell(*cfg.t_m) + " but m*dt = " +
                           std::to_string(cfg.m) + "*" + CsvWriter::cell(cfg.grid.dt) + " = " +
                           CsvWriter::cell(implied));
    }
  }
  if (cfg.c && cfg.model.period && cfg.grid.dt > 0.0) {
    const double implied = *cfg.c * cfg.grid.dt;
    if (std::abs(implied - *cfg.model.period) > 1e-9 * *cfg.model.period) {
      r.warnings.push_back("memory.c*dt = " + CsvWriter::cell(implied) + " differs from model.period = " +
                           CsvWriter::cell(*cfg.model.period));
    }
  }
  if (cfg.c && !cfg.model.period) r.warnings.push_back("memory.c given for a model without a declared period");
  if (cfg.experiment == Experiment::ErrorSweep) {
    if (cfg.sweep_dt.empty() || cfg.sweep_tm.empty()) r.errors.push_back("sweep: dt and t_m lists must be non-empty");
    for (double x : cfg.sweep_dt)
      if (!(x > 0.0)) r.errors.push_back("sweep.dt: entries must be > 0");
    for (double x : cfg.sweep_tm)
      if (!(x > 0.0)) r.errors.push_back("sweep.t_m: entries must be > 0");
    if (!(cfg.window_end > cfg.window_start)) r.errors.push_back("sweep.window: end must exceed start");
  }
  if (cfg.experiment == Experiment::KernelNorms && (!(cfg.kernel_dt > 0.0) || cfg.kernel_points < 1)) {
    r.errors.push_back("kernel_norms: dt must be > 0 and points >= 1");
  }
  if (cfg.experiment == Experiment::Convergence) {
    for (int n : cfg.convergence_n)
      if (n < 2) r.errors.push_back("convergence.n: entries must be >= 2");
    for (double t : cfg.convergence_t)
      if (!(t > cfg.grid.t0)) r.errors.push_back("convergence.t: entries must exceed grid.t0");
  }
  return r;
}

/// Reads an experiment document. Unknown keys are reported as errors; numeric
/// ranges are left to validate(). `base_dir` resolves a relative model path.
inline ExperimentConfig config_from_json(const Json& j, const std::string& base_dir = ".") {
  if (!j.is_object()) throw ValidationError("config: expected an object");
  static const std::vector<std::string> known{"experiment", "model", "initial_state", "grid", "substeps",
                                              "policy", "memory", "oracle", "output", "sweep",
                                              "kernel_norms", "convergence"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ValidationError("config: unknown key \"" + k + "\"");
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("experiment")) {
      const auto e = parse_experiment(j.at("experiment").get<std::string>());
      if (!e) throw ValidationError("experiment: unknown experiment \"" + j.at("experiment").get<std::string>() + "\"");
      cfg.experiment = *e;
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      if (m.is_string() && m.get<std::string>() == "builtin-example") {
        cfg.model_source = "builtin-example";
      } else if (m.is_string()) {
        std::string path = m.get<std::string>();
        if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
        cfg.model_source = path;
        cfg.model = model_from_json(read_json(path));
      } else {
        cfg.model_source = "inline";
        cfg.model = model_from_json(m);
      }
    }
    if (j.contains("initial_state")) {
      const auto& s = j.at("initial_state");
      if (s.is_string() && s.get<std::string>() == "builtin-example") {
        cfg.initial_state = example_initial_state().matrix();
      } else {
        cfg.initial_state = detail::parse_matrix(s, "initial_state");
      }
    } else if (cfg.model.layout.joint() != 4) {
      throw ValidationError("initial_state: required when the model is not two-qubit");
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      cfg.grid.t0 = detail::number(g, "t0", "grid", cfg.grid.t0);
      cfg.grid.dt = detail::number(g, "dt", "grid", cfg.grid.dt);
      cfg.grid.steps = detail::number(g, "steps", "grid", cfg.grid.steps);
    }
    cfg.substeps = detail::number(j, "substeps", "config", cfg.substeps);
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      if (p.is_string()) {
        cfg.policy = p.get<std::string>();
      } else {
        cfg.policy = p.value("kind", cfg.policy);
        if (p.contains("tau")) cfg.tau = detail::parse_matrix(p.at("tau"), "policy.tau");
        if (p.contains("sigma")) cfg.sigma = detail::parse_matrix(p.at("sigma"), "policy.sigma");
      }
    }
    if (j.contains("memory")) {
      const auto& m = j.at("memory");
      cfg.m = detail::number(m, "m", "memory", cfg.m);
      if (m.contains("c")) cfg.c = detail::number(m, "c", "memory", 1);
      cfg.transient = detail::number(m, "transient", "memory", cfg.transient);
      if (m.contains("t_m")) cfg.t_m = detail::number(m, "t_m", "memory", 0.0);
    }
    if (j.contains("oracle")) cfg.oracle = j.at("oracle").get<bool>();
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      if (s.contains("dt")) cfg.sweep_dt = s.at("dt").get<std::vector<double>>();
      if (s.contains("t_m")) cfg.sweep_tm = s.at("t_m").get<std::vector<double>>();
      if (s.contains("window")) {
        const auto w = s.at("window").get<std::vector<double>>();
        if (w.size() != 2) throw ValidationError("sweep.window: expected [start, end]");
        cfg.window_start = w[0];
        cfg.window_end = w[1];
      }
    }
    if (j.contains("kernel_norms")) {
      const auto& k = j.at("kernel_norms");
      cfg.kernel_dt = detail::number(k, "dt", "kernel_norms", cfg.kernel_dt);
      cfg.kernel_points = detail::number(k, "points", "kernel_norms", cfg.kernel_points);
      cfg.kernel_substeps_per_unit = detail::number(k, "substeps_per_unit", "kernel_norms", cfg.kernel_substeps_per_unit);
    }
    if (j.contains("convergence")) {
      const auto& c = j.at("convergence");
      if (c.contains("t")) cfg.convergence_t = c.at("t").get<std::vector<double>>();
      if (c.contains("n")) cfg.convergence_n = c.at("n").get<std::vector<int>>();
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return config_from_json(read_json(path), slash == std::string::npos ? "." : path.substr(0, slash));
}

}  // namespace ttm
