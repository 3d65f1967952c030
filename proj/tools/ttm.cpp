// Command-line experiment runner.
//
//   ttm <subcommand> [--config PATH] [--out DIR] [--substeps K] [--policy P]
//                    [--m INT] [--dt FLOAT] [--steps INT] [--oracle]
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ttm/config.hpp"
#include "ttm/experiments.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> substeps;
  std::optional<std::string> policy;
  std::optional<int> m;
  std::optional<double> dt;
  std::optional<int> steps;
  bool oracle = false;
};

void add_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "experiment config (JSON)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--substeps", o.substeps, "midpoint substeps per grid step");
  sub->add_option("--policy", o.policy, "reference state policy")->check(CLI::IsMember({"fixed", "true-env", "frozen"}));
  sub->add_option("--m", o.m, "memory cutoff in steps");
  sub->add_option("--dt", o.dt, "grid step");
  sub->add_option("--steps", o.steps, "number of grid steps");
  sub->add_flag("--oracle", o.oracle, "add exact-comparison columns");
}

ttm::ExperimentConfig resolve(const Overrides& o) {
  ttm::ExperimentConfig cfg = o.config.empty() ? ttm::ExperimentConfig{} : ttm::load_config(o.config);
  if (o.out) cfg.output = *o.out;
  if (o.substeps) cfg.substeps = *o.substeps;
  if (o.policy) cfg.policy = *o.policy;
  if (o.m) cfg.m = *o.m;
  if (o.dt) cfg.grid.dt = *o.dt;
  if (o.steps) cfg.grid.steps = *o.steps;
  if (o.oracle) cfg.oracle = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-tensor and memory-kernel experiments for open quantum systems"};
  app.require_subcommand(1);
  Overrides o;
  std::string chosen;
  for (const char* name : {"evolve", "tomography", "tensors", "propagate", "error-sweep", "kernel-norms",
                           "convergence", "validate"}) {
    auto* sub = app.add_subcommand(name);
    add_flags(sub, o);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  ttm::ExperimentConfig cfg;
  try {
    cfg = resolve(o);
    if (chosen != "validate") cfg.experiment = *ttm::parse_experiment(chosen);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const ttm::ValidationReport report = ttm::validate(cfg);
  if (chosen == "validate") {
    std::cout << report.text();
    return report.ok() ? 0 : kConfigError;
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  if (!report.ok()) {
    std::cerr << report.text();
    return kConfigError;
  }

  try {
    const auto res = ttm::run(cfg);
    for (const auto& f : res.files) std::cout << f << '\n';
  } catch (const std::exception& e) {
    std::cerr << "numerical failure in " << chosen << ": " << e.what() << '\n';
    return kNumericalError;
  }
  return 0;
}
