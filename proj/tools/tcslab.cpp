// tcslab: simulate, certify, sweep and cross-check thermodynamic
// Cucker-Smale ensembles with unit speed.

#include <iostream>

#include "CLI11.hpp"
#include "tcs/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Thermodynamic Cucker-Smale ensembles with unit-speed constraint"};
  app.require_subcommand(1);

  tcs::CommandOptions opt;
  std::uint64_t seed = 0;
  double oracle_dt = 1e-4;

  auto common = [&](CLI::App* sub, bool writes) {
    sub->add_option("--config", opt.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    if (writes) sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_flag("--quiet", opt.quiet, "suppress console output");
  };

  auto* simulate = app.add_subcommand("simulate", "integrate a scenario and write artifacts");
  common(simulate, true);
  auto* check = app.add_subcommand("check", "evaluate flocking/spacing certificates without simulating");
  common(check, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid and write a summary CSV");
  common(sweep, true);
  auto* compare = app.add_subcommand("compare", "cross-check the adaptive integrator against fixed-step RK4");
  common(compare, false);
  compare->add_option("--oracle-dt", oracle_dt, "oracle step size")->check(CLI::Range(1e-12, 1e-3));
  auto* scenario = app.add_subcommand("scenario", "print the initial state built from a config");
  common(scenario, false);

  CLI11_PARSE(app, argc, argv);

  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) opt.seed = seed;

  if (simulate->parsed()) {
    if (opt.out_dir.empty()) opt.out_dir = "tcslab-out";
    return tcs::cmd_simulate(opt, std::cout, std::cerr);
  }
  if (check->parsed()) return tcs::cmd_check(opt, std::cout, std::cerr);
  if (sweep->parsed()) return tcs::cmd_sweep(opt, std::cout, std::cerr);
  if (compare->parsed()) return tcs::cmd_compare(opt, oracle_dt, std::cout, std::cerr);
  if (scenario->parsed()) return tcs::cmd_scenario(opt, std::cout, std::cerr);
  return tcs::exit_code::error;
}
