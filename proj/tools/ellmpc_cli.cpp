#include "ellmpc/commands.hpp"
#include "ellmpc/log.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Ellipsoidal-obstacle MPC toolkit"};
  app.require_subcommand(1);
  bool verbose = false, debug = false;
  app.add_flag("-v,--verbose", verbose, "Log progress");
  app.add_flag("--debug", debug, "Log solver iterations");

  ellmpc::CommandOptions opts;
  std::string mode;
  long long steps = 0, max_iters = 0;
  std::uint64_t seed = 0;

  auto add_scenario = [&](CLI::App* cmd) {
    cmd->add_option("scenario", opts.scenario, "Scenario JSON file")->required();
  };
  auto add_out = [&](CLI::App* cmd) { cmd->add_option("-o,--out", opts.out_dir, "Output directory")->capture_default_str(); };
  auto add_run = [&](CLI::App* cmd) {
    cmd->add_option("--mode", mode, "free-gamma | fixed-gamma | free-eta | fixed-eta");
    cmd->add_option("--steps", steps, "Number of MPC steps (default: simulation.max_steps)");
    cmd->add_option("--seed", seed, "Disturbance seed");
    cmd->add_option("--max-sqp-iters", max_iters, "SQP iteration limit per step");
  };

  auto* check = app.add_subcommand("check", "Validate a scenario and print derived quantities");
  add_scenario(check);
  auto* simulate = app.add_subcommand("simulate", "Run the closed loop and write logs");
  add_scenario(simulate);
  add_out(simulate);
  add_run(simulate);
  auto* compare = app.add_subcommand("compare", "Compare the four constraint formulations along a free-gamma run");
  add_scenario(compare);
  add_out(compare);
  add_run(compare);
  auto* plan = app.add_subcommand("plan", "Run the reference planner only and write the path and reference");
  add_scenario(plan);
  add_out(plan);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ellmpc::kExitSuccess : ellmpc::kExitInvalidInput;
  }

  ellmpc::log::set_level(debug ? ellmpc::log::Level::Debug
                               : (verbose ? ellmpc::log::Level::Info : ellmpc::log::Level::Warning));
  for (auto* cmd : {simulate, compare}) {
    if (!cmd->parsed()) continue;
    if (cmd->count("--mode")) opts.mode = mode;
    if (cmd->count("--steps")) opts.steps = steps;
    if (cmd->count("--seed")) opts.seed = seed;
    if (cmd->count("--max-sqp-iters")) opts.max_sqp_iters = max_iters;
  }

  if (check->parsed()) return ellmpc::cmd_check(opts, std::cout, std::cerr);
  if (simulate->parsed()) return ellmpc::cmd_simulate(opts, std::cout, std::cerr);
  if (compare->parsed()) return ellmpc::cmd_compare(opts, std::cout, std::cerr);
  return ellmpc::cmd_plan(opts, std::cout, std::cerr);
}
