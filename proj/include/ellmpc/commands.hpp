#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace ellmpc {

enum ExitCode : int { kExitSuccess = 0, kExitInvalidInput = 1, kExitRuntimeFailure = 2 };

struct CommandOptions {
  std::filesystem::path scenario;
  std::filesystem::path out_dir = "out";
  std::optional<std::string> mode;
  /// Simulation steps; defaults to simulation.max_steps of the scenario.
  std::optional<long long> steps;
  std::optional<std::uint64_t> seed;
  std::optional<long long> max_sqp_iters;
};

/// Validates the scenario and prints dt, gamma bounds per obstacle and the global path length.
int cmd_check(const CommandOptions& options, std::ostream& out, std::ostream& err);
/// Writes trajectory.csv, clearances.csv and summary.json. Exit 0 iff the goal
/// is reached without overlap.
int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
/// Writes comparison.csv, exceedance.csv, timing.csv and summary.json.
int cmd_compare(const CommandOptions& options, std::ostream& out, std::ostream& err);
/// Writes path.csv and reference.csv (the reference at the start pose).
int cmd_plan(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace ellmpc
