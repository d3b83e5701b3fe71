#include "ellmpc/commands.hpp"

#include "ellmpc/scenario_io.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace ellmpc {

namespace {

struct Prepared {
  ScenarioFile file;
  int steps = 0;
};

// Loads the scenario and applies command-line overrides. Throws std::invalid_argument.
Prepared prepare(const CommandOptions& options) {
  Prepared p{load_scenario(options.scenario), 0};
  if (options.mode) p.file.scenario.mode.kind = parse_constraint_kind(*options.mode);
  if (options.seed) p.file.settings.simulation.seed = *options.seed;
  if (options.max_sqp_iters) {
    if (*options.max_sqp_iters < 1) throw std::invalid_argument("--max-sqp-iters must be >= 1");
    p.file.settings.solver.max_sqp_iters = static_cast<int>(std::min<long long>(*options.max_sqp_iters, 1000000));
  }
  const long long steps = options.steps ? *options.steps : p.file.settings.simulation.max_steps;
  if (steps < 1) throw std::invalid_argument("--steps must be >= 1");
  p.steps = static_cast<int>(std::min<long long>(steps, 10000000));
  return p;
}

std::filesystem::path output_dir(const CommandOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  return options.out_dir;
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  writer(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

// Runs `body`, mapping input errors to exit 1 and everything else to exit 2.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeFailure;
  }
}

std::string fmt(double v) { return format_number(v); }

}  // namespace

int cmd_check(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile file = load_scenario(options.scenario);
    const Scenario& sc = file.scenario;
    out << "scenario " << file.name << ": valid\n";
    out << "dt " << fmt(sc.dt()) << " (T " << fmt(sc.horizon_time) << ", N " << sc.horizon_steps << ")\n";
    out << "robot semi-axes " << fmt(sc.robot.semi_a()) << " " << fmt(sc.robot.semi_b()) << "\n";
    out << "mode " << to_string(sc.mode.kind) << ", safety margin " << fmt(sc.mode.safety_margin) << "\n";
    out << "map " << sc.grid.width() << "x" << sc.grid.height() << " cells at " << fmt(sc.grid.resolution()) << " m\n";
    for (int m = 0; m < sc.obstacles.size(); ++m) {
      const GammaInterval g = gamma_bounds(sc.robot.base_shape(), sc.obstacles.shape(m));
      out << "obstacle " << m << ": center (" << fmt(sc.obstacles.center(m).x()) << ", "
          << fmt(sc.obstacles.center(m).y()) << "), gamma bounds [" << fmt(g.lower) << ", " << fmt(g.upper) << "]\n";
    }
    PathPolyline path;
    try {
      path = plan_global_path(sc);
    } catch (const std::runtime_error& e) {
      err << "error: " << options.scenario.string() << ": goal: " << e.what() << '\n';
      return static_cast<int>(kExitInvalidInput);
    }
    out << "reference length " << fmt(path_length(path)) << " m over " << path.size() << " waypoints\n";
    return static_cast<int>(kExitSuccess);
  });
}

int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(options);
    const auto dir = output_dir(options);
    const RunLog log = run_closed_loop(p.file.scenario, p.file.settings, p.steps);
    write_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, log); });
    write_file(dir / "clearances.csv", [&](std::ostream& o) { write_clearances_csv(o, log); });
    write_json(dir / "summary.json", run_summary(p.file, log));

    double min_c = std::numeric_limits<double>::infinity();
    for (double c : log.min_clearance()) min_c = std::min(min_c, c);
    out << to_string(log.mode) << ": " << log.steps.size() << " steps, goal " << (log.goal_reached ? "reached" : "not reached")
        << ", overlap " << (log.any_overlap ? "yes" : "no") << ", min clearance " << fmt(min_c) << ", qp failures "
        << log.qp_failures << "\n";
    return static_cast<int>(log.goal_reached && !log.any_overlap ? kExitSuccess : kExitRuntimeFailure);
  });
}

int cmd_compare(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(options);
    const auto dir = output_dir(options);
    const ComparisonResult result = compare_formulations(p.file.scenario, p.file.settings, p.steps);
    write_file(dir / "comparison.csv", [&](std::ostream& o) { write_comparison_csv(o, result); });
    write_file(dir / "exceedance.csv", [&](std::ostream& o) { write_exceedance_csv(o, result); });
    write_file(dir / "timing.csv", [&](std::ostream& o) { write_timing_csv(o, result); });
    const auto summary = comparison_summary(p.file, result);
    write_json(dir / "summary.json", summary);

    out << result.records.size() << " steps compared, goal " << (result.run.goal_reached ? "reached" : "not reached")
        << "\n";
    for (const char* key : {"fixed_gamma", "free_eta", "fixed_eta"}) {
      const auto& rc = summary["modes"][key]["relative_cost"];
      out << key << ": median relative cost " << (rc.contains("median") ? rc["median"].dump() : "n/a") << ", max "
          << (rc.contains("max") ? rc["max"].dump() : "n/a") << "\n";
    }
    for (const char* key : {"free_gamma", "fixed_gamma", "free_eta", "fixed_eta"}) {
      const auto& t = summary["timing_ms"][key];
      out << key << ": median time with 2 SQP iterations "
          << (t.contains("median") ? t["median"].dump() : "n/a") << " ms\n";
    }
    const bool ok = result.run.goal_reached && !result.run.any_overlap;
    return static_cast<int>(ok ? kExitSuccess : kExitRuntimeFailure);
  });
}

int cmd_plan(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile file = load_scenario(options.scenario);
    const Scenario& sc = file.scenario;
    const auto dir = output_dir(options);
    const PathPolyline path = plan_global_path(sc);
    RobotState x0;
    x0.px = sc.start.position.x();
    x0.py = sc.start.position.y();
    x0.theta = sc.start.heading;
    const ReferenceTrajectory ref = local_reference(sc, file.settings.reference, path, x0, 0.0);
    write_file(dir / "path.csv", [&](std::ostream& o) { write_path_csv(o, path); });
    write_file(dir / "reference.csv", [&](std::ostream& o) { write_reference_csv(o, ref); });
    out << "path length " << fmt(path_length(path)) << " m over " << path.size() << " waypoints; reference of "
        << ref.horizon() << " steps\n";
    return static_cast<int>(kExitSuccess);
  });
}

}  // namespace ellmpc
