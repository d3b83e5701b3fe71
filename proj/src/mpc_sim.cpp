#include "ellmpc/mpc_sim.hpp"

#include "ellmpc/log.hpp"
#include "ellmpc/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ellmpc {

void ReferenceSettings::validate() const {
  if (!(v_max > 0.0) || !(a_max > 0.0)) throw std::invalid_argument("reference v_max and a_max must be > 0");
  if (!std::isfinite(lookahead)) throw std::invalid_argument("reference lookahead must be finite");
}

void SimulationSettings::validate() const {
  if (max_steps < 0) throw std::invalid_argument("simulation.max_steps must be >= 0");
  if (!(goal_tolerance > 0.0)) throw std::invalid_argument("simulation.goal_tolerance must be > 0");
  if (!(disturbance >= 0.0)) throw std::invalid_argument("simulation.disturbance must be >= 0");
}

std::vector<double> RunLog::min_clearance() const {
  std::vector<double> out;
  for (const auto& s : steps) {
    if (out.empty()) out.assign(s.clearance.size(), std::numeric_limits<double>::infinity());
    for (std::size_t m = 0; m < s.clearance.size(); ++m) out[m] = std::min(out[m], s.clearance[m]);
  }
  return out;
}

void clearances(const Scenario& scenario, const RobotState& state, std::vector<double>* distance,
                std::vector<bool>* overlap) {
  const Ellipsoid robot(state.position(), rotate_shape(scenario.robot, state.theta));
  distance->assign(static_cast<std::size_t>(scenario.obstacles.size()), 0.0);
  overlap->assign(static_cast<std::size_t>(scenario.obstacles.size()), false);
  for (int m = 0; m < scenario.obstacles.size(); ++m) {
    const auto mi = static_cast<std::size_t>(m);
    if (interiors_overlap(robot, scenario.obstacles[m])) {
      (*overlap)[mi] = true;
      continue;
    }
    (*distance)[mi] = oracles::ellipsoid_pair_distance(robot, scenario.obstacles[m]).distance;
  }
}

double distance_to_path(const PathPolyline& path, const Eigen::Vector2d& p) {
  if (path.empty()) return std::numeric_limits<double>::infinity();
  double best = (path.front() - p).norm();
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Eigen::Vector2d e = path[i + 1] - path[i];
    const double len2 = e.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - path[i]).dot(e) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (path[i] + t * e - p).norm());
  }
  return best;
}

PathPolyline plan_global_path(const Scenario& sc) {
  if (sc.grid.empty()) return {sc.start.position, sc.goal.position};
  auto path = theta_star(sc.grid, sc.start.position, sc.goal.position);
  if (!path) throw std::runtime_error("no grid path from start to goal");
  return *path;
}

ReferenceTrajectory local_reference(const Scenario& sc, const ReferenceSettings& rs, const PathPolyline& path,
                                   const RobotState& x, double time) {
  const double lookahead = rs.lookahead > 0.0 ? rs.lookahead : 1.5 * rs.v_max * sc.horizon_time;
  const SmoothCurve curve = segment_and_fit(path, x.position(), lookahead);
  ProfileSettings ps;
  ps.v_max = rs.v_max;
  ps.a_max = rs.a_max;
  ps.dt = sc.dt();
  ps.n = sc.horizon_steps;
  ps.v0 = std::clamp(x.v, 0.0, rs.v_max);
  ps.heading_hint = x.theta;
  ps.start_time = time;
  return time_parameterize(curve, ps);
}

namespace {

using Clock = std::chrono::steady_clock;

struct ModeSolve {
  SqpResult result;
  double ms = 0.0;
  std::vector<std::vector<double>> gamma_hat;
  std::vector<std::vector<Eigen::Vector2d>> eta_hat;
};

// Assembles and solves one OCP; fixed modes freeze their parameters at the warm
// start (or the first-step guess), and that work is part of the timed solve.
ModeSolve solve_mode(const Scenario& sc, const ReferenceTrajectory& ref, const RobotState& x,
                     const std::optional<TrajectoryGuess>& warm, const SqpSettings& settings) {
  ModeSolve out;
  StagewiseNLP nlp = assemble(sc, ref, x, warm);
  const auto t0 = Clock::now();
  if (is_fixed(sc.mode.kind)) {
    nlp = freeze_parameters(nlp, warm ? *warm : initial_guess_from_reference(sc, ref, sc.mode.kind));
    out.gamma_hat = nlp.fixed_gamma();
    out.eta_hat = nlp.fixed_eta();
  }
  out.result = solve(nlp, settings);
  out.ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return out;
}

bool at_goal(const Scenario& sc, const SimulationSettings& sim, const RobotState& x) {
  return (x.position() - sc.goal.position).norm() <= sim.goal_tolerance && std::abs(x.v) <= sc.eps_v;
}

// Shared receding-horizon loop; `side` runs extra work on each step's problem.
template <typename Side>
RunLog closed_loop(const Scenario& scenario, const RunSettings& settings, int steps, Side&& side) {
  scenario.validate();
  settings.solver.validate();
  settings.reference.validate();
  settings.simulation.validate();
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");

  RunLog log;
  log.mode = scenario.mode.kind;
  log.dt = scenario.dt();
  log.initial_state = {scenario.start.position.x(), scenario.start.position.y(), scenario.start.heading, 0.0, 0.0};
  log.path = plan_global_path(scenario);

  std::mt19937_64 rng(settings.simulation.seed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);

  RobotState x = log.initial_state;
  std::optional<TrajectoryGuess> warm;
  double time = 0.0;
  for (int k = 0; k < steps; ++k) {
    if (at_goal(scenario, settings.simulation, x)) {
      log.goal_reached = true;
      break;
    }
    const ReferenceTrajectory ref = local_reference(scenario, settings.reference, log.path, x, time);
    ModeSolve ms = solve_mode(scenario, ref, x, warm, settings.solver);
    side(k, time, ref, x, warm, ms);

    StepLog step;
    step.step = k;
    step.objective = ms.result.objective;
    step.sqp_iterations = ms.result.iterations;
    step.qp_iterations = ms.result.qp_iterations;
    step.solve_ms = ms.ms;
    step.status = ms.result.status;
    step.kkt_residual = ms.result.kkt_residual;
    step.max_slack = ms.result.max_slack;
    step.gamma_hat = std::move(ms.gamma_hat);
    step.eta_hat = std::move(ms.eta_hat);
    if (ms.result.status == SqpStatus::QpFailure) {
      ++log.qp_failures;
      log::warn("step " + std::to_string(k) + ": " + ms.result.diagnostics + "; applying zero input");
      step.input = ControlInput{};
    } else {
      step.input = ms.result.trajectory.inputs.front();
    }

    x = rk4_step(x, step.input, scenario.dt()).next;
    if (settings.simulation.disturbance > 0.0) {
      Vector5d w;
      for (int i = 0; i < 5; ++i) w(i) = settings.simulation.disturbance * noise(rng);
      x = RobotState::from_vec(x.vec() + w);
    }
    time += scenario.dt();
    warm = shift_warm_start(ms.result.trajectory);

    step.time = time;
    step.state = x;
    clearances(scenario, x, &step.clearance, &step.overlap);
    for (bool o : step.overlap) log.any_overlap = log.any_overlap || o;
    step.tracking_error = distance_to_path(log.path, x.position());
    log.steps.push_back(std::move(step));
  }
  if (!log.goal_reached) log.goal_reached = at_goal(scenario, settings.simulation, x);
  return log;
}

}  // namespace

RunLog run_closed_loop(const Scenario& scenario, const RunSettings& settings, int steps) {
  return closed_loop(scenario, settings, steps, [](auto&&...) {});
}

ComparisonResult compare_formulations(const Scenario& scenario, const RunSettings& settings, int steps) {
  Scenario driver = scenario;
  driver.mode = {ConstraintKind::MinkowskiFreeGamma, 0.0};
  SqpSettings early = settings.solver;
  early.max_sqp_iters = 2;

  ComparisonResult out;
  out.run = closed_loop(driver, settings, steps,
                        [&](int k, double time, const ReferenceTrajectory& ref, const RobotState& x,
                            const std::optional<TrajectoryGuess>& warm, const ModeSolve& free) {
                          ComparisonRecord rec;
                          rec.step = k;
                          rec.time = time;
                          for (std::size_t i = 0; i < kAllModes.size(); ++i) {
                            Scenario sc = driver;
                            sc.mode.kind = kAllModes[i];
                            const SqpResult full = i == 0 ? free.result : solve_mode(sc, ref, x, warm, settings.solver).result;
                            rec.objective[i] = full.objective;
                            rec.converged[i] = full.status == SqpStatus::Converged;
                            const ModeSolve fast = solve_mode(sc, ref, x, warm, early);
                            rec.early_ms[i] = fast.ms;
                            rec.early_objective[i] = fast.result.objective;
                          }
                          for (std::size_t i = 1; i < 4; ++i)
                            rec.relative_cost[i] = (rec.objective[i] - rec.objective[0]) / std::abs(rec.objective[0]);
                          out.records.push_back(rec);
                        });
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace ellmpc
