#pragma once

#include "ellmpc/ocp.hpp"
#include "ellmpc/planner.hpp"
#include "ellmpc/sqp.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ellmpc {

struct ReferenceSettings {
  double v_max = 0.6;
  double a_max = 0.5;
  /// Window length along the global path; <= 0 selects 1.5 * v_max * T.
  double lookahead = 0.0;

  void validate() const;
};

struct SimulationSettings {
  int max_steps = 400;
  double goal_tolerance = 0.05;
  std::uint64_t seed = 0;
  /// Half-width of a uniform additive disturbance on (px, py, theta, v, omega); 0 disables it.
  double disturbance = 0.0;

  void validate() const;
};

struct RunSettings {
  SqpSettings solver;
  ReferenceSettings reference;
  SimulationSettings simulation;
};

struct StepLog {
  int step = 0;
  double time = 0.0;  ///< time of `state`
  ControlInput input;  ///< applied over [time - dt, time]
  RobotState state;    ///< plant state after applying `input`
  std::vector<double> clearance;
  std::vector<bool> overlap;
  double tracking_error = 0.0;  ///< distance from the global path
  double objective = 0.0;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  double solve_ms = 0.0;
  SqpStatus status = SqpStatus::Converged;
  double kkt_residual = 0.0;
  double max_slack = 0.0;
  /// Frozen parameters per stage and obstacle (fixed modes only).
  std::vector<std::vector<double>> gamma_hat;
  std::vector<std::vector<Eigen::Vector2d>> eta_hat;
};

struct RunLog {
  ConstraintKind mode = ConstraintKind::MinkowskiFreeGamma;
  double dt = 0.0;
  RobotState initial_state;
  PathPolyline path;
  std::vector<StepLog> steps;
  bool goal_reached = false;
  bool any_overlap = false;
  int qp_failures = 0;

  /// Per obstacle, over all logged states; +inf without steps.
  std::vector<double> min_clearance() const;
};

/// Clearance between the robot at `state` and each obstacle (0 and flagged when interiors overlap).
void clearances(const Scenario& scenario, const RobotState& state, std::vector<double>* distance,
                std::vector<bool>* overlap);

double distance_to_path(const PathPolyline& path, const Eigen::Vector2d& p);

/// Theta* path on the scenario grid (straight line without a grid). Throws
/// std::runtime_error when the goal is unreachable.
PathPolyline plan_global_path(const Scenario& scenario);

/// Reference for the OCP at state `x`: path window of length lookahead from the
/// closest point, spline fit and trapezoidal timing starting at the current speed.
ReferenceTrajectory local_reference(const Scenario& scenario, const ReferenceSettings& settings,
                                    const PathPolyline& path, const RobotState& x, double time);

/// Closed-loop receding-horizon run in the scenario's mode. Throws
/// std::runtime_error if the global path cannot be found.
RunLog run_closed_loop(const Scenario& scenario, const RunSettings& settings, int steps);

enum ModeIndex { kFreeGamma = 0, kFixedGamma = 1, kFreeEta = 2, kFixedEta = 3 };
inline constexpr std::array<ConstraintKind, 4> kAllModes = {
    ConstraintKind::MinkowskiFreeGamma, ConstraintKind::MinkowskiFixedGamma, ConstraintKind::HyperplaneFreeEta,
    ConstraintKind::HyperplaneFixedEta};

struct ComparisonRecord {
  int step = 0;
  double time = 0.0;
  std::array<double, 4> objective{};
  std::array<bool, 4> converged{};
  /// (objective - free objective) / free objective, for modes 1..3; entry 0 is 0.
  std::array<double, 4> relative_cost{};
  /// Solve time with max_sqp_iters = 2, per mode.
  std::array<double, 4> early_ms{};
  std::array<double, 4> early_objective{};

  bool valid(int mode) const { return converged[0] && converged[static_cast<std::size_t>(mode)]; }
};

struct ComparisonResult {
  RunLog run;
  std::vector<ComparisonRecord> records;
};

/// Drives the loop in free-gamma mode. At every step the same OCP (same
/// reference and warm start, safety margin 0) is also solved in the three other
/// modes to convergence, and all four modes are timed with two SQP iterations.
ComparisonResult compare_formulations(const Scenario& scenario, const RunSettings& settings, int steps);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double q);

}  // namespace ellmpc
