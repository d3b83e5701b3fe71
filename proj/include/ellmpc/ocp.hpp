#pragma once

#include "ellmpc/collision.hpp"
#include "ellmpc/planner.hpp"
#include "ellmpc/trajectory.hpp"

#include <Eigen/Sparse>

#include <optional>
#include <vector>

namespace ellmpc {

struct Limits {
  double v_min = -0.2, v_max = 0.6;
  double omega_min = -1.0, omega_max = 1.0;
  double a_min = -1.0, a_max = 1.0;
  double alpha_min = -2.0, alpha_max = 2.0;

  void validate() const;
};

struct Weights {
  Vector5d state = (Vector5d() << 10, 10, 1, 1, 1).finished();
  Eigen::Vector2d input{1.0, 1.0};
  Vector5d terminal = (Vector5d() << 100, 100, 10, 10, 10).finished();

  void validate() const;
};

struct Pose {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;
};

struct Scenario {
  RobotShape robot{0.2, 0.35};
  ObstacleSet obstacles;
  double horizon_time = 2.0;  // T, seconds
  int horizon_steps = 20;     // N
  Limits limits;
  Weights weights;
  double eps_v = 1e-2;
  double eps_omega = 1e-2;
  ConstraintMode mode;
  OccupancyGrid grid;
  Pose start;
  Pose goal;

  double dt() const { return horizon_time / horizon_steps; }
  void validate() const;
};

/// Numeric box intersected with the geometric gamma bounds.
inline constexpr double kGammaBox = 20.0;
/// L1 weight on collision slacks.
inline constexpr double kSlackPenalty = 1e4;

/// Primal iterate in trajectory form; `gamma[k][m]` / `eta[k][m]` are empty for
/// modes without those blocks.
struct TrajectoryGuess {
  std::vector<RobotState> states;
  std::vector<ControlInput> inputs;
  std::vector<std::vector<double>> gamma;
  std::vector<std::vector<Eigen::Vector2d>> eta;
};

/// Variable ordering per stage k: x_k, u_k (k < N), collision parameters, slacks.
class NlpLayout {
 public:
  NlpLayout() = default;
  NlpLayout(int n, int obstacles, ConstraintKind kind);

  int horizon() const { return n_; }
  int obstacles() const { return obstacles_; }
  ConstraintKind kind() const { return kind_; }
  /// 1 for free gamma, 2 for free eta, 0 for fixed modes.
  int param_dim() const { return param_dim_; }
  int num_vars() const { return num_vars_; }

  int x(int k) const { return offset(k); }
  int u(int k) const { return offset(k) + 5; }
  int param(int m, int k) const { return offset(k) + (k < n_ ? 7 : 5) + m * param_dim_; }
  int slack(int m, int k) const { return offset(k) + (k < n_ ? 7 : 5) + obstacles_ * param_dim_ + m; }

  int num_eq() const { return 5 * (n_ + 1); }
  /// Rows per (m, k): the collision row, plus the norm row for free eta.
  int rows_per_pair() const { return kind_ == ConstraintKind::HyperplaneFreeEta ? 2 : 1; }
  int collision_row(int m, int k) const { return (k * obstacles_ + m) * rows_per_pair(); }
  int num_ineq() const { return (n_ + 1) * obstacles_ * rows_per_pair(); }

 private:
  int offset(int k) const { return k * stage_; }

  int n_ = 0;
  int obstacles_ = 0;
  ConstraintKind kind_ = ConstraintKind::MinkowskiFreeGamma;
  int param_dim_ = 0;
  int stage_ = 0;
  int num_vars_ = 0;
};

struct NlpEvaluation {
  double objective = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd eq;  ///< x_0 - x0_bar, then x_{k+1} - rk4(x_k, u_k)
  Eigen::SparseMatrix<double> eq_jacobian;
  Eigen::VectorXd ineq;  ///< collision (and norm) rows
  Eigen::SparseMatrix<double> ineq_jacobian;
};

/**
 * Multiple-shooting transcription of the tracking OCP with one of the four
 * collision formulations. Collision rows are softened by nonnegative slacks
 * carrying an L1 penalty.
 */
class StagewiseNLP {
 public:
  const NlpLayout& layout() const { return layout_; }
  const Scenario& scenario() const { return scenario_; }
  const ReferenceTrajectory& reference() const { return reference_; }
  const RobotState& initial_state() const { return x0_; }

  const Eigen::VectorXd& initial_guess() const { return z0_; }
  void set_initial_guess(const Eigen::VectorXd& z);
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::VectorXd& ineq_lower() const { return ineq_lower_; }
  const Eigen::VectorXd& ineq_upper() const { return ineq_upper_; }

  /// Gauss-Newton Hessian of the objective (diagonal; exact for the quadratic tracking cost).
  const Eigen::SparseMatrix<double>& hessian() const { return hessian_; }
  /// Indices of the gamma/eta variables and slacks, whose Hessian blocks are zero.
  const std::vector<int>& parameter_indices() const { return param_idx_; }

  /// Fixed modes need frozen parameters before evaluation.
  bool ready() const { return !is_fixed(layout_.kind()) || frozen_; }
  const std::vector<std::vector<double>>& fixed_gamma() const { return fixed_gamma_; }
  const std::vector<std::vector<Eigen::Vector2d>>& fixed_eta() const { return fixed_eta_; }

  double objective(const Eigen::VectorXd& z) const;
  NlpEvaluation evaluate(const Eigen::VectorXd& z) const;

  /// Second derivative of sum_i mult_i c_i(z) restricted to the gamma/eta blocks,
  /// projected onto the positive semidefinite cone (zero for fixed modes).
  std::vector<Eigen::Triplet<double>> parameter_curvature(const Eigen::VectorXd& z,
                                                          const Eigen::VectorXd& mult_ineq) const;

  TrajectoryGuess unpack(const Eigen::VectorXd& z) const;
  /// Packs a guess; slacks are set to the smallest values that satisfy the collision rows.
  Eigen::VectorXd pack(const TrajectoryGuess& guess) const;

  friend StagewiseNLP assemble(const Scenario&, const ReferenceTrajectory&, const RobotState&,
                               const std::optional<TrajectoryGuess>&);
  friend StagewiseNLP freeze_parameters(const StagewiseNLP&, const TrajectoryGuess&);

 private:
  struct CollisionTerm {
    double value;                  // without the slack
    Eigen::Matrix<double, 5, 1> grad;  // d/d(px, py, theta, p1, p2); p = gamma or eta
  };
  CollisionTerm collision_term(const Eigen::VectorXd& z, int m, int k) const;
  void fill_slacks(Eigen::VectorXd& z) const;

  Scenario scenario_;
  ReferenceTrajectory reference_;
  RobotState x0_;
  NlpLayout layout_;
  Eigen::VectorXd z0_, lower_, upper_, ineq_lower_, ineq_upper_;
  Eigen::SparseMatrix<double> hessian_;
  std::vector<int> param_idx_;
  std::vector<Eigen::Matrix2d> obstacle_shapes_;
  bool frozen_ = false;
  std::vector<std::vector<double>> fixed_gamma_;
  std::vector<std::vector<Eigen::Vector2d>> fixed_eta_;
};

/// Builds the NLP around the measured state `x0`. Without a warm start the
/// initial iterate takes states from the reference, zero inputs, gamma = 0
/// (clamped into its bounds) and eta from the fixed hyperplane at the reference.
StagewiseNLP assemble(const Scenario& scenario, const ReferenceTrajectory& reference, const RobotState& x0,
                      const std::optional<TrajectoryGuess>& warm_start = std::nullopt);

/// Embeds gamma-hat / eta-hat computed at `guess` as constants. Requires a fixed mode.
StagewiseNLP freeze_parameters(const StagewiseNLP& nlp, const TrajectoryGuess& guess);

/// Stages 1..N move to 0..N-1 and the last stage is duplicated.
TrajectoryGuess shift_warm_start(const TrajectoryGuess& previous);

/// Initial guess used at the first MPC step.
TrajectoryGuess initial_guess_from_reference(const Scenario& scenario, const ReferenceTrajectory& reference,
                                             ConstraintKind kind);

/// gamma_bounds(G, M) intersected with [-kGammaBox, kGammaBox].
GammaInterval stage_gamma_bounds(const Eigen::Matrix2d& robot_shape, const Eigen::Matrix2d& obstacle_shape);

}  // namespace ellmpc
