#pragma once

#include <Eigen/Dense>

namespace ellmpc {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix52d = Eigen::Matrix<double, 5, 2>;

/// Differential-drive state (px, py, theta, v, omega). Heading is never wrapped.
struct RobotState {
  double px = 0.0;     // m
  double py = 0.0;     // m
  double theta = 0.0;  // rad
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s

  Vector5d vec() const { return (Vector5d() << px, py, theta, v, omega).finished(); }
  static RobotState from_vec(const Vector5d& x) { return {x(0), x(1), x(2), x(3), x(4)}; }
  Eigen::Vector2d position() const { return {px, py}; }
};

/// Forward and angular acceleration.
struct ControlInput {
  double a = 0.0;      // m/s^2
  double alpha = 0.0;  // rad/s^2

  Eigen::Vector2d vec() const { return {a, alpha}; }
  static ControlInput from_vec(const Eigen::Vector2d& u) { return {u(0), u(1)}; }
};

/// Robot footprint E(0, G) in the body frame, G = diag(a^2, b^2); the first
/// axis points along the heading.
class RobotShape {
 public:
  RobotShape(double semi_a, double semi_b);
  /// Table-style full axis lengths (the semi-axes are half of these).
  static RobotShape from_full_axes(double len_a, double len_b) { return {0.5 * len_a, 0.5 * len_b}; }

  double semi_a() const { return semi_a_; }
  double semi_b() const { return semi_b_; }
  const Eigen::Matrix2d& base_shape() const { return base_; }

 private:
  double semi_a_;
  double semi_b_;
  Eigen::Matrix2d base_;
};

/// R(theta) G R(theta)^T.
Eigen::Matrix2d rotate_shape(const RobotShape& shape, double theta);
Eigen::Matrix2d rotate_shape(const Eigen::Matrix2d& g, double theta);
/// d/dtheta of R(theta) G R(theta)^T.
Eigen::Matrix2d rotate_shape_derivative(const Eigen::Matrix2d& g, double theta);

Vector5d ode_rhs(const RobotState& x, const ControlInput& u);

struct OdeJacobians {
  Matrix5d dx;
  Matrix52d du;
};
OdeJacobians ode_jacobians(const RobotState& x, const ControlInput& u);

struct Rk4Result {
  RobotState next;
  Matrix5d dx;   ///< d next / d x
  Matrix52d du;  ///< d next / d u
};

/// One classical RK4 step with the input held constant over `dt`.
Rk4Result rk4_step(const RobotState& x, const ControlInput& u, double dt);

}  // namespace ellmpc
