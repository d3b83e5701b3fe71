#include "ellmpc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace ellmpc {

RobotShape::RobotShape(double semi_a, double semi_b) : semi_a_(semi_a), semi_b_(semi_b) {
  if (!(semi_a > 0.0) || !(semi_b > 0.0)) throw std::invalid_argument("robot semi-axes must be positive");
  base_ << semi_a * semi_a, 0.0, 0.0, semi_b * semi_b;
}

Eigen::Matrix2d rotate_shape(const Eigen::Matrix2d& g, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  Eigen::Matrix2d out = r * g * r.transpose();
  out(1, 0) = out(0, 1);
  return out;
}

Eigen::Matrix2d rotate_shape(const RobotShape& shape, double theta) {
  return rotate_shape(shape.base_shape(), theta);
}

Eigen::Matrix2d rotate_shape_derivative(const Eigen::Matrix2d& g, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r, dr;
  r << c, -s, s, c;
  dr << -s, -c, c, -s;
  const Eigen::Matrix2d half = dr * g * r.transpose();
  return half + half.transpose();
}

Vector5d ode_rhs(const RobotState& x, const ControlInput& u) {
  Vector5d f;
  f << x.v * std::cos(x.theta), x.v * std::sin(x.theta), x.omega, u.a, u.alpha;
  return f;
}

OdeJacobians ode_jacobians(const RobotState& x, const ControlInput& u) {
  (void)u;
  const double c = std::cos(x.theta), s = std::sin(x.theta);
  OdeJacobians j;
  j.dx.setZero();
  j.dx(0, 2) = -x.v * s;
  j.dx(0, 3) = c;
  j.dx(1, 2) = x.v * c;
  j.dx(1, 3) = s;
  j.dx(2, 4) = 1.0;
  j.du.setZero();
  j.du(3, 0) = 1.0;
  j.du(4, 1) = 1.0;
  return j;
}

Rk4Result rk4_step(const RobotState& x, const ControlInput& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const Vector5d x0 = x.vec();
  const double h = dt;

  // Forward-mode sensitivities of each stage slope w.r.t. (x, u).
  const Vector5d k1 = ode_rhs(x, u);
  const OdeJacobians j1 = ode_jacobians(x, u);
  const Matrix5d dk1_dx = j1.dx;
  const Matrix52d dk1_du = j1.du;

  const RobotState s2 = RobotState::from_vec(x0 + 0.5 * h * k1);
  const Vector5d k2 = ode_rhs(s2, u);
  const OdeJacobians j2 = ode_jacobians(s2, u);
  const Matrix5d dk2_dx = j2.dx * (Matrix5d::Identity() + 0.5 * h * dk1_dx);
  const Matrix52d dk2_du = j2.dx * (0.5 * h * dk1_du) + j2.du;

  const RobotState s3 = RobotState::from_vec(x0 + 0.5 * h * k2);
  const Vector5d k3 = ode_rhs(s3, u);
  const OdeJacobians j3 = ode_jacobians(s3, u);
  const Matrix5d dk3_dx = j3.dx * (Matrix5d::Identity() + 0.5 * h * dk2_dx);
  const Matrix52d dk3_du = j3.dx * (0.5 * h * dk2_du) + j3.du;

  const RobotState s4 = RobotState::from_vec(x0 + h * k3);
  const Vector5d k4 = ode_rhs(s4, u);
  const OdeJacobians j4 = ode_jacobians(s4, u);
  const Matrix5d dk4_dx = j4.dx * (Matrix5d::Identity() + h * dk3_dx);
  const Matrix52d dk4_du = j4.dx * (h * dk3_du) + j4.du;

  Rk4Result out;
  out.next = RobotState::from_vec(x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  out.dx = Matrix5d::Identity() + h / 6.0 * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
  out.du = h / 6.0 * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);
  return out;
}

}  // namespace ellmpc
