#pragma once

#include "ellmpc/dynamics.hpp"
#include "ellmpc/geometry.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace ellmpc {

enum class ConstraintKind { MinkowskiFreeGamma, MinkowskiFixedGamma, HyperplaneFreeEta, HyperplaneFixedEta };

std::string to_string(ConstraintKind kind);
/// Accepts "free-gamma", "fixed-gamma", "free-eta", "fixed-eta".
ConstraintKind parse_constraint_kind(std::string_view name);

bool is_minkowski(ConstraintKind kind);
bool is_fixed(ConstraintKind kind);

struct ConstraintMode {
  ConstraintKind kind = ConstraintKind::MinkowskiFreeGamma;
  /// Added to the required residual: >= 1 + margin (Minkowski), >= margin (hyperplane).
  double safety_margin = 0.0;

  void validate() const;
};

/// Static ellipsoidal obstacles, stored both as general ellipsoids and in 2-D form.
class ObstacleSet {
 public:
  ObstacleSet() = default;
  explicit ObstacleSet(std::vector<Ellipsoid> obstacles);

  int size() const { return static_cast<int>(obstacles_.size()); }
  bool empty() const { return obstacles_.empty(); }
  const Ellipsoid& operator[](int m) const { return obstacles_[static_cast<std::size_t>(m)]; }
  const Eigen::Vector2d& center(int m) const { return centers_[static_cast<std::size_t>(m)]; }
  const Eigen::Matrix2d& shape(int m) const { return shapes_[static_cast<std::size_t>(m)]; }
  const std::vector<Ellipsoid>& all() const { return obstacles_; }

 private:
  std::vector<Ellipsoid> obstacles_;
  std::vector<Eigen::Vector2d> centers_;
  std::vector<Eigen::Matrix2d> shapes_;
};

/// (p - t)^T [(1+e^g) G_rot + (1+e^-g) M]^{-1} (p - t).
double minkowski_residual(const Eigen::Vector2d& p, const Eigen::Matrix2d& g_rot, const Eigen::Vector2d& t,
                          const Eigen::Matrix2d& m, double gamma);

struct MinkowskiEval {
  double value;
  Eigen::Vector4d grad;  ///< d/d(px, py, theta, gamma)
};

/// Residual and exact gradient, including the heading dependence through R(theta) G R(theta)^T.
MinkowskiEval minkowski_jacobian(const RobotState& state, const Eigen::Matrix2d& g_body,
                                 const Eigen::Vector2d& t, const Eigen::Matrix2d& m, double gamma);

struct HyperplaneResiduals {
  double separation;  ///< eta^T (p - t) - sqrt(eta^T M eta) - sqrt(eta^T G_rot eta)
  double norm_slack;  ///< 1 - eta^T eta
};

HyperplaneResiduals hyperplane_residuals(const Eigen::Vector2d& p, const Eigen::Matrix2d& g_rot,
                                         const Eigen::Vector2d& t, const Eigen::Matrix2d& m,
                                         const Eigen::Vector2d& eta);

struct HyperplaneEval {
  HyperplaneResiduals value;
  Eigen::Matrix<double, 5, 1> separation_grad;  ///< d/d(px, py, theta, eta1, eta2)
  Eigen::Vector2d norm_slack_grad;              ///< d/d(eta1, eta2)
};

HyperplaneEval hyperplane_jacobian(const RobotState& state, const Eigen::Matrix2d& g_body,
                                   const Eigen::Vector2d& t, const Eigen::Matrix2d& m,
                                   const Eigen::Vector2d& eta);

/// Closed-form tight parameter in the direction p_c(x) - t, clamped to gamma_bounds.
double fixed_gamma_hat(const RobotState& guess, const Eigen::Matrix2d& g_body, const Eigen::Vector2d& t,
                       const Eigen::Matrix2d& m);

/// Unit normal of the fixed separating hyperplane, oriented from the obstacle toward the robot.
Vec fixed_eta_hat(const Ellipsoid& robot, const Ellipsoid& obstacle);

}  // namespace ellmpc
