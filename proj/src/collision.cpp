#include "ellmpc/collision.hpp"

#include "ellmpc/log.hpp"
#include "ellmpc/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace ellmpc {

std::string to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::MinkowskiFreeGamma: return "free-gamma";
    case ConstraintKind::MinkowskiFixedGamma: return "fixed-gamma";
    case ConstraintKind::HyperplaneFreeEta: return "free-eta";
    case ConstraintKind::HyperplaneFixedEta: return "fixed-eta";
  }
  return "unknown";
}

ConstraintKind parse_constraint_kind(std::string_view name) {
  if (name == "free-gamma") return ConstraintKind::MinkowskiFreeGamma;
  if (name == "fixed-gamma") return ConstraintKind::MinkowskiFixedGamma;
  if (name == "free-eta") return ConstraintKind::HyperplaneFreeEta;
  if (name == "fixed-eta") return ConstraintKind::HyperplaneFixedEta;
  throw std::invalid_argument("unknown constraint mode '" + std::string(name) +
                              "' (expected free-gamma, fixed-gamma, free-eta or fixed-eta)");
}

bool is_minkowski(ConstraintKind kind) {
  return kind == ConstraintKind::MinkowskiFreeGamma || kind == ConstraintKind::MinkowskiFixedGamma;
}

bool is_fixed(ConstraintKind kind) {
  return kind == ConstraintKind::MinkowskiFixedGamma || kind == ConstraintKind::HyperplaneFixedEta;
}

void ConstraintMode::validate() const {
  if (!(safety_margin >= 0.0)) throw std::invalid_argument("safety_margin must be >= 0");
}

ObstacleSet::ObstacleSet(std::vector<Ellipsoid> obstacles) : obstacles_(std::move(obstacles)) {
  for (const auto& e : obstacles_) {
    if (e.dim() != 2) throw std::invalid_argument("obstacles must be 2-D");
    centers_.emplace_back(e.center());
    shapes_.emplace_back(e.shape());
  }
}

double minkowski_residual(const Eigen::Vector2d& p, const Eigen::Matrix2d& g_rot, const Eigen::Vector2d& t,
                          const Eigen::Matrix2d& m, double gamma) {
  const Eigen::Vector2d d = p - t;
  if (d.squaredNorm() == 0.0) return 0.0;
  const Eigen::Matrix2d b = (1.0 + std::exp(gamma)) * g_rot + (1.0 + std::exp(-gamma)) * m;
  return d.dot(b.llt().solve(d));
}

MinkowskiEval minkowski_jacobian(const RobotState& state, const Eigen::Matrix2d& g_body,
                                 const Eigen::Vector2d& t, const Eigen::Matrix2d& m, double gamma) {
  const Eigen::Vector2d d = state.position() - t;
  const Eigen::Matrix2d g_rot = rotate_shape(g_body, state.theta);
  const Eigen::Matrix2d dg_rot = rotate_shape_derivative(g_body, state.theta);
  const double ep = std::exp(gamma), em = std::exp(-gamma);
  const Eigen::Matrix2d b = (1.0 + ep) * g_rot + (1.0 + em) * m;
  const Eigen::Vector2d w = b.llt().solve(d);  // B^{-1} d

  MinkowskiEval out;
  out.value = d.dot(w);
  // d(d^T B^{-1} d) = 2 w^T dd - w^T dB w
  out.grad(0) = 2.0 * w(0);
  out.grad(1) = 2.0 * w(1);
  out.grad(2) = -(1.0 + ep) * w.dot(dg_rot * w);
  out.grad(3) = -w.dot((ep * g_rot - em * m) * w);
  return out;
}

HyperplaneResiduals hyperplane_residuals(const Eigen::Vector2d& p, const Eigen::Matrix2d& g_rot,
                                         const Eigen::Vector2d& t, const Eigen::Matrix2d& m,
                                         const Eigen::Vector2d& eta) {
  const double sm = std::sqrt(std::max(eta.dot(m * eta), 0.0));
  const double sg = std::sqrt(std::max(eta.dot(g_rot * eta), 0.0));
  return {eta.dot(p - t) - sm - sg, 1.0 - eta.squaredNorm()};
}

HyperplaneEval hyperplane_jacobian(const RobotState& state, const Eigen::Matrix2d& g_body,
                                   const Eigen::Vector2d& t, const Eigen::Matrix2d& m,
                                   const Eigen::Vector2d& eta) {
  const Eigen::Vector2d d = state.position() - t;
  const Eigen::Matrix2d g_rot = rotate_shape(g_body, state.theta);
  const Eigen::Matrix2d dg_rot = rotate_shape_derivative(g_body, state.theta);
  // The support terms are not differentiable at eta = 0; the NLP keeps eta^T eta >= 1e-4.
  constexpr double kFloor = 1e-16;
  const double sm = std::sqrt(std::max(eta.dot(m * eta), kFloor));
  const double sg = std::sqrt(std::max(eta.dot(g_rot * eta), kFloor));

  HyperplaneEval out;
  out.value = {eta.dot(d) - sm - sg, 1.0 - eta.squaredNorm()};
  out.separation_grad(0) = eta(0);
  out.separation_grad(1) = eta(1);
  out.separation_grad(2) = -eta.dot(dg_rot * eta) / (2.0 * sg);
  out.separation_grad.tail<2>() = d - m * eta / sm - g_rot * eta / sg;
  out.norm_slack_grad = -2.0 * eta;
  return out;
}

double fixed_gamma_hat(const RobotState& guess, const Eigen::Matrix2d& g_body, const Eigen::Vector2d& t,
                       const Eigen::Matrix2d& m) {
  const Eigen::Vector2d eta = guess.position() - t;
  const Eigen::Matrix2d g_rot = rotate_shape(g_body, guess.theta);
  const GammaInterval bounds = gamma_bounds(g_rot, m);
  if (eta.squaredNorm() == 0.0) {
    log::warn("fixed_gamma_hat: robot and obstacle centers coincide, using gamma = 0");
    return bounds.clamp(0.0);
  }
  return bounds.clamp(0.5 * std::log(eta.dot(m * eta) / eta.dot(g_rot * eta)));
}

Vec fixed_eta_hat(const Ellipsoid& robot, const Ellipsoid& obstacle) {
  if (!interiors_overlap(robot, obstacle)) {
    const auto pd = oracles::ellipsoid_pair_distance(robot, obstacle);
    const Vec dir = pd.p1 - pd.p2;
    const double n = dir.norm();
    if (n > 1e-12) return dir / n;
  }
  const Vec diff = robot.center() - obstacle.center();
  const double n = diff.norm();
  if (n > 0.0) return diff / n;
  log::warn("fixed_eta_hat: coincident centers, using default direction");
  Vec out = Vec::Zero(robot.dim());
  out(0) = 1.0;
  return out;
}

}  // namespace ellmpc
