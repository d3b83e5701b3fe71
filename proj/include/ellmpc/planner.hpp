#pragma once

#include "ellmpc/collision.hpp"
#include "ellmpc/trajectory.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

namespace ellmpc {

/// Boolean occupancy grid. Cell (ix, iy) covers
/// [origin + (ix, iy) * resolution, origin + (ix + 1, iy + 1) * resolution).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int width, int height, double resolution, const Eigen::Vector2d& origin);

  /// Rows of '.' (free) and '#' (occupied). The first text row is the top row (largest y).
  static OccupancyGrid from_text(std::string_view text, double resolution, const Eigen::Vector2d& origin);
  /// Marks every cell whose center lies inside an obstacle.
  static OccupancyGrid rasterize(const ObstacleSet& obstacles, int width, int height, double resolution,
                                 const Eigen::Vector2d& origin);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Eigen::Vector2d& origin() const { return origin_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  /// Out-of-bounds cells count as occupied.
  bool occupied(int ix, int iy) const;
  void set_occupied(int ix, int iy, bool value);

  Eigen::Vector2d cell_center(int ix, int iy) const;
  /// Cell containing `p`, if inside the grid.
  std::optional<std::pair<int, int>> cell_of(const Eigen::Vector2d& p) const;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
  std::vector<unsigned char> cells_;
};

using PathPolyline = std::vector<Eigen::Vector2d>;

/// Supercover traversal between two world points: false if any touched cell is occupied.
bool line_of_sight(const OccupancyGrid& grid, const Eigen::Vector2d& a, const Eigen::Vector2d& b);

double path_length(const PathPolyline& path);

/// Any-angle search over cell centers (8-connected), with the start and goal
/// nodes at their exact world positions. Returns std::nullopt when the goal is
/// unreachable. Throws std::invalid_argument if start or goal is outside the
/// grid or in an occupied cell.
std::optional<PathPolyline> theta_star(const OccupancyGrid& grid, const Eigen::Vector2d& start,
                                       const Eigen::Vector2d& goal);

/// Planar natural cubic spline through waypoints, parameterized by chord length,
/// with an arc-length table for reparameterization.
class SmoothCurve {
 public:
  explicit SmoothCurve(std::vector<Eigen::Vector2d> waypoints);

  const std::vector<Eigen::Vector2d>& waypoints() const { return points_; }
  /// Arc length of the whole curve.
  double length() const { return arc_.empty() ? 0.0 : arc_.back(); }
  /// Position, tangent and curvature at arc length s (clamped to [0, length]).
  Eigen::Vector2d point(double s) const;
  Eigen::Vector2d tangent(double s) const;
  double curvature(double s) const;

 private:
  double param_at(double s) const;
  void eval(double u, Eigen::Vector2d* p, Eigen::Vector2d* d1, Eigen::Vector2d* d2) const;

  std::vector<Eigen::Vector2d> points_;
  std::vector<double> knots_;
  std::vector<Eigen::Vector2d> second_;  // second derivatives at the knots
  std::vector<double> table_u_;
  std::vector<double> arc_;
};

/// Clips `path` to the window [closest point to `position`, + lookahead] and
/// fits a spline through the clipped waypoints, inserting points on long
/// segments so that no two consecutive points are more than max_spacing apart.
SmoothCurve segment_and_fit(const PathPolyline& path, const Eigen::Vector2d& position, double lookahead,
                            double max_spacing = 0.5);

struct ProfileSettings {
  double v_max = 0.6;
  double a_max = 0.5;
  double dt = 0.1;
  int n = 20;
  double v0 = 0.0;              ///< speed at the start of the curve, clamped to [0, v_max]
  double heading_hint = 0.0;    ///< reference headings are unwrapped to be near this value
  double start_time = 0.0;
};

/// Trapezoidal arc-length profile (accelerate, cruise, stop at the curve end),
/// sampled every dt into N+1 states and N inputs.
ReferenceTrajectory time_parameterize(const SmoothCurve& curve, const ProfileSettings& settings);

}  // namespace ellmpc
