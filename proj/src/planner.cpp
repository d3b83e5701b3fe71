#include "ellmpc/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace ellmpc {

void ReferenceTrajectory::validate(int n) const {
  if (n < 1) throw std::invalid_argument("horizon must have at least one stage");
  if (static_cast<int>(states.size()) != n + 1 || static_cast<int>(inputs.size()) != n ||
      static_cast<int>(timestamps.size()) != n + 1) {
    std::ostringstream msg;
    msg << "reference lengths (" << states.size() << " states, " << inputs.size() << " inputs, "
        << timestamps.size() << " timestamps) do not match N = " << n;
    throw std::invalid_argument(msg.str());
  }
}

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, const Eigen::Vector2d& origin)
    : width_(width), height_(height), resolution_(resolution), origin_(origin) {
  if (width < 0 || height < 0) throw std::invalid_argument("grid dimensions must be nonnegative");
  if (!(resolution > 0.0) || !std::isfinite(resolution)) throw std::invalid_argument("grid resolution must be > 0");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

OccupancyGrid OccupancyGrid::from_text(std::string_view text, double resolution, const Eigen::Vector2d& origin) {
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string row(text.substr(pos, end - pos));
    if (!row.empty() && row.back() == '\r') row.pop_back();
    rows.push_back(row);
    pos = end + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw std::invalid_argument("map is empty");

  const int width = static_cast<int>(rows.front().size());
  const int height = static_cast<int>(rows.size());
  OccupancyGrid grid(width, height, resolution, origin);
  for (int r = 0; r < height; ++r) {
    const std::string& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != width)
      throw std::invalid_argument("map row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                  " cells, expected " + std::to_string(width));
    for (int c = 0; c < width; ++c) {
      const char ch = row[static_cast<std::size_t>(c)];
      if (ch != '.' && ch != '#')
        throw std::invalid_argument("map row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                    ": unexpected character '" + std::string(1, ch) + "'");
      grid.set_occupied(c, height - 1 - r, ch == '#');
    }
  }
  return grid;
}

OccupancyGrid OccupancyGrid::rasterize(const ObstacleSet& obstacles, int width, int height, double resolution,
                                       const Eigen::Vector2d& origin) {
  OccupancyGrid grid(width, height, resolution, origin);
  for (int iy = 0; iy < height; ++iy)
    for (int ix = 0; ix < width; ++ix) {
      const Vec c = grid.cell_center(ix, iy);
      for (const auto& obs : obstacles.all())
        if (obs.contains(c)) {
          grid.set_occupied(ix, iy, true);
          break;
        }
    }
  return grid;
}

bool OccupancyGrid::occupied(int ix, int iy) const {
  if (!in_bounds(ix, iy)) return true;
  return cells_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)] != 0;
}

void OccupancyGrid::set_occupied(int ix, int iy, bool value) {
  if (!in_bounds(ix, iy)) throw std::out_of_range("grid cell out of range");
  cells_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)] =
      value ? 1 : 0;
}

Eigen::Vector2d OccupancyGrid::cell_center(int ix, int iy) const {
  return origin_ + resolution_ * Eigen::Vector2d(ix + 0.5, iy + 0.5);
}

std::optional<std::pair<int, int>> OccupancyGrid::cell_of(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d g = (p - origin_) / resolution_;
  const int ix = static_cast<int>(std::floor(g.x())), iy = static_cast<int>(std::floor(g.y()));
  if (!in_bounds(ix, iy)) return std::nullopt;
  return std::make_pair(ix, iy);
}

bool line_of_sight(const OccupancyGrid& grid, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ga = (a - grid.origin()) / grid.resolution();
  const Eigen::Vector2d gb = (b - grid.origin()) / grid.resolution();
  int ix = static_cast<int>(std::floor(ga.x())), iy = static_cast<int>(std::floor(ga.y()));
  if (grid.occupied(ix, iy)) return false;

  constexpr double inf = std::numeric_limits<double>::infinity();
  const double dx = gb.x() - ga.x(), dy = gb.y() - ga.y();
  const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double delta_x = sx != 0 ? 1.0 / std::abs(dx) : inf;
  const double delta_y = sy != 0 ? 1.0 / std::abs(dy) : inf;
  double tx = sx > 0 ? (ix + 1 - ga.x()) * delta_x : (sx < 0 ? (ga.x() - ix) * delta_x : inf);
  double ty = sy > 0 ? (iy + 1 - ga.y()) * delta_y : (sy < 0 ? (ga.y() - iy) * delta_y : inf);

  constexpr double eps = 1e-12;
  while (std::min(tx, ty) < 1.0 - eps) {
    if (std::abs(tx - ty) <= eps) {
      // passing through a corner touches both side cells
      if (grid.occupied(ix + sx, iy) || grid.occupied(ix, iy + sy)) return false;
      ix += sx;
      iy += sy;
      tx += delta_x;
      ty += delta_y;
    } else if (tx < ty) {
      ix += sx;
      tx += delta_x;
    } else {
      iy += sy;
      ty += delta_y;
    }
    if (grid.occupied(ix, iy)) return false;
  }
  return true;
}

double path_length(const PathPolyline& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

std::optional<PathPolyline> theta_star(const OccupancyGrid& grid, const Eigen::Vector2d& start,
                                       const Eigen::Vector2d& goal) {
  const auto sc = grid.cell_of(start), gc = grid.cell_of(goal);
  if (!sc) throw std::invalid_argument("start lies outside the map");
  if (!gc) throw std::invalid_argument("goal lies outside the map");
  if (grid.occupied(sc->first, sc->second)) throw std::invalid_argument("start cell is occupied");
  if (grid.occupied(gc->first, gc->second)) throw std::invalid_argument("goal cell is occupied");

  const int w = grid.width();
  const int start_id = sc->second * w + sc->first;
  const int goal_id = gc->second * w + gc->first;
  if (start_id == goal_id) return PathPolyline{start, goal};

  auto pos = [&](int id) -> Eigen::Vector2d {
    if (id == start_id) return start;
    if (id == goal_id) return goal;
    return grid.cell_center(id % w, id / w);
  };

  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(grid.height());
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<unsigned char> closed(n, 0);
  using Entry = std::tuple<double, double, int>;  // f, g, cell id
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  g[static_cast<std::size_t>(start_id)] = 0.0;
  parent[static_cast<std::size_t>(start_id)] = start_id;
  open.emplace((start - goal).norm(), 0.0, start_id);

  static constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

  while (!open.empty()) {
    const auto [f, gs, s] = open.top();
    open.pop();
    const auto us = static_cast<std::size_t>(s);
    if (closed[us] || gs > g[us]) continue;
    if (s == goal_id) break;
    closed[us] = 1;
    const Eigen::Vector2d ps = pos(s);
    const int ps_parent = parent[us];
    const Eigen::Vector2d pp = pos(ps_parent);

    for (int k = 0; k < 8; ++k) {
      const int nx = s % w + kDx[k], ny = s / w + kDy[k];
      if (grid.occupied(nx, ny)) continue;
      const int nb = ny * w + nx;
      const auto un = static_cast<std::size_t>(nb);
      if (closed[un]) continue;
      const Eigen::Vector2d pn = pos(nb);
      double cand;
      int cand_parent;
      if (line_of_sight(grid, pp, pn)) {
        cand = g[static_cast<std::size_t>(ps_parent)] + (pn - pp).norm();
        cand_parent = ps_parent;
      } else if (line_of_sight(grid, ps, pn)) {
        cand = gs + (pn - ps).norm();
        cand_parent = s;
      } else {
        continue;
      }
      if (cand < g[un] - 1e-12) {
        g[un] = cand;
        parent[un] = cand_parent;
        open.emplace(cand + (pn - goal).norm(), cand, nb);
      }
    }
  }

  if (parent[static_cast<std::size_t>(goal_id)] < 0) return std::nullopt;
  PathPolyline path;
  for (int id = goal_id;; id = parent[static_cast<std::size_t>(id)]) {
    path.push_back(pos(id));
    if (id == start_id) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

SmoothCurve::SmoothCurve(std::vector<Eigen::Vector2d> waypoints) : points_(std::move(waypoints)) {
  if (points_.empty()) throw std::invalid_argument("curve needs at least one waypoint");
  const std::size_t n = points_.size();
  knots_.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double chord = (points_[i] - points_[i - 1]).norm();
    if (!(chord > 0.0)) throw std::invalid_argument("curve waypoints must be distinct");
    knots_[i] = knots_[i - 1] + chord;
  }
  second_.assign(n, Eigen::Vector2d::Zero());
  if (n >= 3) {
    // natural end conditions: tridiagonal system for the interior second derivatives
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), lower(m);
    std::vector<Eigen::Vector2d> rhs(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t i = j + 1;
      const double h0 = knots_[i] - knots_[i - 1], h1 = knots_[i + 1] - knots_[i];
      lower[j] = h0;
      diag[j] = 2.0 * (h0 + h1);
      upper[j] = h1;
      rhs[j] = 6.0 * ((points_[i + 1] - points_[i]) / h1 - (points_[i] - points_[i - 1]) / h0);
    }
    for (std::size_t j = 1; j < m; ++j) {
      const double f = lower[j] / diag[j - 1];
      diag[j] -= f * upper[j - 1];
      rhs[j] -= f * rhs[j - 1];
    }
    second_[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t j = m - 1; j-- > 0;) second_[j + 1] = (rhs[j] - upper[j] * second_[j + 2]) / diag[j];
  }

  table_u_.push_back(0.0);
  arc_.push_back(0.0);
  constexpr int kSub = 64;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Eigen::Vector2d prev = points_[i];
    for (int k = 1; k <= kSub; ++k) {
      const double u = k == kSub ? knots_[i + 1] : knots_[i] + (knots_[i + 1] - knots_[i]) * k / kSub;
      Eigen::Vector2d p;
      eval(u, &p, nullptr, nullptr);
      if (k == kSub) p = points_[i + 1];
      table_u_.push_back(u);
      arc_.push_back(arc_.back() + (p - prev).norm());
      prev = p;
    }
  }
}

void SmoothCurve::eval(double u, Eigen::Vector2d* p, Eigen::Vector2d* d1, Eigen::Vector2d* d2) const {
  if (points_.size() == 1) {
    if (p) *p = points_[0];
    if (d1) d1->setZero();
    if (d2) d2->setZero();
    return;
  }
  u = std::clamp(u, 0.0, knots_.back());
  std::size_t i = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), u) - knots_.begin());
  i = std::clamp<std::size_t>(i, 1, knots_.size() - 1) - 1;
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - u) / h, b = (u - knots_[i]) / h;
  const Eigen::Vector2d &y0 = points_[i], &y1 = points_[i + 1], &m0 = second_[i], &m1 = second_[i + 1];
  if (p) *p = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * (h * h / 6.0);
  if (d1) *d1 = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * (h / 6.0);
  if (d2) *d2 = a * m0 + b * m1;
}

double SmoothCurve::param_at(double s) const {
  if (arc_.size() < 2) return 0.0;
  s = std::clamp(s, 0.0, arc_.back());
  std::size_t j = static_cast<std::size_t>(std::upper_bound(arc_.begin(), arc_.end(), s) - arc_.begin());
  if (j >= arc_.size()) return table_u_.back();
  j = std::max<std::size_t>(j, 1);
  const double span = arc_[j] - arc_[j - 1];
  const double w = span > 0.0 ? (s - arc_[j - 1]) / span : 0.0;
  return table_u_[j - 1] + w * (table_u_[j] - table_u_[j - 1]);
}

Eigen::Vector2d SmoothCurve::point(double s) const {
  Eigen::Vector2d p;
  eval(param_at(s), &p, nullptr, nullptr);
  return p;
}

Eigen::Vector2d SmoothCurve::tangent(double s) const {
  Eigen::Vector2d d1;
  eval(param_at(s), nullptr, &d1, nullptr);
  const double n = d1.norm();
  return n > 0.0 ? Eigen::Vector2d(d1 / n) : Eigen::Vector2d::Zero();
}

double SmoothCurve::curvature(double s) const {
  Eigen::Vector2d d1, d2;
  eval(param_at(s), nullptr, &d1, &d2);
  const double n = d1.norm();
  if (n == 0.0) return 0.0;
  return (d1.x() * d2.y() - d1.y() * d2.x()) / (n * n * n);
}

SmoothCurve segment_and_fit(const PathPolyline& path, const Eigen::Vector2d& position, double lookahead,
                            double max_spacing) {
  if (path.empty()) throw std::invalid_argument("path is empty");
  if (!(lookahead >= 0.0)) throw std::invalid_argument("lookahead must be >= 0");
  if (!(max_spacing > 0.0)) throw std::invalid_argument("max_spacing must be > 0");
  if (path.size() == 1) return SmoothCurve({path.front()});

  std::size_t seg = 0;
  double seg_t = 0.0, best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Eigen::Vector2d e = path[i + 1] - path[i];
    const double len2 = e.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((position - path[i]).dot(e) / len2, 0.0, 1.0) : 0.0;
    const double d = (path[i] + t * e - position).norm();
    if (d < best) {
      best = d;
      seg = i;
      seg_t = t;
    }
  }

  std::vector<Eigen::Vector2d> window{path[seg] + seg_t * (path[seg + 1] - path[seg])};
  double remaining = lookahead;
  Eigen::Vector2d cursor = window.front();
  for (std::size_t i = seg + 1; i < path.size(); ++i) {
    const double d = (path[i] - cursor).norm();
    if (d >= remaining) {
      window.push_back(cursor + (path[i] - cursor) * (d > 0.0 ? remaining / d : 0.0));
      remaining = 0.0;
      break;
    }
    remaining -= d;
    window.push_back(path[i]);
    cursor = path[i];
  }

  // drop near-duplicate waypoints, keeping both window endpoints
  constexpr double kMinGap = 1e-3;
  std::vector<Eigen::Vector2d> pts{window.front()};
  for (std::size_t i = 1; i < window.size(); ++i) {
    const bool last = i + 1 == window.size();
    const double gap = (window[i] - pts.back()).norm();
    if (gap >= kMinGap) {
      const Eigen::Vector2d from = pts.back();
      const int pieces = static_cast<int>(std::ceil(gap / max_spacing));
      for (int j = 1; j < pieces; ++j) pts.push_back(from + (window[i] - from) * (static_cast<double>(j) / pieces));
      pts.push_back(window[i]);
    } else if (last && pts.size() > 1) {
      pts.back() = window[i];
    } else if (last && (window[i] - pts.back()).norm() > 0.0) {
      pts.push_back(window[i]);
    }
  }
  return SmoothCurve(std::move(pts));
}

namespace {

struct Trapezoid {
  double v0 = 0.0, vp = 0.0, accel = 0.0, decel = 0.0;
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;  // phase durations
  double d1 = 0.0, d2 = 0.0;            // distance after the first two phases

  // arc length, speed and acceleration at time t
  std::tuple<double, double, double> at(double t) const {
    if (t <= t1) return {v0 * t + 0.5 * accel * t * t, v0 + accel * t, accel};
    t -= t1;
    if (t <= t2) return {d1 + vp * t, vp, 0.0};
    t -= t2;
    if (t <= t3) return {d1 + d2 + vp * t - 0.5 * decel * t * t, vp - decel * t, -decel};
    return {d1 + d2 + vp * t3 - 0.5 * decel * t3 * t3, 0.0, 0.0};
  }
};

Trapezoid make_trapezoid(double length, double v_max, double a_max, double v0) {
  Trapezoid tr;
  tr.v0 = std::clamp(v0, 0.0, v_max);
  if (length <= 0.0) return tr;
  if (tr.v0 * tr.v0 >= 2.0 * a_max * length) {
    // cannot stop at a_max within the curve: brake harder
    tr.vp = tr.v0;
    tr.decel = tr.v0 * tr.v0 / (2.0 * length);
    tr.t3 = tr.v0 / tr.decel;
    return tr;
  }
  tr.accel = tr.decel = a_max;
  tr.vp = std::min(v_max, std::sqrt(0.5 * (2.0 * a_max * length + tr.v0 * tr.v0)));
  tr.t1 = (tr.vp - tr.v0) / a_max;
  tr.d1 = (tr.vp * tr.vp - tr.v0 * tr.v0) / (2.0 * a_max);
  const double d3 = tr.vp * tr.vp / (2.0 * a_max);
  tr.d2 = std::max(0.0, length - tr.d1 - d3);
  tr.t2 = tr.d2 / tr.vp;
  tr.t3 = tr.vp / a_max;
  return tr;
}

double unwrap_near(double angle, double ref) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return angle + two_pi * std::round((ref - angle) / two_pi);
}

}  // namespace

ReferenceTrajectory time_parameterize(const SmoothCurve& curve, const ProfileSettings& settings) {
  if (!(settings.v_max > 0.0) || !(settings.a_max > 0.0))
    throw std::invalid_argument("v_max and a_max must be > 0");
  if (!(settings.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (settings.n < 1) throw std::invalid_argument("N must be >= 1");

  const double length = curve.length();
  const Trapezoid tr = make_trapezoid(length, settings.v_max, settings.a_max, settings.v0);
  const int n = settings.n;

  ReferenceTrajectory ref;
  double prev_heading = settings.heading_hint;
  for (int k = 0; k <= n; ++k) {
    const double t = k * settings.dt;
    auto [s, v, acc] = tr.at(t);
    s = std::min(s, length);
    RobotState x;
    const Eigen::Vector2d p = curve.point(s);
    x.px = p.x();
    x.py = p.y();
    const Eigen::Vector2d tan = curve.tangent(s);
    const double raw = tan.squaredNorm() > 0.0 ? std::atan2(tan.y(), tan.x()) : prev_heading;
    x.theta = unwrap_near(raw, prev_heading);
    prev_heading = x.theta;
    x.v = v;
    x.omega = curve.curvature(s) * v;
    ref.states.push_back(x);
    ref.timestamps.push_back(settings.start_time + t);
  }
  for (int k = 0; k < n; ++k) {
    const auto& a = ref.states[static_cast<std::size_t>(k)];
    const auto& b = ref.states[static_cast<std::size_t>(k) + 1];
    ref.inputs.push_back({(b.v - a.v) / settings.dt, (b.omega - a.omega) / settings.dt});
  }
  return ref;
}

}  // namespace ellmpc
