#include "ellmpc/planner.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <queue>

using namespace ellmpc;
using namespace ellmpc::testing;
using Eigen::Vector2d;

namespace {

// 8-connected A* over cell centers; the first and last nodes are replaced by the exact endpoints.
std::optional<PathPolyline> astar(const OccupancyGrid& grid, const Vector2d& start, const Vector2d& goal) {
  const auto sc = grid.cell_of(start), gc = grid.cell_of(goal);
  const int w = grid.width(), h = grid.height();
  auto id = [w](int x, int y) { return y * w + x; };
  std::vector<double> g(static_cast<std::size_t>(w * h), 1e300);
  std::vector<int> parent(static_cast<std::size_t>(w * h), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  const int s = id(sc->first, sc->second), t = id(gc->first, gc->second);
  auto heur = [&](int n) {
    const int dx = std::abs(n % w - t % w), dy = std::abs(n / w - t / w);
    return std::sqrt(2.0) * std::min(dx, dy) + std::abs(dx - dy);
  };
  g[static_cast<std::size_t>(s)] = 0.0;
  open.push({heur(s), s});
  while (!open.empty()) {
    const auto [f, n] = open.top();
    open.pop();
    if (n == t) break;
    if (f > g[static_cast<std::size_t>(n)] + heur(n) + 1e-12) continue;
    const int x = n % w, y = n / w;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy) {
        if (!dx && !dy) continue;
        const int nx = x + dx, ny = y + dy;
        if (grid.occupied(nx, ny)) continue;
        // no corner cutting
        if (dx && dy && (grid.occupied(x + dx, y) || grid.occupied(x, y + dy))) continue;
        const double c = g[static_cast<std::size_t>(n)] + ((dx && dy) ? std::sqrt(2.0) : 1.0);
        const int m = id(nx, ny);
        if (c < g[static_cast<std::size_t>(m)]) {
          g[static_cast<std::size_t>(m)] = c;
          parent[static_cast<std::size_t>(m)] = n;
          open.push({c + heur(m), m});
        }
      }
  }
  if (g[static_cast<std::size_t>(t)] >= 1e300) return std::nullopt;
  PathPolyline path;
  for (int n = t; n != -1; n = parent[static_cast<std::size_t>(n)]) path.push_back(grid.cell_center(n % w, n / w));
  std::reverse(path.begin(), path.end());
  path.front() = start;
  path.back() = goal;
  return path;
}

// Greedy post-smoothing: from each kept point jump to the farthest visible later point.
PathPolyline smooth(const OccupancyGrid& grid, const PathPolyline& path) {
  PathPolyline out{path.front()};
  std::size_t i = 0;
  while (i + 1 < path.size()) {
    std::size_t j = path.size() - 1;
    while (j > i + 1 && !line_of_sight(grid, path[i], path[j])) --j;
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

OccupancyGrid text_grid(const std::string& text, double res = 1.0) { return OccupancyGrid::from_text(text, res, {0, 0}); }

}  // namespace

TEST_CASE("occupancy grid from text") {
  const auto grid = text_grid("..#\n...\n", 0.5);
  CHECK(grid.width() == 3);
  CHECK(grid.height() == 2);
  // first text row is the top row
  CHECK(grid.occupied(2, 1));
  CHECK_FALSE(grid.occupied(2, 0));
  CHECK(grid.occupied(-1, 0));
  CHECK(grid.occupied(3, 0));
  CHECK(grid.cell_center(0, 0).isApprox(Vector2d(0.25, 0.25)));
  CHECK(grid.cell_of({1.4, 0.9}) == std::make_pair(2, 1));
  CHECK_FALSE(grid.cell_of({-0.1, 0.2}).has_value());

  CHECK_THROWS_AS(text_grid("..\n...\n"), std::invalid_argument);
  CHECK_THROWS_AS(text_grid(".x.\n"), std::invalid_argument);
  CHECK_THROWS_AS(OccupancyGrid::from_text("..\n", 0.0, {0, 0}), std::invalid_argument);
}

TEST_CASE("rasterized obstacles") {
  const ObstacleSet obs({Ellipsoid::from_axes_2d({2.0, 2.0}, 1.0, 0.5, 0.0)});
  const auto grid = OccupancyGrid::rasterize(obs, 40, 40, 0.1, {0, 0});
  for (int ix = 0; ix < 40; ++ix)
    for (int iy = 0; iy < 40; ++iy) CHECK(grid.occupied(ix, iy) == obs[0].contains(grid.cell_center(ix, iy)));
}

TEST_CASE("line of sight") {
  const auto grid = text_grid(
      ".....\n"
      "..#..\n"
      ".....\n");
  CHECK(line_of_sight(grid, {0.5, 0.5}, {4.5, 0.5}));
  CHECK_FALSE(line_of_sight(grid, {0.5, 1.5}, {4.5, 1.5}));
  CHECK_FALSE(line_of_sight(grid, {0.5, 0.5}, {4.5, 2.5}));
  CHECK(line_of_sight(grid, {0.5, 2.5}, {1.5, 2.5}));
  // passing exactly through the corner of the blocked cell touches it
  CHECK_FALSE(line_of_sight(grid, {1.0, 0.0}, {3.0, 2.0}));
  // symmetric
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vector2d a(uniform(rng, 0, 5), uniform(rng, 0, 3)), b(uniform(rng, 0, 5), uniform(rng, 0, 3));
    CHECK(line_of_sight(grid, a, b) == line_of_sight(grid, b, a));
  }
}

TEST_CASE("theta_star on an empty grid is a straight line") {
  const OccupancyGrid grid(20, 10, 0.1, {0, 0});
  const auto path = theta_star(grid, {0.05, 0.05}, {1.93, 0.71});
  REQUIRE(path.has_value());
  REQUIRE(path->size() == 2);
  CHECK(path->front().isApprox(Vector2d(0.05, 0.05)));
  CHECK(path->back().isApprox(Vector2d(1.93, 0.71)));
}

TEST_CASE("theta_star through a gap in a wall") {
  std::string text;
  for (int row = 0; row < 20; ++row) {
    std::string line(30, '.');
    if (row != 14) line[15] = '#';
    text += line + "\n";
  }
  const auto grid = text_grid(text, 0.1);
  const Vector2d start(0.25, 1.05), goal(2.85, 0.95);
  const auto path = theta_star(grid, start, goal);
  REQUIRE(path.has_value());
  for (std::size_t i = 0; i + 1 < path->size(); ++i) CHECK(line_of_sight(grid, (*path)[i], (*path)[i + 1]));
  // passes through the gap cell at row 14 from the top -> iy = 5
  bool through_gap = false;
  for (std::size_t i = 0; i + 1 < path->size(); ++i) {
    const Vector2d a = (*path)[i], b = (*path)[i + 1];
    if ((a.x() - 1.55) * (b.x() - 1.55) <= 0.0) {
      const double t = (1.55 - a.x()) / (b.x() - a.x());
      const double y = a.y() + t * (b.y() - a.y());
      through_gap = y > 0.5 && y < 0.6;
    }
  }
  CHECK(through_gap);

  const auto a = astar(grid, start, goal);
  REQUIRE(a.has_value());
  const double oracle = path_length(smooth(grid, *a));
  CHECK(path_length(*path) <= path_length(*a) + 1e-9);
  CHECK(std::abs(path_length(*path) - oracle) <= 0.05 * oracle);
}

TEST_CASE("theta_star reports unreachable goals and rejects blocked endpoints") {
  const auto grid = text_grid(
      "......\n"
      "...###\n"
      "...#..\n"
      "...###\n");
  CHECK_FALSE(theta_star(grid, {0.5, 0.5}, {4.5, 1.5}).has_value());
  CHECK_THROWS_AS(theta_star(grid, {3.5, 2.5}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(theta_star(grid, {-1.0, 0.5}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("theta_star on random grids") {
  Rng rng(17);
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    OccupancyGrid grid(25, 25, 0.2, {-1.0, 2.0});
    for (int ix = 0; ix < 25; ++ix)
      for (int iy = 0; iy < 25; ++iy) grid.set_occupied(ix, iy, uniform(rng, 0, 1) < 0.25);
    grid.set_occupied(0, 0, false);
    grid.set_occupied(24, 24, false);
    const Vector2d s = grid.cell_center(0, 0), g = grid.cell_center(24, 24);
    const auto path = theta_star(grid, s, g);
    const auto ref = astar(grid, s, g);
    CHECK(path.has_value() == ref.has_value());
    if (!path || !ref) continue;
    ++solved;
    CHECK(path->front() == s);
    CHECK(path->back() == g);
    for (std::size_t i = 0; i + 1 < path->size(); ++i) CHECK(line_of_sight(grid, (*path)[i], (*path)[i + 1]));
    CHECK(path_length(*path) <= path_length(*ref) + 1e-9);
    // deterministic
    const auto again = theta_star(grid, s, g);
    REQUIRE(again.has_value());
    CHECK(again->size() == path->size());
    for (std::size_t i = 0; i < path->size() && i < again->size(); ++i) CHECK((*again)[i] == (*path)[i]);
  }
  CHECK(solved >= 20);
}

TEST_CASE("spline through a straight polyline is the line") {
  const SmoothCurve curve({{0, 0}, {1, 1}, {2.5, 2.5}, {3, 3}});
  CHECK(curve.length() == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-9));
  for (int i = 0; i <= 50; ++i) {
    const double s = curve.length() * i / 50.0;
    const Vector2d p = curve.point(s);
    CHECK(std::abs(p.x() - p.y()) <= 1e-9);
    CHECK(std::abs(curve.curvature(s)) <= 1e-9);
    CHECK(curve.tangent(s).isApprox(Vector2d(1, 1).normalized(), 1e-9));
  }
  CHECK((curve.point(0.0) - Vector2d(0, 0)).norm() <= 1e-9);
  CHECK((curve.point(curve.length()) - Vector2d(3, 3)).norm() <= 1e-9);
  CHECK_THROWS_AS(SmoothCurve({}), std::invalid_argument);
}

TEST_CASE("spline arc length matches dense sampling") {
  const SmoothCurve curve({{0, 0}, {1, 0.5}, {2, -0.3}, {3.5, 0.2}});
  double len = 0.0;
  Vector2d prev = curve.point(0.0);
  for (int i = 1; i <= 4000; ++i) {
    const Vector2d p = curve.point(curve.length() * i / 4000.0);
    len += (p - prev).norm();
    prev = p;
  }
  CHECK(std::abs(len - curve.length()) <= 1e-4 * curve.length());
  // arc-length parameterization: unit-speed tangent, equal steps give equal chord lengths
  const double h = 1e-3;
  for (double s : {0.3, 1.1, 2.0, 3.2}) {
    CHECK((curve.point(s + h) - curve.point(s)).norm() == doctest::Approx(h).epsilon(1e-3));
    CHECK(curve.tangent(s).norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("L-shaped corner stays within one cell") {
  std::string text;
  for (int row = 0; row < 30; ++row) {
    std::string line(30, '.');
    if (row >= 6) line.replace(6, 24, std::string(24, '#'));
    text += line + "\n";
  }
  const double res = 0.1;
  const auto grid = text_grid(text, res);
  const auto path = theta_star(grid, {0.25, 0.25}, {2.75, 2.75});
  REQUIRE(path.has_value());
  REQUIRE(path->size() >= 3);
  const SmoothCurve curve = segment_and_fit(*path, path->front(), 100.0);
  auto dist = [&](const Vector2d& p) {
    double best = 1e300;
    for (std::size_t i = 0; i + 1 < path->size(); ++i) {
      const Vector2d a = (*path)[i], e = (*path)[i + 1] - a;
      const double t = std::clamp((p - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (a + t * e - p).norm());
    }
    return best;
  };
  for (int i = 0; i < 100; ++i) CHECK(dist(curve.point(curve.length() * i / 99.0)) <= res);
}

TEST_CASE("segment_and_fit clips a window") {
  const PathPolyline path{{0, 0}, {4, 0}, {4, 3}};
  const auto curve = segment_and_fit(path, {1.0, 0.2}, 2.0);
  CHECK((curve.point(0.0) - Vector2d(1.0, 0.0)).norm() <= 1e-9);
  CHECK((curve.point(curve.length()) - Vector2d(3.0, 0.0)).norm() <= 1e-9);

  const auto around = segment_and_fit(path, {3.5, 0.0}, 2.0);
  CHECK((around.point(around.length()) - Vector2d(4.0, 1.5)).norm() <= 1e-9);

  const auto tail = segment_and_fit(path, {3.9, 2.0}, 50.0);
  CHECK((tail.point(0.0) - Vector2d(4.0, 2.0)).norm() <= 1e-9);
  CHECK((tail.point(tail.length()) - Vector2d(4.0, 3.0)).norm() <= 1e-9);

  const auto at_goal = segment_and_fit(path, {4.0, 3.0}, 1.0);
  CHECK(at_goal.length() <= 1e-9);
  CHECK((at_goal.point(0.0) - Vector2d(4.0, 3.0)).norm() <= 1e-9);
}

namespace {

double trapezoid_time(double len, double v, double a) {
  return len >= v * v / a ? len / v + v / a : 2.0 * std::sqrt(len / a);
}

}  // namespace

TEST_CASE("trapezoidal time parameterization") {
  ProfileSettings ps;
  ps.v_max = 0.6;
  ps.a_max = 0.5;
  ps.dt = 0.1;
  ps.n = 200;

  SUBCASE("long straight segment cruises at v_max") {
    const SmoothCurve line({{0, 0}, {6, 0}});
    const auto ref = time_parameterize(line, ps);
    CHECK(ref.horizon() == 200);
    CHECK(ref.states.size() == 201);
    CHECK(ref.inputs.size() == 200);
    const double t_total = trapezoid_time(6.0, 0.6, 0.5);
    const int mid = static_cast<int>(0.5 * t_total / ps.dt);
    CHECK(ref.states[static_cast<std::size_t>(mid)].v == doctest::Approx(0.6).epsilon(1e-12));
    // arrival time vs the closed form
    int arrive = -1;
    for (int k = 0; k <= 200; ++k)
      if ((ref.states[static_cast<std::size_t>(k)].position() - Vector2d(6, 0)).norm() <= 1e-9) {
        arrive = k;
        break;
      }
    REQUIRE(arrive >= 0);
    CHECK(std::abs(arrive * ps.dt - t_total) <= ps.dt);
    for (const auto& x : ref.states) {
      CHECK(x.v <= 0.6 + 1e-12);
      CHECK(x.v >= 0.0);
    }
    for (const auto& u : ref.inputs) CHECK(std::abs(u.a) <= 0.5 + 1e-9);
  }

  SUBCASE("short segment has a triangular profile") {
    const SmoothCurve line({{0, 0}, {0, 0.5}});
    const auto ref = time_parameterize(line, ps);
    double peak = 0.0;
    for (const auto& x : ref.states) peak = std::max(peak, x.v);
    CHECK(peak < 0.6);
    CHECK(peak == doctest::Approx(std::sqrt(0.5 * 0.5)).epsilon(0.05));
    CHECK(ref.states.back().v == doctest::Approx(0.0));
    CHECK(ref.states[3].theta == doctest::Approx(std::numbers::pi / 2));
  }

  SUBCASE("kinematic consistency on a curve") {
    const SmoothCurve curve({{0, 0}, {1, 0.4}, {2, 0.0}, {3, -0.5}});
    double kmax = 0.0;
    for (int i = 0; i <= 400; ++i) kmax = std::max(kmax, std::abs(curve.curvature(curve.length() * i / 400.0)));
    ps.n = 60;
    const auto ref = time_parameterize(curve, ps);
    const double bound = (ps.a_max + ps.v_max * ps.v_max * kmax + ps.v_max * kmax) * ps.dt * ps.dt;
    for (std::size_t k = 0; k + 1 < ref.states.size(); ++k) {
      const auto& x = ref.states[k];
      const auto& y = ref.states[k + 1];
      const Vector2d pred = x.position() + x.v * ps.dt * Vector2d(std::cos(x.theta), std::sin(x.theta));
      CHECK((y.position() - pred).norm() <= bound);
    }
    for (std::size_t k = 0; k < ref.timestamps.size(); ++k) CHECK(ref.timestamps[k] == doctest::Approx(0.1 * k));
  }

  SUBCASE("non-zero initial speed and heading unwrapping") {
    ps.v0 = 0.4;
    ps.heading_hint = 4.0 * std::numbers::pi;
    ps.n = 20;
    const SmoothCurve line({{0, 0}, {5, 0}});
    const auto ref = time_parameterize(line, ps);
    CHECK(ref.states[0].v == doctest::Approx(0.4));
    CHECK(ref.states[0].theta == doctest::Approx(4.0 * std::numbers::pi));
  }
}
