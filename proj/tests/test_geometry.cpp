#include "ellmpc/geometry.hpp"
#include "ellmpc/oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace ellmpc;
using namespace ellmpc::testing;

namespace {

Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }
Mat diag2(double a, double b) { return Eigen::Vector2d(a, b).asDiagonal(); }

}  // namespace

TEST_CASE("ellipsoid construction validates the shape") {
  CHECK_NOTHROW(Ellipsoid(v2(0, 0), Mat::Identity(2, 2)));
  CHECK_THROWS_AS(Ellipsoid(v2(0, 0), diag2(1.0, 0.0)), std::invalid_argument);
  Mat asym(2, 2);
  asym << 1.0, 0.1, 0.0, 1.0;
  CHECK_THROWS_AS(Ellipsoid(v2(0, 0), asym), std::invalid_argument);
  CHECK_THROWS_AS(Ellipsoid(Vec::Zero(3), Mat::Identity(2, 2)), std::invalid_argument);
  CHECK_THROWS_AS(Ellipsoid::from_axes_2d({0, 0}, 0.0, 1.0, 0.0), std::invalid_argument);

  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Ellipsoid e(random_direction(rng, 3), random_pd(rng, 3));
    CHECK(e.contains(e.center()));
  }
}

TEST_CASE("support_value closed form") {
  CHECK(support_value(v2(1, 0), Mat::Identity(2, 2)) == doctest::Approx(1.0));
  CHECK(support_value(v2(0, 1), diag2(4, 1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(support_value(v2(0, 0), Mat::Identity(2, 2)), std::invalid_argument);
  CHECK_THROWS_AS(support_value(v2(1, 0), diag2(1, -1)), std::invalid_argument);

  // Boundary-sampling oracle: max of eta^T b over 1e5 boundary points.
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat m = random_pd2(rng);
    const Vec eta = random_direction(rng, 2);
    double best = -1e300;
    constexpr int kSamples = 100000;
    for (int i = 0; i < kSamples; ++i) {
      const double a = 2.0 * std::numbers::pi * i / kSamples;
      best = std::max(best, eta.dot(oracles::boundary_point(m, v2(std::cos(a), std::sin(a)))));
    }
    CHECK(rel_err(support_value(eta, m), best) <= 1e-3);
    // positive homogeneity
    CHECK(support_value(3.5 * eta, m) == doctest::Approx(3.5 * support_value(eta, m)).epsilon(1e-12));
  }
}

TEST_CASE("beta_from_gamma") {
  auto [a, b] = beta_from_gamma(0.0);
  CHECK(a == doctest::Approx(0.5));
  CHECK(b == doctest::Approx(0.5));
  std::tie(a, b) = beta_from_gamma(std::log(2.0));
  CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(b == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  std::tie(a, b) = beta_from_gamma(-std::log(2.0));
  CHECK(a == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(b == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (double g : {-30.0, -5.0, -0.1, 0.3, 7.0, 25.0}) {
    std::tie(a, b) = beta_from_gamma(g);
    CHECK(a > 0.0);
    CHECK(b > 0.0);
    CHECK(std::abs(a + b - 1.0) <= 1e-15);
  }
}

TEST_CASE("overapprox_shape") {
  CHECK(overapprox_shape(Mat::Identity(2, 2), Mat::Identity(2, 2), 0.0).isApprox(4.0 * Mat::Identity(2, 2)));
  const double r1 = 0.7, r2 = 1.9;
  const Mat b = overapprox_shape(r1 * r1 * Mat::Identity(2, 2), r2 * r2 * Mat::Identity(2, 2), std::log(r2 / r1));
  CHECK(b.isApprox((r1 + r2) * (r1 + r2) * Mat::Identity(2, 2), 1e-12));
  CHECK_THROWS_AS(overapprox_shape(diag2(1, 0), Mat::Identity(2, 2), 0.0), std::invalid_argument);

  // Sampled-sum containment.
  Rng rng(11);
  for (int pair = 0; pair < 5; ++pair) {
    const Mat m1 = random_pd2(rng), m2 = random_pd2(rng);
    const auto pts = oracles::sampled_minkowski_points(m1, m2, 10000, rng());
    for (int k = 0; k < 5; ++k) {
      const double g = uniform(rng, -4.0, 4.0);
      const Mat bb = overapprox_shape(m1, m2, g);
      CHECK(is_symmetric_pd(bb));
      const Eigen::LLT<Mat> llt(bb);
      double worst = 0.0;
      for (const auto& p : pts) worst = std::max(worst, p.dot(llt.solve(p)));
      CHECK(worst <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("gamma_star") {
  Rng rng(3);
  const Mat m = random_pd2(rng);
  CHECK(gamma_star(random_direction(rng, 2), m, m) == doctest::Approx(0.0));
  CHECK(gamma_star(random_direction(rng, 2), Mat::Identity(2, 2), 4.0 * Mat::Identity(2, 2)) ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(gamma_star(v2(0, 0), m, m), std::invalid_argument);

  for (int trial = 0; trial < 200; ++trial) {
    const Mat m1 = random_pd2(rng), m2 = random_pd2(rng);
    const Vec eta = random_direction(rng, 2);
    const double g = gamma_star(eta, m1, m2);
    const double g_search = oracles::golden_section_argmin(
        [&](double gg) { return support_value(eta, overapprox_shape(m1, m2, gg)); }, -20.0, 20.0, 1e-10);
    CHECK(std::abs(g - g_search) <= 1e-6);
    // symmetry and scale invariance
    CHECK(gamma_star(eta, m2, m1) == doctest::Approx(-g).epsilon(1e-12));
    CHECK(gamma_star(-2.5 * eta, m1, m2) == doctest::Approx(g).epsilon(1e-12));
    // tightness
    const double tight = support_value(eta, overapprox_shape(m1, m2, g));
    CHECK(rel_err(tight, support_value(eta, m1) + support_value(eta, m2)) <= 1e-10);
  }
}

TEST_CASE("support of the over-approximation is convex in gamma") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat m1 = random_pd(rng, 3), m2 = random_pd(rng, 3);
    const Vec eta = random_direction(rng, 3);
    const double g0 = uniform(rng, -6, 6), g1 = uniform(rng, -6, 6);
    auto f = [&](double g) { return support_value(eta, overapprox_shape(m1, m2, g)); };
    CHECK(f(0.5 * (g0 + g1)) <= 0.5 * (f(g0) + f(g1)) + 1e-12);
  }
}

TEST_CASE("gamma_bounds") {
  auto b = gamma_bounds(Mat::Identity(2, 2), Mat::Identity(2, 2));
  CHECK(b.lower == doctest::Approx(0.0));
  CHECK(b.upper == doctest::Approx(0.0));
  b = gamma_bounds(diag2(1, 4), diag2(9, 1));
  CHECK(b.lower == doctest::Approx(-std::log(2.0)));
  CHECK(b.upper == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(gamma_bounds(diag2(1, 0), Mat::Identity(2, 2)), std::invalid_argument);

  Rng rng(9);
  for (int n : {2, 3, 4}) {
    for (int pair = 0; pair < 20; ++pair) {
      const Mat m1 = random_pd(rng, n), m2 = random_pd(rng, n);
      const auto bounds = gamma_bounds(m1, m2);
      CHECK(bounds.lower <= bounds.upper);
      for (int k = 0; k < 500; ++k) CHECK(bounds.contains(gamma_star(random_direction(rng, n), m1, m2), 1e-12));
    }
  }
}

TEST_CASE("interiors_overlap") {
  const Ellipsoid c0(v2(0, 0), Mat::Identity(2, 2));
  CHECK_FALSE(interiors_overlap(c0, Ellipsoid(v2(2, 0), Mat::Identity(2, 2))));
  CHECK(interiors_overlap(c0, Ellipsoid(v2(1.9, 0), Mat::Identity(2, 2))));
  CHECK(interiors_overlap(c0, c0));

  Rng rng(13);
  int disagreements = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Ellipsoid e1(random_direction(rng, 2) * 0.5, random_pd2(rng, 0.1, 2.0));
    const Ellipsoid e2(random_direction(rng, 2) * uniform(rng, 0.1, 1.5), random_pd2(rng, 0.1, 2.0));
    const bool fast = interiors_overlap(e1, e2);
    if (fast != oracles::overlap_by_convex_program(e1, e2)) ++disagreements;
    CHECK(fast == interiors_overlap(e2, e1));
    const Vec shift = random_direction(rng, 2) * 3.0;
    CHECK(fast == interiors_overlap(Ellipsoid(e1.center() + shift, e1.shape()),
                                    Ellipsoid(e2.center() + shift, e2.shape())));
  }
  CHECK(disagreements == 0);
}
