#include "ellmpc/oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ellmpc::oracles {

namespace {

struct PrincipalAxes {
  Mat axes;    // columns scaled by sqrt(eigenvalue)
  Vec values;  // eigenvalues
  Mat vectors;
};

PrincipalAxes principal_axes(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  PrincipalAxes out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  out.axes = out.vectors * out.values.cwiseSqrt().asDiagonal();
  return out;
}

Vec unit_circle(double angle) {
  Vec u(2);
  u << std::cos(angle), std::sin(angle);
  return u;
}

Vec random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec u(n);
  do {
    for (int i = 0; i < n; ++i) u(i) = normal(rng);
  } while (u.norm() < 1e-12);
  return u.normalized();
}

}  // namespace

void OracleConfig::validate() const {
  if (sample_count < 1000) throw std::invalid_argument("oracle sample_count must be >= 1000");
  if (!(tolerance > 0.0)) throw std::invalid_argument("oracle tolerance must be positive");
}

Vec boundary_point(const Mat& m, const Vec& unit_dir) { return principal_axes(m).axes * unit_dir; }

std::vector<Vec> sampled_minkowski_points(const Mat& m1, const Mat& m2, int count, std::uint64_t seed) {
  require_pd(m1, "M1");
  require_pd(m2, "M2");
  std::mt19937_64 rng(seed);
  const PrincipalAxes a1 = principal_axes(m1);
  const PrincipalAxes a2 = principal_axes(m2);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  if (m1.rows() == 2) {
    const int k = std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(count)))));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi / k);
    const double ph1 = phase(rng), ph2 = phase(rng);
    std::vector<Vec> b(k), d(k);
    for (int i = 0; i < k; ++i) {
      b[i] = a1.axes * unit_circle(ph1 + 2.0 * std::numbers::pi * i / k);
      d[i] = a2.axes * unit_circle(ph2 + 2.0 * std::numbers::pi * i / k);
    }
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out.push_back(b[i] + d[j]);
    return out;
  }
  const int n = static_cast<int>(m1.rows());
  for (int i = 0; i < count; ++i) out.push_back(a1.axes * random_unit(n, rng) + a2.axes * random_unit(n, rng));
  return out;
}

std::vector<Vec> sampled_minkowski_points_aligned(const Mat& m1, const Mat& m2, int count) {
  require_pd(m1, "M1");
  require_pd(m2, "M2");
  if (m1.rows() != 2) throw std::invalid_argument("aligned sampling is 2-D only");
  const PrincipalAxes a1 = principal_axes(m1);
  const PrincipalAxes a2 = principal_axes(m2);
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) {
    const Vec u = unit_circle(2.0 * std::numbers::pi * i / count);
    Vec p = a1.axes * u + a2.axes * u;
    // Snap rounding noise so axis-aligned samples are exact.
    for (int j = 0; j < p.size(); ++j)
      if (std::abs(p(j)) < 1e-14) p(j) = 0.0;
    out.push_back(p);
  }
  return out;
}

Vec project_onto_ellipsoid(const Ellipsoid& e, const Vec& y) {
  const Vec rel = y - e.center();
  if (e.quadratic_form(y) <= 1.0) return y;
  const PrincipalAxes pa = principal_axes(e.shape());
  const Vec c = pa.vectors.transpose() * rel;
  const Vec& lam = pa.values;

  // phi(mu) = sum lam_i c_i^2 / (lam_i + mu)^2 - 1 is convex and decreasing on mu >= 0.
  auto phi = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < c.size(); ++i) s += lam(i) * c(i) * c(i) / ((lam(i) + mu) * (lam(i) + mu));
    return s - 1.0;
  };
  auto dphi = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < c.size(); ++i) {
      const double den = lam(i) + mu;
      s -= 2.0 * lam(i) * c(i) * c(i) / (den * den * den);
    }
    return s;
  };
  double lo = 0.0;
  double hi = std::sqrt((lam.array() * c.array().square()).sum());
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double f = phi(mu);
    if (f > 0.0) lo = mu; else hi = mu;
    if (std::abs(f) < 1e-16 || hi - lo <= 1e-17 * std::max(1.0, hi)) break;
    double next = mu - f / dphi(mu);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  Vec z(c.size());
  for (int i = 0; i < c.size(); ++i) z(i) = lam(i) * c(i) / (lam(i) + mu);
  return e.center() + pa.vectors * z;
}

PairDistance ellipsoid_pair_distance(const Ellipsoid& e1, const Ellipsoid& e2) {
  if (interiors_overlap(e1, e2)) throw std::domain_error("ellipsoid_pair_distance: interiors overlap");
  Vec p1 = e1.center();
  Vec p2 = project_onto_ellipsoid(e2, p1);
  p1 = project_onto_ellipsoid(e1, p2);
  int it = 0;
  for (; it < 10000; ++it) {
    const Vec q2 = project_onto_ellipsoid(e2, p1);
    const Vec q1 = project_onto_ellipsoid(e1, q2);
    const double step = std::max((q1 - p1).norm(), (q2 - p2).norm());
    p1 = q1;
    p2 = q2;
    if (step < 1e-10) break;
  }
  return {(p1 - p2).norm(), p1, p2, it};
}

double scaled_gap_value(const Ellipsoid& e1, const Ellipsoid& e2, int max_iter) {
  const Mat m1_inv = e1.shape().inverse();
  const Vec& t1 = e1.center();
  if (e2.contains(t1)) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m1_inv, Eigen::EigenvaluesOnly);
  const double lipschitz = 2.0 * es.eigenvalues().maxCoeff();
  Vec z = project_onto_ellipsoid(e2, t1);
  for (int it = 0; it < max_iter; ++it) {
    const Vec grad = 2.0 * m1_inv * (z - t1);
    const Vec next = project_onto_ellipsoid(e2, z - grad / lipschitz);
    const double step = (next - z).norm();
    z = next;
    if (step < 1e-15 * std::max(1.0, z.norm())) break;
  }
  return (z - t1).dot(m1_inv * (z - t1));
}

bool overlap_by_convex_program(const Ellipsoid& e1, const Ellipsoid& e2) {
  return scaled_gap_value(e1, e2) < 1.0 - 1e-9;
}

Mat finite_difference_jacobian(const VectorFunction& f, const Vec& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  const Vec f0 = f(x);
  Mat jac(f0.size(), x.size());
  Vec xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return jac;
}

double golden_section_argmin(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 > f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace ellmpc::oracles
