#include "ellmpc/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ellmpc {

namespace {

constexpr int kOverlapGridPoints = 64;
constexpr double kGoldenTol = 1e-10;

double direction_norm_sq(const Vec& eta) { return eta.squaredNorm(); }

void require_direction(const Vec& eta, const Mat& m) {
  if (eta.size() != m.rows()) throw std::invalid_argument("direction/matrix dimension mismatch");
  if (!(direction_norm_sq(eta) > 0.0)) throw std::invalid_argument("zero direction");
}

}  // namespace

bool is_symmetric_pd(const Mat& m) {
  if (m.rows() == 0 || m.rows() != m.cols() || !m.allFinite()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  return eigen_range(m).first > 0.0;
}

void require_pd(const Mat& m, const char* what) {
  if (!is_symmetric_pd(m)) throw std::invalid_argument(std::string(what) + " is not symmetric positive definite");
}

Ellipsoid::Ellipsoid(Vec center, Mat shape) : center_(std::move(center)), shape_(std::move(shape)) {
  if (center_.size() != shape_.rows()) throw std::invalid_argument("ellipsoid center/shape dimension mismatch");
  if (!center_.allFinite()) throw std::invalid_argument("ellipsoid center is not finite");
  require_pd(shape_, "ellipsoid shape");
  chol_.compute(shape_);
}

Ellipsoid Ellipsoid::from_axes_2d(const Eigen::Vector2d& center, double semi_a, double semi_b,
                                  double angle) {
  if (!(semi_a > 0.0) || !(semi_b > 0.0)) throw std::invalid_argument("semi-axes must be positive");
  const Eigen::Matrix2d rot = Eigen::Rotation2Dd(angle).toRotationMatrix();
  Eigen::Matrix2d shape = rot * Eigen::Vector2d(semi_a * semi_a, semi_b * semi_b).asDiagonal() * rot.transpose();
  shape = 0.5 * (shape + shape.transpose());
  return Ellipsoid(center, shape);
}

double Ellipsoid::quadratic_form(const Vec& point) const {
  const Vec d = point - center_;
  return d.dot(chol_.solve(d));
}

std::pair<double, double> eigen_range(const Mat& m) {
  if (m.rows() == 2) {
    const double a = m(0, 0), b = 0.5 * (m(0, 1) + m(1, 0)), c = m(1, 1);
    const double mean = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), b);
    // lambda_min via the determinant avoids cancellation for thin ellipses.
    const double lmax = mean + rad;
    const double lmin = lmax > 0.0 ? (a * c - b * b) / lmax : mean - rad;
    return {lmin, lmax};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

double support_value(const Vec& eta, const Mat& m) {
  require_direction(eta, m);
  require_pd(m, "shape");
  return std::sqrt(eta.dot(m * eta));
}

std::pair<double, double> beta_from_gamma(double gamma) {
  // Evaluate the smaller weight directly and take the complement for the other,
  // so beta1 + beta2 == 1 up to rounding of one subtraction.
  if (gamma >= 0.0) {
    const double b1 = 1.0 / (1.0 + std::exp(gamma));
    return {b1, 1.0 - b1};
  }
  const double b2 = 1.0 / (1.0 + std::exp(-gamma));
  return {1.0 - b2, b2};
}

Mat overapprox_shape(const Mat& m1, const Mat& m2, double gamma) {
  require_pd(m1, "M1");
  require_pd(m2, "M2");
  if (m1.rows() != m2.rows()) throw std::invalid_argument("shape dimension mismatch");
  if (!std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite");
  return (1.0 + std::exp(gamma)) * m1 + (1.0 + std::exp(-gamma)) * m2;
}

double gamma_star(const Vec& eta, const Mat& m1, const Mat& m2) {
  require_direction(eta, m1);
  if (m1.rows() != m2.rows()) throw std::invalid_argument("shape dimension mismatch");
  return 0.5 * std::log(eta.dot(m2 * eta) / eta.dot(m1 * eta));
}

GammaInterval gamma_bounds(const Mat& m1, const Mat& m2) {
  require_pd(m1, "M1");
  require_pd(m2, "M2");
  const auto [min1, max1] = eigen_range(m1);
  const auto [min2, max2] = eigen_range(m2);
  GammaInterval out{0.5 * std::log(min2 / max1), 0.5 * std::log(max2 / min1)};
  if (out.lower > out.upper) out.lower = out.upper;  // only possible through rounding
  return out;
}

double max_overapprox_ratio(const Ellipsoid& e1, const Ellipsoid& e2) {
  if (e1.dim() != e2.dim()) throw std::invalid_argument("ellipsoid dimension mismatch");
  const Vec d = e1.center() - e2.center();
  if (d.squaredNorm() == 0.0) return 0.0;
  const Mat& m1 = e1.shape();
  const Mat& m2 = e2.shape();
  const GammaInterval bounds = gamma_bounds(m1, m2);

  auto ratio = [&](double g) {
    const Mat b = (1.0 + std::exp(g)) * m1 + (1.0 + std::exp(-g)) * m2;
    return d.dot(b.llt().solve(d));
  };

  if (bounds.upper - bounds.lower <= kGoldenTol) return ratio(0.5 * (bounds.lower + bounds.upper));

  const double step = (bounds.upper - bounds.lower) / (kOverlapGridPoints - 1);
  int best = 0;
  double best_val = -1.0;
  for (int i = 0; i < kOverlapGridPoints; ++i) {
    const double v = ratio(bounds.lower + i * step);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = bounds.lower + std::max(best - 1, 0) * step;
  double hi = bounds.lower + std::min(best + 1, kOverlapGridPoints - 1) * step;

  // Golden-section search for the maximum on the bracketing cell pair.
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = ratio(x1), f2 = ratio(x2);
  while (hi - lo > kGoldenTol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = ratio(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = ratio(x1);
    }
  }
  return std::max({best_val, f1, f2});
}

bool interiors_overlap(const Ellipsoid& e1, const Ellipsoid& e2) {
  return max_overapprox_ratio(e1, e2) < 1.0;
}

}  // namespace ellmpc
