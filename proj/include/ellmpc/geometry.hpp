#pragma once

#include <Eigen/Dense>

#include <utility>

namespace ellmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Checks symmetry (1e-12 relative) and positive definiteness.
bool is_symmetric_pd(const Mat& m);

/// Throws std::invalid_argument unless `m` is square, symmetric and positive definite.
void require_pd(const Mat& m, const char* what);

/**
 * Ellipsoid E(t, M) = { tau : (tau - t)^T M^{-1} (tau - t) <= 1 }.
 *
 * The shape matrix is validated on construction; an Ellipsoid value is
 * therefore always non-degenerate.
 */
class Ellipsoid {
 public:
  Ellipsoid(Vec center, Mat shape);

  /// Builds a 2-D ellipsoid from semi-axes and a rotation angle (radians).
  static Ellipsoid from_axes_2d(const Eigen::Vector2d& center, double semi_a, double semi_b,
                                double angle);

  const Vec& center() const { return center_; }
  const Mat& shape() const { return shape_; }
  int dim() const { return static_cast<int>(center_.size()); }

  /// (tau - t)^T M^{-1} (tau - t); a point is a member iff this is <= 1.
  double quadratic_form(const Vec& point) const;
  bool contains(const Vec& point, double tol = 0.0) const {
    return quadratic_form(point) <= 1.0 + tol;
  }

 private:
  Vec center_;
  Mat shape_;
  Eigen::LLT<Mat> chol_;
};

struct GammaInterval {
  double lower;
  double upper;

  bool contains(double g, double slack = 0.0) const {
    return g >= lower - slack && g <= upper + slack;
  }
  double clamp(double g) const { return g < lower ? lower : (g > upper ? upper : g); }
};

/// Smallest and largest eigenvalue of a symmetric matrix (closed form for 2x2).
std::pair<double, double> eigen_range(const Mat& m);

/// Supporting function of E(0, M) in direction eta: sqrt(eta^T M eta).
double support_value(const Vec& eta, const Mat& m);

/// Convex weights (beta1, beta2) with beta1 = 1/(1+e^gamma), beta2 = 1/(1+e^-gamma).
std::pair<double, double> beta_from_gamma(double gamma);

/// Shape of the ellipsoid bounding E(0,M1) (+) E(0,M2): (1+e^g) M1 + (1+e^-g) M2.
Mat overapprox_shape(const Mat& m1, const Mat& m2, double gamma);

/// Parameter at which the over-approximation is tight in direction eta.
double gamma_star(const Vec& eta, const Mat& m1, const Mat& m2);

/// Interval containing gamma_star(eta, M1, M2) for every nonzero eta.
GammaInterval gamma_bounds(const Mat& m1, const Mat& m2);

/// Value max_gamma d^T B(gamma)^{-1} d over gamma_bounds, with d = t1 - t2.
/// The interiors of the two ellipsoids are disjoint iff this is >= 1.
double max_overapprox_ratio(const Ellipsoid& e1, const Ellipsoid& e2);

/// True iff the interiors of the two ellipsoids intersect. Touching is not overlap.
bool interiors_overlap(const Ellipsoid& e1, const Ellipsoid& e2);

}  // namespace ellmpc
