#pragma once

// Brute-force and convex-programming references. These are slow on purpose
// and share no code path with the closed-form routines they are used to check.

#include "ellmpc/geometry.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace ellmpc::oracles {

struct OracleConfig {
  int sample_count = 10000;
  double tolerance = 1e-9;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Points b + d with b on the boundary of E(0,M1) and d on the boundary of E(0,M2).
///
/// For 2-D shapes the boundaries are sampled at uniform angles in the
/// principal-axis parameterization; `count` is rounded to the nearest square
/// grid of angle pairs, with a random phase drawn from `seed`. For higher
/// dimensions directions are drawn uniformly on the sphere.
std::vector<Vec> sampled_minkowski_points(const Mat& m1, const Mat& m2, int count, std::uint64_t seed);

/// Same, but with axis-aligned angle phase (no randomization) for 2-D inputs.
std::vector<Vec> sampled_minkowski_points_aligned(const Mat& m1, const Mat& m2, int count);

/// Boundary point of E(0, M) reached by the principal-axis parameterization u -> L u.
Vec boundary_point(const Mat& m, const Vec& unit_dir);

/// Euclidean projection of y onto E(t, M).
Vec project_onto_ellipsoid(const Ellipsoid& e, const Vec& y);

struct PairDistance {
  double distance;
  Vec p1;  ///< closest point in e1
  Vec p2;  ///< closest point in e2
  int iterations;
};

/// Shortest vector between two ellipsoids with disjoint interiors, found by
/// alternating projections. Throws std::domain_error when the interiors overlap.
PairDistance ellipsoid_pair_distance(const Ellipsoid& e1, const Ellipsoid& e2);

/// min over z in E(t2,M2) of (z - t1)^T M1^{-1} (z - t1), by projected gradient.
/// The interiors overlap iff the optimum is < 1.
double scaled_gap_value(const Ellipsoid& e1, const Ellipsoid& e2, int max_iter = 200000);

/// Overlap classification from scaled_gap_value with threshold 1 - 1e-9.
bool overlap_by_convex_program(const Ellipsoid& e1, const Ellipsoid& e2);

using VectorFunction = std::function<Vec(const Vec&)>;

/// Central differences: J(i,j) = (f_i(x + h e_j) - f_i(x - h e_j)) / (2h).
Mat finite_difference_jacobian(const VectorFunction& f, const Vec& x, double h = 1e-6);

/// Golden-section minimizer on [lo, hi].
double golden_section_argmin(const std::function<double(double)>& f, double lo, double hi, double tol);

}  // namespace ellmpc::oracles
