#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>

namespace ellmpc {

using SparseMat = Eigen::SparseMatrix<double>;

/**
 * Convex QP
 *
 *   min  1/2 z^T H z + q^T z
 *   s.t. A z = b
 *        l <= C z <= u
 *        lb <= z <= ub
 *
 * Infinite entries in l, u, lb, ub mean "no bound". H must be symmetric
 * positive semidefinite and positive definite on the null space of the
 * active constraints.
 */
struct QpProblem {
  SparseMat hessian;
  Eigen::VectorXd gradient;
  SparseMat eq_matrix;
  Eigen::VectorXd eq_rhs;
  SparseMat ineq_matrix;
  Eigen::VectorXd ineq_lower;
  Eigen::VectorXd ineq_upper;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(gradient.size()); }
  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

struct QpSettings {
  int max_iters = 100;
  double tol = 1e-9;
};

enum class QpStatus { Solved, MaxIterations, NumericalFailure };

/// Multipliers follow H z + q + A^T y + C^T mult_ineq + mult_bounds = 0, so a
/// positive entry marks an active upper bound and a negative one an active lower bound.
struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd y_eq;
  Eigen::VectorXd mult_ineq;
  Eigen::VectorXd mult_bounds;
  QpStatus status = QpStatus::NumericalFailure;
  int iterations = 0;
  double primal_residual = 0.0;  ///< max violation of equalities and bounds
  double dual_residual = 0.0;
  double complementarity = 0.0;
};

/// Primal-dual interior point with Mehrotra predictor-corrector; the reduced
/// KKT system is factorized with a sparse LDL^T. `initial_z` seeds the primal iterate.
QpSolution qp_solve(const QpProblem& qp, const QpSettings& settings = {},
                    const std::optional<Eigen::VectorXd>& initial_z = std::nullopt);

}  // namespace ellmpc
