#pragma once

#include "ellmpc/ocp.hpp"
#include "ellmpc/qp.hpp"

#include <string>
#include <vector>

namespace ellmpc {

struct SqpSettings {
  int max_sqp_iters = 50;
  double kkt_tol = 1e-7;
  double gamma_block_reg = 1e-4;
  int qp_max_iters = 100;
  double qp_tol = 1e-9;
  /// Adds the PSD part of the constraint curvature in the gamma/eta blocks to the Hessian.
  bool parameter_curvature = true;

  void validate() const;
};

enum class SqpStatus { Converged, IterLimit, QpFailure };
std::string to_string(SqpStatus status);

struct SqpResult {
  Eigen::VectorXd z;
  TrajectoryGuess trajectory;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  int qp_iterations = 0;
  SqpStatus status = SqpStatus::QpFailure;
  double max_slack = 0.0;
  double max_defect = 0.0;
  std::string diagnostics;
};

/// Adds `reg` to the diagonal entries listed in `indices` (the gamma/eta and slack blocks).
SparseMat regularize_hessian(const SparseMat& hessian, const std::vector<int>& indices, double reg);

struct KktMeasures {
  double stationarity = 0.0;
  double equality = 0.0;
  double inequality = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/// KKT measures of the NLP at `z` with multipliers in the QP sign convention.
KktMeasures kkt_measures(const StagewiseNLP& nlp, const Eigen::VectorXd& z, const NlpEvaluation& ev,
                         const Eigen::VectorXd& y_eq, const Eigen::VectorXd& mult_ineq,
                         const Eigen::VectorXd& mult_bounds);

/// Full-step SQP with the Gauss-Newton Hessian, starting at nlp.initial_guess().
SqpResult solve(const StagewiseNLP& nlp, const SqpSettings& settings = {});

}  // namespace ellmpc
