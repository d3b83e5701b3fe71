#include "ellmpc/sqp.hpp"

#include "ellmpc/log.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ellmpc {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Violation and complementarity of lo <= c <= hi with multiplier lambda
// (positive: upper side active, negative: lower side active).
void side_measures(const Eigen::VectorXd& c, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   const Eigen::VectorXd& lambda, double* violation, double* comp) {
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    *violation = std::max({*violation, lo(i) - c(i), c(i) - hi(i)});
    const double l = lambda(i);
    if (l > 0.0) *comp = std::max(*comp, std::isfinite(hi(i)) ? l * std::abs(hi(i) - c(i)) : l);
    if (l < 0.0) *comp = std::max(*comp, std::isfinite(lo(i)) ? -l * std::abs(c(i) - lo(i)) : -l);
  }
}

}  // namespace

void SqpSettings::validate() const {
  if (max_sqp_iters < 1 || qp_max_iters < 1) throw std::invalid_argument("iteration limits must be >= 1");
  if (!(kkt_tol >= 1e-12)) throw std::invalid_argument("kkt_tol must be >= 1e-12");
  if (!(gamma_block_reg > 0.0)) throw std::invalid_argument("gamma_block_reg must be > 0");
  if (!(qp_tol > 0.0)) throw std::invalid_argument("qp_tol must be > 0");
}

std::string to_string(SqpStatus status) {
  switch (status) {
    case SqpStatus::Converged: return "converged";
    case SqpStatus::IterLimit: return "iteration-limit";
    case SqpStatus::QpFailure: return "qp-failure";
  }
  return "unknown";
}

double KktMeasures::max() const { return std::max({stationarity, equality, inequality, complementarity}); }

SparseMat regularize_hessian(const SparseMat& hessian, const std::vector<int>& indices, double reg) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(indices.size());
  for (int i : indices) trip.emplace_back(i, i, reg);
  SparseMat d(hessian.rows(), hessian.cols());
  d.setFromTriplets(trip.begin(), trip.end());
  return hessian + d;
}

KktMeasures kkt_measures(const StagewiseNLP& nlp, const Eigen::VectorXd& z, const NlpEvaluation& ev,
                         const Eigen::VectorXd& y_eq, const Eigen::VectorXd& mult_ineq,
                         const Eigen::VectorXd& mult_bounds) {
  KktMeasures k;
  Eigen::VectorXd stat = ev.gradient + mult_bounds;
  if (y_eq.size()) stat += ev.eq_jacobian.transpose() * y_eq;
  if (mult_ineq.size()) stat += ev.ineq_jacobian.transpose() * mult_ineq;
  k.stationarity = inf_norm(stat);
  k.equality = inf_norm(ev.eq);
  side_measures(ev.ineq, nlp.ineq_lower(), nlp.ineq_upper(), mult_ineq, &k.inequality, &k.complementarity);
  side_measures(z, nlp.lower(), nlp.upper(), mult_bounds, &k.inequality, &k.complementarity);
  return k;
}

SqpResult solve(const StagewiseNLP& nlp, const SqpSettings& settings) {
  settings.validate();
  if (!nlp.ready()) throw std::invalid_argument("fixed-mode NLP must be frozen before solving");

  const SparseMat hessian = regularize_hessian(nlp.hessian(), nlp.parameter_indices(), settings.gamma_block_reg);
  const QpSettings qp_settings{settings.qp_max_iters, settings.qp_tol};

  SqpResult res;
  res.z = nlp.initial_guess();
  NlpEvaluation ev = nlp.evaluate(res.z);
  res.status = SqpStatus::IterLimit;
  res.kkt_residual = std::numeric_limits<double>::infinity();

  QpProblem qp;
  Eigen::VectorXd mult_ineq;
  for (int it = 0; it < settings.max_sqp_iters; ++it) {
    qp.hessian = hessian;
    if (settings.parameter_curvature && mult_ineq.size()) {
      const auto trip = nlp.parameter_curvature(res.z, mult_ineq);
      SparseMat c(hessian.rows(), hessian.cols());
      c.setFromTriplets(trip.begin(), trip.end());
      qp.hessian += c;
    }
    qp.gradient = ev.gradient;
    qp.eq_matrix = ev.eq_jacobian;
    qp.eq_rhs = -ev.eq;
    qp.ineq_matrix = ev.ineq_jacobian;
    qp.ineq_lower = nlp.ineq_lower() - ev.ineq;
    qp.ineq_upper = nlp.ineq_upper() - ev.ineq;
    qp.lower = nlp.lower() - res.z;
    qp.upper = nlp.upper() - res.z;

    const QpSolution sol = qp_solve(qp, qp_settings);
    res.qp_iterations += sol.iterations;
    if (sol.status != QpStatus::Solved || !sol.z.allFinite()) {
      std::ostringstream msg;
      msg << "QP " << (sol.status == QpStatus::MaxIterations ? "hit its iteration limit" : "failed")
          << " at SQP iteration " << it + 1 << " (primal " << sol.primal_residual << ", dual "
          << sol.dual_residual << ", complementarity " << sol.complementarity << ")";
      res.diagnostics = msg.str();
      res.status = SqpStatus::QpFailure;
      log::warn(res.diagnostics);
      break;
    }

    res.z += sol.z;
    mult_ineq = sol.mult_ineq;
    ev = nlp.evaluate(res.z);
    ++res.iterations;
    const KktMeasures km = kkt_measures(nlp, res.z, ev, sol.y_eq, sol.mult_ineq, sol.mult_bounds);
    res.kkt_residual = km.max();
    if (log::level() <= log::Level::Debug) {
      std::ostringstream msg;
      msg << "sqp " << it + 1 << ": f " << ev.objective << " stat " << km.stationarity << " eq " << km.equality
          << " ineq " << km.inequality << " comp " << km.complementarity << " step " << inf_norm(sol.z) << " qp "
          << sol.iterations;
      log::write(log::Level::Debug, msg.str());
    }
    if (res.kkt_residual <= settings.kkt_tol) {
      res.status = SqpStatus::Converged;
      break;
    }
  }

  res.objective = ev.objective;
  res.max_defect = inf_norm(ev.eq);
  const NlpLayout& lay = nlp.layout();
  for (int k = 0; k <= lay.horizon(); ++k)
    for (int m = 0; m < lay.obstacles(); ++m) res.max_slack = std::max(res.max_slack, res.z(lay.slack(m, k)));
  res.trajectory = nlp.unpack(res.z);
  return res;
}

}  // namespace ellmpc
