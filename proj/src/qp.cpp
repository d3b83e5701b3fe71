#include "ellmpc/qp.hpp"

#include "ellmpc/log.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ellmpc {

namespace {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

constexpr double kPrimalReg = 1e-11;
constexpr double kDualReg = 1e-10;
constexpr double kStepFraction = 0.995;
constexpr int kRefinementSteps = 3;

// One-sided row  sign * (row of C or unit vector) <= h.
struct OneSidedRow {
  std::vector<std::pair<int, double>> entries;
  double h;
  int source;    // row of C, or variable index for bounds
  bool bound;    // true: variable bound
  double sign;   // +1 upper, -1 lower
};

struct ExtraEquality {
  std::vector<std::pair<int, double>> entries;
  double rhs;
  int source;
  bool bound;
};

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

std::vector<std::vector<std::pair<int, double>>> row_entries(const SparseMat& m) {
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(m.rows()));
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it)
      rows[static_cast<std::size_t>(it.row())].emplace_back(static_cast<int>(it.col()), it.value());
  return rows;
}

class InteriorPoint {
 public:
  InteriorPoint(const QpProblem& qp, const QpSettings& settings) : qp_(qp), settings_(settings) {
    n_ = qp.num_vars();
    build_rows();
  }

  QpSolution run(const std::optional<VectorXd>& initial_z);

 private:
  void build_rows();
  void assemble_kkt(const VectorXd& w);
  bool factorize();
  VectorXd kkt_times(const VectorXd& x, const VectorXd& w) const;
  VectorXd solve_kkt(const VectorXd& rhs, const VectorXd& w);
  QpSolution finish(const VectorXd& z, const VectorXd& y, const VectorXd& lam, const VectorXd& s,
                    QpStatus status, int iters) const;

  const QpProblem& qp_;
  QpSettings settings_;
  int n_ = 0;
  int p_ = 0;  // equality rows (A plus fixed rows)
  int m_ = 0;  // one-sided inequality rows

  std::vector<OneSidedRow> rows_;
  std::vector<ExtraEquality> extra_eq_;
  SparseMat a_full_;
  VectorXd b_full_;
  SparseMat g_;
  VectorXd h_;

  std::vector<Triplet> base_triplets_;
  SparseMat kkt_;
  Eigen::SimplicialLDLT<SparseMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
};

void InteriorPoint::build_rows() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto c_rows = row_entries(qp_.ineq_matrix);
  for (int i = 0; i < static_cast<int>(c_rows.size()); ++i) {
    const double lo = qp_.ineq_lower(i), hi = qp_.ineq_upper(i);
    const auto& e = c_rows[static_cast<std::size_t>(i)];
    if (lo == hi) {
      extra_eq_.push_back({e, lo, i, false});
      continue;
    }
    if (hi < inf) rows_.push_back({e, hi, i, false, 1.0});
    if (lo > -inf) {
      auto neg = e;
      for (auto& [c, v] : neg) v = -v;
      rows_.push_back({neg, -lo, i, false, -1.0});
    }
  }
  for (int j = 0; j < n_; ++j) {
    const double lo = qp_.lower(j), hi = qp_.upper(j);
    if (lo == hi) {
      extra_eq_.push_back({{{j, 1.0}}, lo, j, true});
      continue;
    }
    if (hi < inf) rows_.push_back({{{j, 1.0}}, hi, j, true, 1.0});
    if (lo > -inf) rows_.push_back({{{j, -1.0}}, -lo, j, true, -1.0});
  }
  m_ = static_cast<int>(rows_.size());

  const int p0 = static_cast<int>(qp_.eq_matrix.rows());
  p_ = p0 + static_cast<int>(extra_eq_.size());
  std::vector<Triplet> at;
  for (int k = 0; k < qp_.eq_matrix.outerSize(); ++k)
    for (SparseMat::InnerIterator it(qp_.eq_matrix, k); it; ++it) at.emplace_back(it.row(), it.col(), it.value());
  b_full_.resize(p_);
  b_full_.head(p0) = qp_.eq_rhs;
  for (int i = 0; i < static_cast<int>(extra_eq_.size()); ++i) {
    for (const auto& [c, v] : extra_eq_[static_cast<std::size_t>(i)].entries) at.emplace_back(p0 + i, c, v);
    b_full_(p0 + i) = extra_eq_[static_cast<std::size_t>(i)].rhs;
  }
  a_full_.resize(p_, n_);
  a_full_.setFromTriplets(at.begin(), at.end());

  std::vector<Triplet> gt;
  h_.resize(m_);
  for (int r = 0; r < m_; ++r) {
    for (const auto& [c, v] : rows_[static_cast<std::size_t>(r)].entries) gt.emplace_back(r, c, v);
    h_(r) = rows_[static_cast<std::size_t>(r)].h;
  }
  g_.resize(m_, n_);
  g_.setFromTriplets(gt.begin(), gt.end());

  // Pattern shared by every KKT matrix: H, primal/dual regularization and A.
  for (int k = 0; k < qp_.hessian.outerSize(); ++k)
    for (SparseMat::InnerIterator it(qp_.hessian, k); it; ++it)
      if (it.row() >= it.col()) base_triplets_.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < n_; ++j) base_triplets_.emplace_back(j, j, kPrimalReg);
  for (int k = 0; k < a_full_.outerSize(); ++k)
    for (SparseMat::InnerIterator it(a_full_, k); it; ++it)
      base_triplets_.emplace_back(n_ + it.row(), it.col(), it.value());
  for (int i = 0; i < p_; ++i) base_triplets_.emplace_back(n_ + i, n_ + i, -kDualReg);
}

void InteriorPoint::assemble_kkt(const VectorXd& w) {
  std::vector<Triplet> trip = base_triplets_;
  for (int r = 0; r < m_; ++r) {
    const auto& e = rows_[static_cast<std::size_t>(r)].entries;
    for (const auto& [ci, vi] : e)
      for (const auto& [cj, vj] : e)
        if (ci >= cj) trip.emplace_back(ci, cj, w(r) * vi * vj);
  }
  kkt_.resize(n_ + p_, n_ + p_);
  kkt_.setFromTriplets(trip.begin(), trip.end());
}

bool InteriorPoint::factorize() {
  if (!analyzed_) {
    ldlt_.analyzePattern(kkt_);
    analyzed_ = true;
  }
  ldlt_.factorize(kkt_);
  return ldlt_.info() == Eigen::Success;
}

// Unregularized reduced KKT operator, used for iterative refinement.
VectorXd InteriorPoint::kkt_times(const VectorXd& x, const VectorXd& w) const {
  const VectorXd x1 = x.head(n_);
  VectorXd out(n_ + p_);
  VectorXd top = qp_.hessian * x1;
  if (m_ > 0) top += g_.transpose() * (w.asDiagonal() * (g_ * x1));
  if (p_ > 0) {
    top += a_full_.transpose() * x.tail(p_);
    out.tail(p_) = a_full_ * x1;
  }
  out.head(n_) = top;
  return out;
}

VectorXd InteriorPoint::solve_kkt(const VectorXd& rhs, const VectorXd& w) {
  VectorXd x = ldlt_.solve(rhs);
  for (int k = 0; k < kRefinementSteps; ++k) {
    const VectorXd r = rhs - kkt_times(x, w);
    if (inf_norm(r) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
    x += ldlt_.solve(r);
  }
  return x;
}

QpSolution InteriorPoint::finish(const VectorXd& z, const VectorXd& y, const VectorXd& lam, const VectorXd& s,
                                 QpStatus status, int iters) const {
  QpSolution sol;
  sol.z = z;
  sol.status = status;
  sol.iterations = iters;
  const int p0 = static_cast<int>(qp_.eq_matrix.rows());
  sol.y_eq = y.head(p0);
  sol.mult_ineq = VectorXd::Zero(qp_.ineq_matrix.rows());
  sol.mult_bounds = VectorXd::Zero(n_);
  for (int i = 0; i < static_cast<int>(extra_eq_.size()); ++i) {
    const auto& e = extra_eq_[static_cast<std::size_t>(i)];
    (e.bound ? sol.mult_bounds : sol.mult_ineq)(e.source) += y(p0 + i);
  }
  for (int r = 0; r < m_; ++r) {
    const auto& row = rows_[static_cast<std::size_t>(r)];
    (row.bound ? sol.mult_bounds : sol.mult_ineq)(row.source) += row.sign * lam(r);
  }
  double prim = p_ > 0 ? inf_norm(a_full_ * z - b_full_) : 0.0;
  if (m_ > 0) prim = std::max(prim, std::max(0.0, (g_ * z - h_).maxCoeff()));
  sol.primal_residual = prim;
  VectorXd rd = qp_.hessian * z + qp_.gradient;
  if (p_ > 0) rd += a_full_.transpose() * y;
  if (m_ > 0) rd += g_.transpose() * lam;
  sol.dual_residual = inf_norm(rd);
  sol.complementarity = m_ > 0 ? (s.cwiseProduct(lam)).cwiseAbs().maxCoeff() : 0.0;
  return sol;
}

QpSolution InteriorPoint::run(const std::optional<VectorXd>& initial_z) {
  VectorXd z = initial_z ? *initial_z : VectorXd::Zero(n_);
  if (z.size() != n_) throw std::invalid_argument("qp_solve: initial iterate has wrong size");
  VectorXd y = VectorXd::Zero(p_);
  VectorXd s(m_), lam(m_);
  if (m_ > 0 && !initial_z) {
    // Mehrotra-style start: least-squares point of the relaxed problem, then shift s and lambda positive.
    const VectorXd ones = VectorXd::Ones(m_);
    assemble_kkt(ones);
    if (!factorize()) return finish(z, y, VectorXd::Ones(m_), VectorXd::Ones(m_), QpStatus::NumericalFailure, 0);
    VectorXd rhs(n_ + p_);
    rhs.head(n_) = -qp_.gradient + g_.transpose() * h_;
    if (p_ > 0) rhs.tail(p_) = b_full_;
    const VectorXd sol = solve_kkt(rhs, ones);
    z = sol.head(n_);
    y = sol.tail(p_);
    s = h_ - g_ * z;
    lam = -s;
    s.array() += std::max(-1.5 * s.minCoeff(), 0.0);
    lam.array() += std::max(-1.5 * lam.minCoeff(), 0.0);
    const double prod = s.dot(lam);
    const double s_sum = s.sum(), l_sum = lam.sum();
    if (prod > 0.0 && s_sum > 0.0 && l_sum > 0.0) {
      s.array() += 0.5 * prod / l_sum;
      lam.array() += 0.5 * prod / s_sum;
    }
    s = s.cwiseMax(1e-8);
    lam = lam.cwiseMax(1e-8);
  } else if (m_ > 0) {
    s = (h_ - g_ * z).cwiseMax(1.0);
    lam.setOnes();
  }

  const double scale_q = 1.0 + inf_norm(qp_.gradient);
  const double scale_b = 1.0 + inf_norm(b_full_);
  const double scale_h = 1.0 + inf_norm(h_);
  const double tol = settings_.tol;

  for (int iter = 0; iter <= settings_.max_iters; ++iter) {
    VectorXd rd = qp_.hessian * z + qp_.gradient;
    if (p_ > 0) rd += a_full_.transpose() * y;
    if (m_ > 0) rd += g_.transpose() * lam;
    const VectorXd rp = p_ > 0 ? VectorXd(a_full_ * z - b_full_) : VectorXd();
    const VectorXd ri = m_ > 0 ? VectorXd(g_ * z + s - h_) : VectorXd();
    const double mu = m_ > 0 ? s.dot(lam) / m_ : 0.0;

    if (!rd.allFinite() || !z.allFinite()) return finish(z, y, lam, s, QpStatus::NumericalFailure, iter);
    const double comp = m_ > 0 ? s.cwiseProduct(lam).maxCoeff() : 0.0;
    if (log::level() <= log::Level::Debug) {
      std::ostringstream msg;
      msg << "ipm " << iter << ": rd " << inf_norm(rd) << " rp " << inf_norm(rp) << " ri " << inf_norm(ri) << " mu "
          << mu << " comp " << comp;
      log::write(log::Level::Debug, msg.str());
    }
    const bool converged = inf_norm(rd) <= tol * scale_q && inf_norm(rp) <= tol * scale_b &&
                           inf_norm(ri) <= tol * scale_h && comp <= tol;
    if (converged) return finish(z, y, lam, s, QpStatus::Solved, iter);
    if (iter == settings_.max_iters) break;

    const VectorXd w = m_ > 0 ? VectorXd(lam.cwiseQuotient(s)) : VectorXd();
    assemble_kkt(w);
    if (!factorize()) return finish(z, y, lam, s, QpStatus::NumericalFailure, iter);

    // Solves the Newton system for a given complementarity target rc.
    auto newton = [&](const VectorXd& rc, VectorXd& dz, VectorXd& dy, VectorXd& dlam, VectorXd& ds) {
      VectorXd rhs(n_ + p_);
      VectorXd top = -rd;
      if (m_ > 0) top -= g_.transpose() * (w.cwiseProduct(ri) - rc.cwiseQuotient(s));
      rhs.head(n_) = top;
      if (p_ > 0) rhs.tail(p_) = -rp;
      const VectorXd sol = solve_kkt(rhs, w);
      dz = sol.head(n_);
      dy = sol.tail(p_);
      if (m_ > 0) {
        ds = -ri - g_ * dz;
        dlam = w.cwiseProduct(g_ * dz + ri) - rc.cwiseQuotient(s);
      }
    };
    auto max_step = [&](const VectorXd& v, const VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    VectorXd dz, dy, dlam, ds;
    if (m_ == 0) {
      newton(VectorXd(), dz, dy, dlam, ds);
      z += dz;
      y += dy;
      continue;
    }

    // Predictor.
    const VectorXd rc_aff = s.cwiseProduct(lam);
    newton(rc_aff, dz, dy, dlam, ds);
    const double a_aff = std::min(max_step(s, ds), max_step(lam, dlam));
    const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dlam) / m_;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector, with a plain centered step as fallback when the second-order term stalls progress.
    const VectorXd rc = rc_aff + ds.cwiseProduct(dlam) - VectorXd::Constant(m_, sigma * mu);
    newton(rc, dz, dy, dlam, ds);
    double alpha = std::min(1.0, kStepFraction * std::min(max_step(s, ds), max_step(lam, dlam)));
    if (alpha < 0.5 * a_aff || alpha < 0.1) {
      VectorXd cz, cy, clam, cs;
      newton(rc_aff - VectorXd::Constant(m_, std::max(sigma, 0.1) * mu), cz, cy, clam, cs);
      const double alpha_c = std::min(1.0, kStepFraction * std::min(max_step(s, cs), max_step(lam, clam)));
      if (alpha_c > alpha) {
        alpha = alpha_c;
        dz = cz;
        dy = cy;
        dlam = clam;
        ds = cs;
      }
    }
    if (log::level() <= log::Level::Debug) {
      std::ostringstream msg;
      msg << "ipm   alpha " << alpha << " a_aff " << a_aff << " sigma " << sigma;
      log::write(log::Level::Debug, msg.str());
    }
    z += alpha * dz;
    y += alpha * dy;
    s += alpha * ds;
    lam += alpha * dlam;
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
  }
  return finish(z, y, lam, s, QpStatus::MaxIterations, settings_.max_iters);
}

}  // namespace

void QpProblem::validate() const {
  const auto n = gradient.size();
  if (hessian.rows() != n || hessian.cols() != n) throw std::invalid_argument("qp: hessian size mismatch");
  if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != n))
    throw std::invalid_argument("qp: equality size mismatch");
  if (ineq_matrix.rows() != ineq_lower.size() || ineq_matrix.rows() != ineq_upper.size() ||
      (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n))
    throw std::invalid_argument("qp: inequality size mismatch");
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("qp: bound size mismatch");
  for (Eigen::Index i = 0; i < ineq_lower.size(); ++i)
    if (ineq_lower(i) > ineq_upper(i)) throw std::invalid_argument("qp: inequality lower > upper");
  for (Eigen::Index i = 0; i < n; ++i)
    if (lower(i) > upper(i)) throw std::invalid_argument("qp: bound lower > upper");
}

QpSolution qp_solve(const QpProblem& qp, const QpSettings& settings, const std::optional<Eigen::VectorXd>& initial_z) {
  qp.validate();
  InteriorPoint ip(qp, settings);
  QpSolution sol = ip.run(initial_z);
  if (sol.status != QpStatus::Solved && !initial_z) {
    QpSolution retry = ip.run(Eigen::VectorXd::Zero(qp.num_vars()));
    retry.iterations += sol.iterations;
    if (retry.status == QpStatus::Solved) return retry;
  }
  return sol;
}

}  // namespace ellmpc
