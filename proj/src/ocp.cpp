#include "ellmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ellmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_interval(double lo, double hi, const char* name) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw std::invalid_argument(std::string(name) + ": lower limit must be below the upper limit");
}

Eigen::Vector2d normalize_eta(const Eigen::Vector2d& eta) {
  const double n = eta.norm();
  return n > 0.0 && std::isfinite(n) ? Eigen::Vector2d(eta / n) : Eigen::Vector2d(1.0, 0.0);
}

Eigen::Vector2d eta_hat_at(const Scenario& sc, const RobotState& x, int m) {
  const Ellipsoid robot(x.position(), rotate_shape(sc.robot, x.theta));
  const Vec eta = fixed_eta_hat(robot, sc.obstacles[m]);
  return {eta(0), eta(1)};
}

}  // namespace

void Limits::validate() const {
  require_interval(v_min, v_max, "limits.v");
  require_interval(omega_min, omega_max, "limits.omega");
  require_interval(a_min, a_max, "limits.a");
  require_interval(alpha_min, alpha_max, "limits.alpha");
}

void Weights::validate() const {
  auto ok = [](const auto& w) { return w.allFinite() && (w.array() >= 0.0).all(); };
  if (!ok(state) || !ok(input) || !ok(terminal)) throw std::invalid_argument("weights must be finite and >= 0");
}

void Scenario::validate() const {
  if (!(horizon_time > 0.0) || !std::isfinite(horizon_time)) throw std::invalid_argument("horizon T must be > 0");
  if (horizon_steps < 1) throw std::invalid_argument("horizon N must be >= 1");
  limits.validate();
  weights.validate();
  if (!(eps_v > 0.0) || !(eps_omega > 0.0)) throw std::invalid_argument("terminal_eps must be > 0");
  mode.validate();
}

GammaInterval stage_gamma_bounds(const Eigen::Matrix2d& robot_shape, const Eigen::Matrix2d& obstacle_shape) {
  const GammaInterval g = gamma_bounds(robot_shape, obstacle_shape);
  return {std::max(g.lower, -kGammaBox), std::min(g.upper, kGammaBox)};
}

NlpLayout::NlpLayout(int n, int obstacles, ConstraintKind kind) : n_(n), obstacles_(obstacles), kind_(kind) {
  if (n < 1) throw std::invalid_argument("horizon N must be >= 1");
  if (obstacles < 0) throw std::invalid_argument("obstacle count must be >= 0");
  param_dim_ = kind == ConstraintKind::MinkowskiFreeGamma ? 1 : (kind == ConstraintKind::HyperplaneFreeEta ? 2 : 0);
  stage_ = 7 + obstacles * (param_dim_ + 1);
  num_vars_ = n * stage_ + 5 + obstacles * (param_dim_ + 1);
}

void StagewiseNLP::set_initial_guess(const Eigen::VectorXd& z) {
  if (z.size() != layout_.num_vars()) throw std::invalid_argument("initial guess has the wrong dimension");
  z0_ = z;
}

StagewiseNLP::CollisionTerm StagewiseNLP::collision_term(const Eigen::VectorXd& z, int m, int k) const {
  const RobotState x = RobotState::from_vec(z.segment<5>(layout_.x(k)));
  const Eigen::Matrix2d& g = scenario_.robot.base_shape();
  const Eigen::Vector2d& t = scenario_.obstacles.center(m);
  const Eigen::Matrix2d& mm = scenario_.obstacles.shape(m);
  const auto km = static_cast<std::size_t>(k);
  const auto mi = static_cast<std::size_t>(m);

  CollisionTerm out{0.0, Eigen::Matrix<double, 5, 1>::Zero()};
  switch (layout_.kind()) {
    case ConstraintKind::MinkowskiFreeGamma:
    case ConstraintKind::MinkowskiFixedGamma: {
      const double gamma = layout_.kind() == ConstraintKind::MinkowskiFreeGamma ? z(layout_.param(m, k))
                                                                               : fixed_gamma_[km][mi];
      const MinkowskiEval ev = minkowski_jacobian(x, g, t, mm, gamma);
      out.value = ev.value;
      out.grad.head<4>() = ev.grad;
      break;
    }
    case ConstraintKind::HyperplaneFreeEta:
    case ConstraintKind::HyperplaneFixedEta: {
      const Eigen::Vector2d eta = layout_.kind() == ConstraintKind::HyperplaneFreeEta
                                      ? Eigen::Vector2d(z.segment<2>(layout_.param(m, k)))
                                      : fixed_eta_[km][mi];
      const HyperplaneEval ev = hyperplane_jacobian(x, g, t, mm, eta);
      out.value = ev.value.separation;
      out.grad = ev.separation_grad;
      break;
    }
  }
  return out;
}

void StagewiseNLP::fill_slacks(Eigen::VectorXd& z) const {
  for (int k = 0; k <= layout_.horizon(); ++k)
    for (int m = 0; m < layout_.obstacles(); ++m) {
      const double need = ineq_lower_(layout_.collision_row(m, k));
      z(layout_.slack(m, k)) = std::max(0.0, need - collision_term(z, m, k).value);
    }
}

double StagewiseNLP::objective(const Eigen::VectorXd& z) const {
  const int n = layout_.horizon();
  const Weights& w = scenario_.weights;
  double f = 0.0;
  for (int k = 0; k <= n; ++k) {
    const Vector5d e = z.segment<5>(layout_.x(k)) - reference_.states[static_cast<std::size_t>(k)].vec();
    f += e.dot((k < n ? w.state : w.terminal).cwiseProduct(e));
    if (k < n) {
      const Eigen::Vector2d eu = z.segment<2>(layout_.u(k)) - reference_.inputs[static_cast<std::size_t>(k)].vec();
      f += eu.dot(w.input.cwiseProduct(eu));
    }
    for (int m = 0; m < layout_.obstacles(); ++m) f += kSlackPenalty * z(layout_.slack(m, k));
  }
  return f;
}

NlpEvaluation StagewiseNLP::evaluate(const Eigen::VectorXd& z) const {
  if (!ready()) throw std::logic_error("fixed-mode NLP evaluated before freeze_parameters");
  if (z.size() != layout_.num_vars()) throw std::invalid_argument("iterate has the wrong dimension");
  const int n = layout_.horizon();
  const double dt = scenario_.dt();
  const Weights& w = scenario_.weights;

  NlpEvaluation ev;
  ev.objective = objective(z);
  ev.gradient = Eigen::VectorXd::Zero(layout_.num_vars());
  for (int k = 0; k <= n; ++k) {
    const Vector5d e = z.segment<5>(layout_.x(k)) - reference_.states[static_cast<std::size_t>(k)].vec();
    ev.gradient.segment<5>(layout_.x(k)) = 2.0 * (k < n ? w.state : w.terminal).cwiseProduct(e);
    if (k < n) {
      const Eigen::Vector2d eu = z.segment<2>(layout_.u(k)) - reference_.inputs[static_cast<std::size_t>(k)].vec();
      ev.gradient.segment<2>(layout_.u(k)) = 2.0 * w.input.cwiseProduct(eu);
    }
    for (int m = 0; m < layout_.obstacles(); ++m) ev.gradient(layout_.slack(m, k)) = kSlackPenalty;
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 + n * 40));
  ev.eq.resize(layout_.num_eq());
  ev.eq.head<5>() = z.segment<5>(layout_.x(0)) - x0_.vec();
  for (int i = 0; i < 5; ++i) trip.emplace_back(i, layout_.x(0) + i, 1.0);
  for (int k = 0; k < n; ++k) {
    const RobotState xk = RobotState::from_vec(z.segment<5>(layout_.x(k)));
    const ControlInput uk = ControlInput::from_vec(z.segment<2>(layout_.u(k)));
    const Rk4Result step = rk4_step(xk, uk, dt);
    const int row = 5 * (k + 1);
    ev.eq.segment<5>(row) = z.segment<5>(layout_.x(k + 1)) - step.next.vec();
    for (int i = 0; i < 5; ++i) {
      trip.emplace_back(row + i, layout_.x(k + 1) + i, 1.0);
      for (int j = 0; j < 5; ++j)
        if (step.dx(i, j) != 0.0) trip.emplace_back(row + i, layout_.x(k) + j, -step.dx(i, j));
      for (int j = 0; j < 2; ++j)
        if (step.du(i, j) != 0.0) trip.emplace_back(row + i, layout_.u(k) + j, -step.du(i, j));
    }
  }
  ev.eq_jacobian.resize(layout_.num_eq(), layout_.num_vars());
  ev.eq_jacobian.setFromTriplets(trip.begin(), trip.end());

  trip.clear();
  ev.ineq.resize(layout_.num_ineq());
  const int pd = layout_.param_dim();
  for (int k = 0; k <= n; ++k)
    for (int m = 0; m < layout_.obstacles(); ++m) {
      const int row = layout_.collision_row(m, k);
      const CollisionTerm term = collision_term(z, m, k);
      const int s = layout_.slack(m, k);
      ev.ineq(row) = term.value + z(s);
      for (int j = 0; j < 3; ++j) trip.emplace_back(row, layout_.x(k) + j, term.grad(j));
      for (int j = 0; j < pd; ++j) trip.emplace_back(row, layout_.param(m, k) + j, term.grad(3 + j));
      trip.emplace_back(row, s, 1.0);
      if (layout_.kind() == ConstraintKind::HyperplaneFreeEta) {
        const Eigen::Vector2d eta = z.segment<2>(layout_.param(m, k));
        ev.ineq(row + 1) = eta.squaredNorm();
        trip.emplace_back(row + 1, layout_.param(m, k), 2.0 * eta(0));
        trip.emplace_back(row + 1, layout_.param(m, k) + 1, 2.0 * eta(1));
      }
    }
  ev.ineq_jacobian.resize(layout_.num_ineq(), layout_.num_vars());
  ev.ineq_jacobian.setFromTriplets(trip.begin(), trip.end());
  return ev;
}

std::vector<Eigen::Triplet<double>> StagewiseNLP::parameter_curvature(const Eigen::VectorXd& z,
                                                                      const Eigen::VectorXd& mult_ineq) const {
  std::vector<Eigen::Triplet<double>> trip;
  if (is_fixed(layout_.kind()) || mult_ineq.size() != layout_.num_ineq()) return trip;
  const Eigen::Matrix2d& g_body = scenario_.robot.base_shape();
  for (int k = 0; k <= layout_.horizon(); ++k) {
    const RobotState x = RobotState::from_vec(z.segment<5>(layout_.x(k)));
    const Eigen::Matrix2d g = rotate_shape(g_body, x.theta);
    for (int m = 0; m < layout_.obstacles(); ++m) {
      const int row = layout_.collision_row(m, k);
      const int col = layout_.param(m, k);
      const Eigen::Vector2d d = x.position() - scenario_.obstacles.center(m);
      const Eigen::Matrix2d& mm = scenario_.obstacles.shape(m);
      if (layout_.kind() == ConstraintKind::MinkowskiFreeGamma) {
        const double ep = std::exp(z(col)), em = std::exp(-z(col));
        const Eigen::Matrix2d b = (1.0 + ep) * g + (1.0 + em) * mm;
        const Eigen::Matrix2d b1 = ep * g - em * mm, b2 = ep * g + em * mm;
        const Eigen::LLT<Eigen::Matrix2d> llt(b);
        const Eigen::Vector2d w = llt.solve(d);
        const Eigen::Vector2d bw = b1 * w;
        const double r_gg = 2.0 * bw.dot(llt.solve(bw)) - w.dot(b2 * w);
        const double h = mult_ineq(row) * r_gg;
        if (h > 0.0) trip.emplace_back(col, col, h);
      } else {
        const Eigen::Vector2d eta = z.segment<2>(col);
        auto sqrt_form_hessian = [&](const Eigen::Matrix2d& a) -> Eigen::Matrix2d {
          const double q = std::max(eta.dot(a * eta), 1e-16);
          const Eigen::Vector2d ae = a * eta;
          return a / std::sqrt(q) - ae * ae.transpose() / (q * std::sqrt(q));
        };
        Eigen::Matrix2d h = -mult_ineq(row) * (sqrt_form_hessian(mm) + sqrt_form_hessian(g));
        h += 2.0 * mult_ineq(row + 1) * Eigen::Matrix2d::Identity();
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
        const Eigen::Matrix2d psd =
            es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            if (psd(i, j) != 0.0) trip.emplace_back(col + i, col + j, psd(i, j));
      }
    }
  }
  return trip;
}

TrajectoryGuess StagewiseNLP::unpack(const Eigen::VectorXd& z) const {
  const int n = layout_.horizon(), no = layout_.obstacles();
  TrajectoryGuess g;
  for (int k = 0; k <= n; ++k) {
    g.states.push_back(RobotState::from_vec(z.segment<5>(layout_.x(k))));
    if (k < n) g.inputs.push_back(ControlInput::from_vec(z.segment<2>(layout_.u(k))));
  }
  switch (layout_.kind()) {
    case ConstraintKind::MinkowskiFreeGamma:
      g.gamma.assign(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(no)));
      for (int k = 0; k <= n; ++k)
        for (int m = 0; m < no; ++m)
          g.gamma[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)] = z(layout_.param(m, k));
      break;
    case ConstraintKind::HyperplaneFreeEta:
      g.eta.assign(static_cast<std::size_t>(n + 1), std::vector<Eigen::Vector2d>(static_cast<std::size_t>(no)));
      for (int k = 0; k <= n; ++k)
        for (int m = 0; m < no; ++m)
          g.eta[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)] = z.segment<2>(layout_.param(m, k));
      break;
    case ConstraintKind::MinkowskiFixedGamma: g.gamma = fixed_gamma_; break;
    case ConstraintKind::HyperplaneFixedEta: g.eta = fixed_eta_; break;
  }
  return g;
}

Eigen::VectorXd StagewiseNLP::pack(const TrajectoryGuess& guess) const {
  const int n = layout_.horizon(), no = layout_.obstacles();
  if (static_cast<int>(guess.states.size()) != n + 1 || static_cast<int>(guess.inputs.size()) != n)
    throw std::invalid_argument("warm start does not cover the horizon");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(layout_.num_vars());
  for (int k = 0; k <= n; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    z.segment<5>(layout_.x(k)) = guess.states[ks].vec();
    if (k < n) z.segment<2>(layout_.u(k)) = guess.inputs[ks].vec();
    for (int m = 0; m < no; ++m) {
      const auto ms = static_cast<std::size_t>(m);
      if (layout_.kind() == ConstraintKind::MinkowskiFreeGamma) {
        const bool have = guess.gamma.size() == static_cast<std::size_t>(n + 1) &&
                          guess.gamma[ks].size() == static_cast<std::size_t>(no);
        const double g = have ? guess.gamma[ks][ms] : 0.0;
        z(layout_.param(m, k)) = std::clamp(g, lower_(layout_.param(m, k)), upper_(layout_.param(m, k)));
      } else if (layout_.kind() == ConstraintKind::HyperplaneFreeEta) {
        const bool have = guess.eta.size() == static_cast<std::size_t>(n + 1) &&
                          guess.eta[ks].size() == static_cast<std::size_t>(no);
        const Eigen::Vector2d e = have ? guess.eta[ks][ms] : eta_hat_at(scenario_, guess.states[ks], m);
        z.segment<2>(layout_.param(m, k)) = normalize_eta(e);
      }
    }
  }
  if (ready()) fill_slacks(z);
  return z;
}

StagewiseNLP assemble(const Scenario& scenario, const ReferenceTrajectory& reference, const RobotState& x0,
                      const std::optional<TrajectoryGuess>& warm_start) {
  scenario.validate();
  const int n = scenario.horizon_steps;
  reference.validate(n);

  StagewiseNLP nlp;
  nlp.scenario_ = scenario;
  nlp.reference_ = reference;
  nlp.x0_ = x0;
  nlp.layout_ = NlpLayout(n, scenario.obstacles.size(), scenario.mode.kind);
  const NlpLayout& lay = nlp.layout_;
  const int nv = lay.num_vars();
  const Limits& lim = scenario.limits;

  nlp.lower_ = Eigen::VectorXd::Constant(nv, -kInf);
  nlp.upper_ = Eigen::VectorXd::Constant(nv, kInf);
  for (int k = 1; k <= n; ++k) {
    double vlo = lim.v_min, vhi = lim.v_max, wlo = lim.omega_min, whi = lim.omega_max;
    if (k == n) {
      vlo = std::max(vlo, -scenario.eps_v);
      vhi = std::min(vhi, scenario.eps_v);
      wlo = std::max(wlo, -scenario.eps_omega);
      whi = std::min(whi, scenario.eps_omega);
    }
    nlp.lower_(lay.x(k) + 3) = vlo;
    nlp.upper_(lay.x(k) + 3) = vhi;
    nlp.lower_(lay.x(k) + 4) = wlo;
    nlp.upper_(lay.x(k) + 4) = whi;
  }
  for (int k = 0; k < n; ++k) {
    nlp.lower_(lay.u(k)) = lim.a_min;
    nlp.upper_(lay.u(k)) = lim.a_max;
    nlp.lower_(lay.u(k) + 1) = lim.alpha_min;
    nlp.upper_(lay.u(k) + 1) = lim.alpha_max;
  }

  const int no = lay.obstacles();
  const double margin = scenario.mode.safety_margin;
  const bool mink = is_minkowski(lay.kind());
  nlp.ineq_lower_ = Eigen::VectorXd::Constant(lay.num_ineq(), mink ? 1.0 + margin : margin);
  nlp.ineq_upper_ = Eigen::VectorXd::Constant(lay.num_ineq(), kInf);
  for (int k = 0; k <= n; ++k)
    for (int m = 0; m < no; ++m) {
      nlp.lower_(lay.slack(m, k)) = 0.0;
      nlp.param_idx_.push_back(lay.slack(m, k));
      if (lay.kind() == ConstraintKind::MinkowskiFreeGamma) {
        // eigenvalues of R G R^T do not depend on the heading
        const GammaInterval gb = stage_gamma_bounds(scenario.robot.base_shape(), scenario.obstacles.shape(m));
        nlp.lower_(lay.param(m, k)) = gb.lower;
        nlp.upper_(lay.param(m, k)) = gb.upper;
        nlp.param_idx_.push_back(lay.param(m, k));
      } else if (lay.kind() == ConstraintKind::HyperplaneFreeEta) {
        // the unit-norm row bounds eta; a box on top can make the linearized row infeasible
        for (int j = 0; j < 2; ++j) nlp.param_idx_.push_back(lay.param(m, k) + j);
        const int row = lay.collision_row(m, k) + 1;
        nlp.ineq_lower_(row) = 1.0;
        nlp.ineq_upper_(row) = 1.0;
      }
    }
  std::sort(nlp.param_idx_.begin(), nlp.param_idx_.end());

  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k <= n; ++k) {
    const Vector5d& q = k < n ? scenario.weights.state : scenario.weights.terminal;
    for (int i = 0; i < 5; ++i) trip.emplace_back(lay.x(k) + i, lay.x(k) + i, 2.0 * q(i));
    if (k < n)
      for (int i = 0; i < 2; ++i) trip.emplace_back(lay.u(k) + i, lay.u(k) + i, 2.0 * scenario.weights.input(i));
  }
  nlp.hessian_.resize(nv, nv);
  nlp.hessian_.setFromTriplets(trip.begin(), trip.end());

  nlp.z0_ = nlp.pack(warm_start ? *warm_start : initial_guess_from_reference(scenario, reference, lay.kind()));
  return nlp;
}

StagewiseNLP freeze_parameters(const StagewiseNLP& nlp, const TrajectoryGuess& guess) {
  const NlpLayout& lay = nlp.layout();
  if (!is_fixed(lay.kind())) throw std::invalid_argument("freeze_parameters requires a fixed constraint mode");
  const int n = lay.horizon(), no = lay.obstacles();
  if (static_cast<int>(guess.states.size()) != n + 1)
    throw std::invalid_argument("freeze_parameters needs a guess with N+1 states");

  StagewiseNLP out = nlp;
  const Scenario& sc = nlp.scenario();
  out.fixed_gamma_.assign(static_cast<std::size_t>(n + 1), {});
  out.fixed_eta_.assign(static_cast<std::size_t>(n + 1), {});
  for (int k = 0; k <= n; ++k) {
    const RobotState& x = guess.states[static_cast<std::size_t>(k)];
    for (int m = 0; m < no; ++m) {
      if (lay.kind() == ConstraintKind::MinkowskiFixedGamma) {
        const double g = fixed_gamma_hat(x, sc.robot.base_shape(), sc.obstacles.center(m), sc.obstacles.shape(m));
        out.fixed_gamma_[static_cast<std::size_t>(k)].push_back(
            stage_gamma_bounds(sc.robot.base_shape(), sc.obstacles.shape(m)).clamp(g));
      } else {
        out.fixed_eta_[static_cast<std::size_t>(k)].push_back(eta_hat_at(sc, x, m));
      }
    }
  }
  out.frozen_ = true;
  out.fill_slacks(out.z0_);
  return out;
}

TrajectoryGuess shift_warm_start(const TrajectoryGuess& previous) {
  if (previous.states.size() < 2 || previous.inputs.size() + 1 != previous.states.size())
    throw std::invalid_argument("previous solution does not cover a horizon");
  auto shift = [](auto v) {
    if (v.size() > 1) {
      std::rotate(v.begin(), v.begin() + 1, v.end());
      v.back() = v[v.size() - 2];
    }
    return v;
  };
  TrajectoryGuess out;
  out.states = shift(previous.states);
  out.inputs = shift(previous.inputs);
  out.gamma = shift(previous.gamma);
  out.eta = shift(previous.eta);
  return out;
}

TrajectoryGuess initial_guess_from_reference(const Scenario& scenario, const ReferenceTrajectory& reference,
                                             ConstraintKind kind) {
  const int n = scenario.horizon_steps, no = scenario.obstacles.size();
  reference.validate(n);
  TrajectoryGuess g;
  g.states = reference.states;
  g.inputs.assign(static_cast<std::size_t>(n), ControlInput{});
  if (kind == ConstraintKind::MinkowskiFreeGamma) {
    g.gamma.assign(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(no), 0.0));
  } else if (kind == ConstraintKind::HyperplaneFreeEta) {
    g.eta.resize(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k)
      for (int m = 0; m < no; ++m)
        g.eta[static_cast<std::size_t>(k)].push_back(eta_hat_at(scenario, reference.states[static_cast<std::size_t>(k)], m));
  }
  return g;
}

}  // namespace ellmpc
