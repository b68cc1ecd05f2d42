#include "fastslow/systems.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fastslow {

namespace {

using ConstRef = Eigen::Ref<const VectorXd>;
using Ref = Eigen::Ref<VectorXd>;

void require_eps(double eps) {
  if (!(eps > 0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
}

void require_size(const VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw Error(ErrorKind::DimensionMismatch, std::string("wrong length for ") + what);
}

// Second-order averaged right-hand side on top of the jets at y0.
void slow_derivative(const SlowJets& J, const VectorXd& ths, const VectorXd& C, const ConstRef& p0,
                     const ConstRef& ybar2, const ConstRef& pbar2, Ref dy0, Ref dp0, Ref dphi0, Ref dybar2,
                     Ref dpbar2, Ref dphibar2, VectorXd& tmp) {
  const int r = static_cast<int>(J.omega.size());
  dy0 = p0;
  dp0 = -J.V.gradient;
  dybar2 = pbar2;
  dpbar2.noalias() = -J.V.hessian * ybar2;
  for (int l = 0; l < r; ++l) {
    const Jet2d& w = J.omega[l];
    const Jet2d& L = J.L[l];
    const double th = ths(l);
    const double DtL = p0.dot(L.gradient);
    const double Dtw = p0.dot(w.gradient);
    const double w2 = w.value * w.value;
    const double thb2 = th * Dtw * Dtw / (8.0 * w2 * w2) + C(l);
    dp0 -= th * w.gradient;
    dphi0(l) = w.value;
    dphibar2(l) = w.gradient.dot(ybar2) + th * L.gradient.squaredNorm() / 8.0 - DtL * DtL / (8.0 * w.value);
    dybar2 -= (th * DtL / (4.0 * w.value)) * L.gradient;
    dpbar2 -= thb2 * w.gradient;
    tmp.noalias() = w.hessian * ybar2;
    dpbar2 -= th * tmp;
    tmp.noalias() = L.hessian * L.gradient;
    dpbar2 -= (th * th / 8.0) * tmp;
    tmp.noalias() = L.hessian * p0;
    dpbar2 += (th * DtL / (4.0 * w.value)) * tmp;
  }
}

CorrectionTerms corrections_at(const SlowJets& J, const VectorXd& ths, const VectorXd& C, const VectorXd& p0,
                               const VectorXd& phi0, const VectorXd& phibar2, double eps, double resonance_tol) {
  const int r = static_cast<int>(J.omega.size());
  const Eigen::Index n = p0.size();
  CorrectionTerms c;
  c.theta1_osc = VectorXd::Zero(r);
  c.phi2_osc = VectorXd::Zero(r);
  c.y2_osc = VectorXd::Zero(n);
  c.p2_osc = VectorXd::Zero(n);
  c.theta2_osc = VectorXd::Zero(r);
  c.thetabar2 = VectorXd::Zero(r);
  for (int l = 0; l < r; ++l) {
    const Jet2d& w = J.omega[l];
    const Jet2d& L = J.L[l];
    const double th = ths(l);
    const double wl = w.value, w2 = wl * wl;
    const double DtL = p0.dot(L.gradient);
    const double Dtw = p0.dot(w.gradient);
    const double arg = 2.0 * phi0(l) / eps;
    const double c2 = std::cos(arg), s2 = std::sin(arg), c4 = std::cos(2.0 * arg);
    const VectorXd D2Lp = L.hessian * p0;

    c.theta1_osc(l) = -th * DtL / (2.0 * wl) * s2;
    c.phi2_osc(l) = -DtL / (4.0 * wl) * c2;
    c.y2_osc -= (th / (4.0 * wl) * c2) * L.gradient;
    c.p2_osc += (th / 4.0 * c2) * (D2Lp / wl - (Dtw / w2) * L.gradient);
    c.thetabar2(l) = th * Dtw * Dtw / (8.0 * w2 * w2) + C(l);

    double amp2 = 0.0;
    for (int m = 0; m < r; ++m) amp2 += th * ths(m) * J.omega[m].gradient.dot(L.gradient) / (4.0 * w2);
    amp2 -= th * D2Lp.dot(p0) / (4.0 * w2);
    amp2 += th * DtL * DtL / (4.0 * w2);
    amp2 -= th * DtL / wl * phibar2(l);
    amp2 += th * J.V.gradient.dot(L.gradient) / (4.0 * w2);
    double value = amp2 * c2 + th * th * L.gradient.squaredNorm() / (16.0 * wl) * c4;
    for (int m = 0; m < r; ++m) {
      if (m == l) continue;
      const double wm = J.omega[m].value;
      if (std::abs(wm - wl) < resonance_tol) {
        std::ostringstream msg;
        msg << "|omega_" << m + 1 << " - omega_" << l + 1 << "| = " << std::abs(wm - wl) << " below tolerance "
            << resonance_tol;
        throw Error(ErrorKind::ResonanceTooClose, msg.str());
      }
      const double k = th * ths(m) * J.L[m].gradient.dot(L.gradient) / 8.0;
      value += k * (std::cos(2.0 * (phi0(m) - phi0(l)) / eps) / (wm - wl) +
                    std::cos(2.0 * (phi0(m) + phi0(l)) / eps) / (wm + wl));
    }
    c.theta2_osc(l) = value;
  }
  return c;
}

}  // namespace

FullState initial_full_state(const ModelSpec& model) {
  return {model.y_star(), model.p_star(), VectorXd::Zero(model.r()), model.u_star()};
}

TransformedState initial_transformed_state(const ModelSpec& model) {
  return {VectorXd::Zero(model.r()), theta_star(model), model.y_star(), model.p_star()};
}

SlowState initial_slow_state(const ModelSpec& model, const SecondOrderInitials& init) {
  return {model.y_star(), model.p_star(), VectorXd::Zero(model.r()), init.ybar2, init.pbar2, init.phibar2};
}

FullState full_rhs(const ModelSpec& model, double, const FullState& s, double eps) {
  require_eps(eps);
  require_size(s.y, model.n(), "y");
  require_size(s.ydot, model.n(), "ydot");
  require_size(s.z, model.r(), "z");
  require_size(s.zdot, model.r(), "zdot");
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y, JetOrder::Gradient, JetOrder::Gradient);
  const double ie2 = 1.0 / (eps * eps);
  FullState d{s.ydot, -J.V.gradient, s.zdot, VectorXd(model.r())};
  for (int l = 0; l < model.r(); ++l) {
    const double w = J.omega[l].value, z = s.z(l);
    d.zdot(l) = -ie2 * w * w * z;
    d.ydot -= (ie2 * w * z * z) * J.omega[l].gradient;
  }
  return d;
}

double full_energy(const ModelSpec& model, const FullState& s, double eps) {
  require_eps(eps);
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y, JetOrder::Value, JetOrder::Value);
  double U = 0.0;
  for (int l = 0; l < model.r(); ++l) {
    const double w = J.omega[l].value;
    U += 0.5 * w * w * s.z(l) * s.z(l);
  }
  return 0.5 * s.ydot.squaredNorm() + 0.5 * s.zdot.squaredNorm() + J.V.value + U / (eps * eps);
}

TransformedState to_action_angle(const ModelSpec& model, const FullState& s, double eps,
                                 const VectorXd* phi_reference) {
  require_eps(eps);
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y, JetOrder::Value, JetOrder::Gradient);
  const int r = model.r();
  const double period = 2.0 * M_PI * eps;
  TransformedState a{VectorXd(r), VectorXd(r), s.y, s.ydot};
  for (int l = 0; l < r; ++l) {
    const double w = J.omega[l].value, z = s.z(l), zd = s.zdot(l);
    a.theta(l) = 0.5 * (zd * zd / w + w * z * z / (eps * eps));
    if (z == 0.0 && zd == 0.0) {
      if (model.u_star()(l) != 0.0)
        throw Error(ErrorKind::UndefinedAngle, "z and zdot both vanish in channel " + std::to_string(l + 1));
      a.phi(l) = phi_reference ? (*phi_reference)(l) : 0.0;
      continue;
    }
    double phi = eps * std::atan2(w * z / eps, zd);
    if (phi_reference) phi += period * std::round(((*phi_reference)(l) - phi) / period);
    a.phi(l) = phi;
    a.p -= (eps * a.theta(l) / (2.0 * w) * std::sin(2.0 * phi / eps)) * J.omega[l].gradient;
  }
  return a;
}

FullState from_action_angle(const ModelSpec& model, const TransformedState& s, double eps) {
  require_eps(eps);
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y, JetOrder::Value, JetOrder::Gradient);
  const int r = model.r();
  FullState f{s.y, s.p, VectorXd(r), VectorXd(r)};
  for (int l = 0; l < r; ++l) {
    const double w = J.omega[l].value, th = s.theta(l), ph = s.phi(l) / eps;
    if (th < 0) throw Error(ErrorKind::InvalidArgument, "negative action");
    f.z(l) = eps * std::sqrt(2.0 * th / w) * std::sin(ph);
    f.zdot(l) = std::sqrt(2.0 * th * w) * std::cos(ph);
    f.ydot += (eps * th / (2.0 * w) * std::sin(2.0 * ph)) * J.omega[l].gradient;
  }
  return f;
}

TransformedState transformed_rhs(const ModelSpec& model, double, const TransformedState& s, double eps) {
  require_eps(eps);
  const int n = model.n(), r = model.r();
  VectorXd q(r + n), p(r + n), dq(r + n), dp(r + n);
  q << s.phi, s.y;
  p << s.theta, s.p;
  TransformedSystem sys(model, eps);
  sys(0.0, q, p, dq, dp);
  return {dq.head(r), dp.head(r), dq.tail(n), dp.tail(n)};
}

std::pair<VectorXd, VectorXd> homogenized_rhs(const ModelSpec& model, double, const VectorXd& y0,
                                              const VectorXd& p0) {
  require_size(y0, model.n(), "y0");
  require_size(p0, model.n(), "p0");
  HomogenizedSystem sys(model);
  VectorXd dq(model.n()), dp(model.n());
  sys(0.0, y0, p0, dq, dp);
  return {dq, dp};
}

SlowState coupled_slow_rhs(const ModelSpec& model, double, const SlowState& s, const VectorXd& C) {
  VectorXd q, p;
  SecondOrderSystem::pack(s, q, p);
  SecondOrderSystem sys(model, C);
  VectorXd dq(q.size()), dp(p.size());
  sys(0.0, q, p, dq, dp);
  return SecondOrderSystem::unpack(model.n(), model.r(), dq, dp);
}

VectorXd theta_bar2(const ModelSpec& model, const VectorXd& y0, const VectorXd& p0, const VectorXd& C) {
  require_size(C, model.r(), "C");
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(y0, JetOrder::Value, JetOrder::Gradient);
  const VectorXd ths = theta_star(model);
  VectorXd out(model.r());
  for (int l = 0; l < model.r(); ++l) {
    const double w = J.omega[l].value, Dtw = p0.dot(J.omega[l].gradient);
    out(l) = ths(l) * Dtw * Dtw / (8.0 * w * w * w * w) + C(l);
  }
  return out;
}

double default_resonance_tol(const ModelSpec& model) { return 1e-3 * model.omega_floor(); }

CorrectionTerms correction_terms(const ModelSpec& model, const SlowState& s, const VectorXd& C, double eps,
                                 double resonance_tol) {
  require_eps(eps);
  require_size(s.y0, model.n(), "y0");
  require_size(s.phi0, model.r(), "phi0");
  require_size(C, model.r(), "C");
  if (resonance_tol < 0) resonance_tol = default_resonance_tol(model);
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y0, JetOrder::Gradient, JetOrder::Hessian);
  return corrections_at(J, theta_star(model), C, s.p0, s.phi0, s.phibar2, eps, resonance_tol);
}

SecondOrderInitials second_order_initials(const ModelSpec& model, double resonance_tol) {
  if (resonance_tol < 0) resonance_tol = default_resonance_tol(model);
  const int r = model.r();
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(model.y_star(), JetOrder::Gradient, JetOrder::Hessian);
  const VectorXd ths = theta_star(model);
  const VectorXd& p = model.p_star();
  const VectorXd phi0 = VectorXd::Zero(r), zero = VectorXd::Zero(r);
  // All phases vanish at t = 0, so any positive eps gives the same values.
  const CorrectionTerms first = corrections_at(J, ths, zero, p, phi0, zero, 1.0, resonance_tol);
  SecondOrderInitials init;
  init.phibar2 = -first.phi2_osc;
  const CorrectionTerms second = corrections_at(J, ths, zero, p, phi0, init.phibar2, 1.0, resonance_tol);
  init.ybar2 = -second.y2_osc;
  init.pbar2 = -second.p2_osc;
  init.C.resize(r);
  for (int l = 0; l < r; ++l) {
    const double w = J.omega[l].value, Dtw = p.dot(J.omega[l].gradient);
    init.C(l) = -ths(l) * Dtw * Dtw / (8.0 * w * w * w * w) - second.theta2_osc(l);
  }
  return init;
}

VectorXd reconstruct(const VectorXd& y0, const VectorXd& ybar2, const VectorXd& y2_osc, double eps) {
  if (ybar2.size() != y0.size() || y2_osc.size() != y0.size())
    throw Error(ErrorKind::DimensionMismatch, "reconstruct: inconsistent lengths");
  return y0 + eps * eps * (ybar2 + y2_osc);
}

std::vector<VectorXi> resonance_vectors(int r, int order) {
  std::vector<VectorXi> out;
  VectorXi g = VectorXi::Zero(r);
  // Depth-first over entries with the remaining |.|_1 budget.
  auto rec = [&](auto&& self, int i, int budget) -> void {
    if (i == r) {
      if (budget != 0) return;
      for (int k = 0; k < r; ++k) {
        if (g(k) == 0) continue;
        if (g(k) > 0) out.push_back(g);
        return;
      }
      return;
    }
    for (int v = -budget; v <= budget; ++v) {
      g(i) = v;
      self(self, i + 1, budget - std::abs(v));
    }
    g(i) = 0;
  };
  rec(rec, 0, order);
  return out;
}

ResonanceReport check_resonance(const ModelSpec& model, const Trajectory& traj, int order, double tol) {
  if (order != 2 && order != 3) throw Error(ErrorKind::InvalidArgument, "resonance order must be 2 or 3");
  if (tol < 0) tol = default_resonance_tol(model);
  const int n = model.n(), r = model.r();
  std::vector<int> ycol(n), pcol;
  for (int j = 0; j < n; ++j) ycol[j] = traj.column("y" + std::to_string(j + 1));
  bool have_p = true;
  for (int j = 0; j < n; ++j) {
    const std::string name = "p" + std::to_string(j + 1);
    if (!traj.has(name)) {
      have_p = false;
      break;
    }
    pcol.push_back(traj.column(name));
  }
  const std::vector<VectorXi> gammas = resonance_vectors(r, order);
  const Eigen::Index rows = traj.rows();
  Eigen::MatrixXd g(rows, static_cast<Eigen::Index>(gammas.size()));
  Eigen::MatrixXd rate(rows, static_cast<Eigen::Index>(gammas.size()));
  ModelEvaluator ev(model);
  VectorXd y(n), v(n);
  ResonanceReport rep;
  rep.order = order;
  rep.tol = tol;
  rep.global_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < rows; ++k) {
    for (int j = 0; j < n; ++j) y(j) = traj.states(k, ycol[j]);
    const SlowJets& J = ev.evaluate(y, JetOrder::Value, JetOrder::Gradient);
    if (have_p)
      for (int j = 0; j < n; ++j) v(j) = traj.states(k, pcol[j]);
    double best = std::numeric_limits<double>::infinity();
    VectorXi arg = gammas.empty() ? VectorXi::Zero(r) : gammas[0];
    for (std::size_t a = 0; a < gammas.size(); ++a) {
      double val = 0.0, dval = 0.0;
      for (int l = 0; l < r; ++l) {
        val += gammas[a](l) * J.omega[l].value;
        if (have_p) dval += gammas[a](l) * J.omega[l].gradient.dot(v);
      }
      g(k, static_cast<Eigen::Index>(a)) = val;
      rate(k, static_cast<Eigen::Index>(a)) = dval;
      if (std::abs(val) < best) best = std::abs(val), arg = gammas[a];
    }
    rep.times.push_back(traj.times[k]);
    rep.minimum.push_back(best);
    rep.argmin.push_back(arg);
    if (best < rep.global_min) rep.global_min = best, rep.t_global_min = traj.times[k];
  }
  bool flat = false;
  for (std::size_t a = 0; a < gammas.size(); ++a) {
    const Eigen::Index c = static_cast<Eigen::Index>(a);
    for (Eigen::Index k = 0; k + 1 < rows; ++k) {
      const double g0 = g(k, c), g1 = g(k + 1, c);
      if (!(g0 == 0.0 || g0 * g1 < 0.0)) continue;
      const double s = g0 == 0.0 ? 0.0 : g0 / (g0 - g1);
      const double dt = traj.times[k + 1] - traj.times[k];
      const double rt = have_p ? std::abs((1 - s) * rate(k, c) + s * rate(k + 1, c)) : std::abs(g1 - g0) / dt;
      rep.crossings.push_back({traj.times[k] + s * dt, gammas[a], rt});
      if (!(rt > tol)) flat = true;
    }
  }
  rep.pass = order == 2 ? rep.global_min > tol : !flat;
  return rep;
}

FullSystem::FullSystem(const ModelSpec& model, double eps) : eval_(model), eps_(eps) { require_eps(eps); }

void FullSystem::operator()(double, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp) {
  const int n = eval_.model().n(), r = eval_.model().r();
  const SlowJets& J = eval_.evaluate(q.head(n), JetOrder::Gradient, JetOrder::Gradient);
  const double ie2 = 1.0 / (eps_ * eps_);
  dq = p;
  dp.head(n) = -J.V.gradient;
  for (int l = 0; l < r; ++l) {
    const double w = J.omega[l].value, z = q(n + l);
    dp(n + l) = -ie2 * w * w * z;
    dp.head(n) -= (ie2 * w * z * z) * J.omega[l].gradient;
  }
}

TransformedSystem::TransformedSystem(const ModelSpec& model, double eps)
    : eval_(model), eps_(eps), ydot_(model.n()) {
  require_eps(eps);
}

void TransformedSystem::operator()(double, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp) {
  const int n = eval_.model().n(), r = eval_.model().r();
  const SlowJets& J = eval_.evaluate(q.tail(n), JetOrder::Gradient, JetOrder::Hessian);
  ydot_ = p.tail(n);
  for (int l = 0; l < r; ++l)
    ydot_ += (0.5 * eps_ * p(l) * std::sin(2.0 * q(l) / eps_)) * J.L[l].gradient;
  dq.tail(n) = ydot_;
  dp.tail(n) = -J.V.gradient;
  for (int l = 0; l < r; ++l) {
    const double th = p(l), arg = 2.0 * q(l) / eps_, s = std::sin(arg), c = std::cos(arg);
    const double DtL = ydot_.dot(J.L[l].gradient);
    dq(l) = J.omega[l].value + 0.5 * eps_ * DtL * s;
    dp(l) = -th * DtL * c;
    dp.tail(n) -= th * J.omega[l].gradient;
    dp.tail(n).noalias() -= (0.5 * eps_ * th * s) * (J.L[l].hessian * ydot_);
  }
}

HomogenizedSystem::HomogenizedSystem(const ModelSpec& model) : eval_(model), theta_star_(theta_star(model)) {}

void HomogenizedSystem::operator()(double, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp) {
  const SlowJets& J = eval_.evaluate(q, JetOrder::Gradient, JetOrder::Gradient);
  dq = p;
  dp = -J.V.gradient;
  for (int l = 0; l < eval_.model().r(); ++l) dp -= theta_star_(l) * J.omega[l].gradient;
}

SecondOrderSystem::SecondOrderSystem(const ModelSpec& model, VectorXd C)
    : eval_(model), theta_star_(theta_star(model)), C_(std::move(C)), D2Lp_(model.n()), D2LDL_(model.n()) {
  require_size(C_, model.r(), "C");
}

void SecondOrderSystem::pack(const SlowState& s, VectorXd& q, VectorXd& p) {
  const Eigen::Index n = s.y0.size(), r = s.phi0.size();
  q.resize(2 * n + 2 * r);
  p.resize(2 * n);
  q << s.y0, s.phi0, s.ybar2, s.phibar2;
  p << s.p0, s.pbar2;
}

SlowState SecondOrderSystem::unpack(int n, int r, const Eigen::Ref<const VectorXd>& q,
                                    const Eigen::Ref<const VectorXd>& p) {
  return {q.segment(0, n), p.segment(0, n), q.segment(n, r), q.segment(n + r, n), p.segment(n, n),
          q.segment(2 * n + r, r)};
}

void SecondOrderSystem::operator()(double, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp) {
  const int n = eval_.model().n(), r = eval_.model().r();
  const SlowJets& J = eval_.evaluate(q.segment(0, n), JetOrder::Hessian, JetOrder::Hessian);
  slow_derivative(J, theta_star_, C_, p.segment(0, n), q.segment(n + r, n), p.segment(n, n), dq.segment(0, n),
                  dp.segment(0, n), dq.segment(n, r), dq.segment(n + r, n), dp.segment(n, n),
                  dq.segment(2 * n + r, r), D2Lp_);
}

}  // namespace fastslow
