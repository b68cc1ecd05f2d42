#include "fastslow/thermo.hpp"

#include <cmath>

namespace fastslow {

namespace {

void require_fast_energy(double E_perp) {
  if (!(E_perp > 0)) throw Error(ErrorKind::ZeroFastEnergy, "fast-subsystem energy is not positive");
}

// T, S, F, Gamma from actions and jets; shared by the finite-eps forms.
void fill_eps(const SlowJets& J, const VectorXd& theta, double eps, ThermoRecord& rec) {
  const int r = static_cast<int>(J.omega.size());
  const Eigen::Index n = J.V.gradient.size();
  double E = 0.0, log_prod = 0.0;
  VectorXd sumDL = VectorXd::Zero(n);
  for (int l = 0; l < r; ++l) {
    E += theta(l) * J.omega[l].value;
    log_prod += std::log(J.omega[l].value);
    sumDL += J.L[l].gradient;
  }
  require_fast_energy(E);
  rec.T_eps = E / r;
  rec.S_eps = r * std::log(E) - log_prod;
  rec.F_eps = rec.T_eps * sumDL;
  rec.log_Gamma_eps = r * std::log(eps) + std::log(unit_ball_volume_even(r)) + r * std::log(2.0 * E) - log_prod;
  rec.Gamma_eps = std::exp(rec.log_Gamma_eps);
}

struct LeadingParts {
  double E0 = 0.0, T0 = 0.0, S0 = 0.0, log_prod = 0.0;
  VectorXd F0;
};

LeadingParts leading_parts(const SlowJets& J, const VectorXd& ths) {
  const int r = static_cast<int>(J.omega.size());
  LeadingParts lp;
  lp.F0 = VectorXd::Zero(J.V.gradient.size());
  for (int l = 0; l < r; ++l) {
    lp.E0 += ths(l) * J.omega[l].value;
    lp.log_prod += std::log(J.omega[l].value);
    lp.F0 += J.L[l].gradient;
  }
  require_fast_energy(lp.E0);
  lp.T0 = lp.E0 / r;
  lp.S0 = r * std::log(lp.E0) - lp.log_prod;
  lp.F0 *= lp.T0;
  return lp;
}

// sum_l (theta*_l D_tL_l)^2
double dtl_square_sum(const SlowJets& J, const VectorXd& ths, const VectorXd& p0) {
  double acc = 0.0;
  for (std::size_t l = 0; l < J.omega.size(); ++l) {
    const double v = ths(static_cast<Eigen::Index>(l)) * p0.dot(J.L[l].gradient);
    acc += v * v;
  }
  return acc;
}

}  // namespace

double unit_ball_volume_even(int r) { return std::pow(M_PI, r) / std::tgamma(r + 1.0); }

double entropy_constant(int r, double eps) { return -(r * std::log(2.0 * eps) + std::log(unit_ball_volume_even(r))); }

ThermoRecord observables_eps(const ModelSpec& model, const FullState& s, double eps) {
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y, JetOrder::Value, JetOrder::Gradient);
  const int r = model.r();
  VectorXd theta(r);
  double E_perp = 0.5 * s.zdot.squaredNorm();
  for (int l = 0; l < r; ++l) {
    const double w = J.omega[l].value, z = s.z(l), zd = s.zdot(l);
    E_perp += 0.5 * w * w * z * z / (eps * eps);
    theta(l) = 0.5 * (zd * zd / w + w * z * z / (eps * eps));
  }
  ThermoRecord rec;
  fill_eps(J, theta, eps, rec);
  rec.E_perp = E_perp;
  rec.E_par = full_energy(model, s, eps) - E_perp;
  return rec;
}

ThermoRecord observables_eps(const ModelSpec& model, const TransformedState& s, double eps) {
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y, JetOrder::Value, JetOrder::Gradient);
  ThermoRecord rec;
  fill_eps(J, s.theta, eps, rec);
  rec.E_perp = 0.0;
  for (int l = 0; l < model.r(); ++l) rec.E_perp += s.theta(l) * J.omega[l].value;
  rec.E_par = full_energy(model, from_action_angle(model, s, eps), eps) - rec.E_perp;
  return rec;
}

ThermoRecord observables_leading(const ModelSpec& model, const VectorXd& y0, const VectorXd&) {
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(y0, JetOrder::Value, JetOrder::Gradient);
  const LeadingParts lp = leading_parts(J, theta_star(model));
  const int r = model.r();
  ThermoRecord rec;
  rec.T0 = lp.T0;
  rec.S0 = lp.S0;
  rec.F0 = lp.F0;
  rec.E0_perp = lp.E0;
  rec.E0_perp_from_entropy = std::exp(lp.S0 / r + lp.log_prod / r);
  return rec;
}

ThermoRecord observables_second(const ModelSpec& model, const SlowState& s, const VectorXd& C) {
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y0, JetOrder::Gradient, JetOrder::Gradient);
  const VectorXd ths = theta_star(model);
  const int r = model.r();
  const LeadingParts lp = leading_parts(J, ths);
  ThermoRecord rec;
  rec.T0 = lp.T0;
  rec.S0 = lp.S0;
  rec.F0 = lp.F0;
  rec.E0_perp = lp.E0;
  rec.E0_perp_from_entropy = std::exp(lp.S0 / r + lp.log_prod / r);

  double Ep = 0.0, Epar = s.p0.dot(s.pbar2) + J.V.gradient.dot(s.ybar2), dl_y = 0.0;
  for (int l = 0; l < r; ++l) {
    const Jet2d& w = J.omega[l];
    const double wl = w.value, Dtw = s.p0.dot(w.gradient);
    const double thb2 = ths(l) * Dtw * Dtw / (8.0 * std::pow(wl, 4)) + C(l);
    Ep += thb2 * wl + ths(l) * w.gradient.dot(s.ybar2);
    Epar += -ths(l) * Dtw * Dtw / (4.0 * wl * wl * wl) + ths(l) * ths(l) * w.gradient.squaredNorm() / (16.0 * wl * wl);
    dl_y += J.L[l].gradient.dot(s.ybar2);
  }
  rec.Ebar2_perp = Ep;
  rec.Ebar2_par = Epar;
  rec.Sbar2 = Ep / lp.T0 - dl_y - dtl_square_sum(J, ths, s.p0) / (16.0 * r * lp.T0 * lp.T0);
  return rec;
}

double ebar2_perp_from_entropy(const ModelSpec& model, const SlowState& s, double Sbar2, const VectorXd& ybar2) {
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y0, JetOrder::Value, JetOrder::Gradient);
  const VectorXd ths = theta_star(model);
  const LeadingParts lp = leading_parts(J, ths);
  return lp.F0.dot(ybar2) + lp.T0 * Sbar2 + dtl_square_sum(J, ths, s.p0) / (16.0 * model.r() * lp.T0);
}

OscillatoryThermo oscillatory_thermo(const ModelSpec& model, const SlowState& s, const VectorXd& C, double eps) {
  const CorrectionTerms c = correction_terms(model, s, C, eps);
  ModelEvaluator ev(model);
  const SlowJets& J = ev.evaluate(s.y0, JetOrder::Value, JetOrder::Gradient);
  const VectorXd ths = theta_star(model);
  const LeadingParts lp = leading_parts(J, ths);
  const int r = model.r();
  const VectorXd y2 = s.ybar2 + c.y2_osc;
  OscillatoryThermo o;
  double dl_y = 0.0;
  for (int l = 0; l < r; ++l) {
    const double wl = J.omega[l].value;
    o.E1_perp_osc += c.theta1_osc(l) * wl;
    o.E2_perp_osc += (c.thetabar2(l) + c.theta2_osc(l)) * wl + ths(l) * J.omega[l].gradient.dot(y2);
    dl_y += J.L[l].gradient.dot(y2);
  }
  o.S1_osc = o.E1_perp_osc / lp.T0;
  o.S2_osc = o.E2_perp_osc / lp.T0 - dl_y - o.E1_perp_osc * o.E1_perp_osc / (2.0 * r * lp.T0 * lp.T0);
  return o;
}

std::vector<ThermoRecord> thermo_series_second(const ModelSpec& model, const Trajectory& slow, const VectorXd& C) {
  std::vector<ThermoRecord> out;
  out.reserve(slow.times.size());
  for (Eigen::Index k = 0; k < slow.rows(); ++k) {
    ThermoRecord rec = observables_second(model, slow_state_at(model, slow, k), C);
    rec.t = slow.times[k];
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ThermoRecord> thermo_series_full(const ModelSpec& model, const Trajectory& full, double eps) {
  std::vector<ThermoRecord> out;
  out.reserve(full.times.size());
  for (Eigen::Index k = 0; k < full.rows(); ++k) {
    ThermoRecord rec = observables_eps(model, full_state_at(model, full, k), eps);
    rec.t = full.times[k];
    out.push_back(std::move(rec));
  }
  return out;
}

FirstLawReport verify_first_law(const std::vector<ThermoRecord>& records, const Trajectory& traj) {
  if (records.size() != traj.times.size()) throw Error(ErrorKind::GridMismatch, "records and trajectory differ in length");
  for (std::size_t k = 0; k < records.size(); ++k)
    if (records[k].t != traj.times[k]) throw Error(ErrorKind::GridMismatch, "records and trajectory differ in time");
  FirstLawReport rep;
  if (records.size() < 2) return rep;
  rep.dt_out = traj.times[1] - traj.times[0];
  const Eigen::Index n = records[0].F0.size();
  std::vector<int> ycol;
  for (Eigen::Index j = 0; j < n; ++j) ycol.push_back(traj.column("y" + std::to_string(j + 1)));
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const ThermoRecord& a = records[k];
    const ThermoRecord& b = records[k + 1];
    double work = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dy = traj.states(static_cast<Eigen::Index>(k + 1), ycol[j]) - traj.states(static_cast<Eigen::Index>(k), ycol[j]);
      work += 0.5 * (a.F0(j) + b.F0(j)) * dy;
    }
    const double heat = 0.5 * (a.T0 + b.T0) * (b.S0 - a.S0);
    const double dt = traj.times[k + 1] - traj.times[k];
    const double res = std::abs((b.E0_perp - a.E0_perp) - work - heat) / dt;
    rep.residual.push_back(res);
    rep.max = std::max(rep.max, res);
    sum += res;
  }
  rep.mean = sum / static_cast<double>(rep.residual.size());
  return rep;
}

ConstituentReport verify_constituents(const ModelSpec& model, const SlowState& s, const VectorXd& C, double h) {
  if (!(h > 0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be positive");
  const ThermoRecord rec = observables_second(model, s, C);
  auto E = [&](double S, const VectorXd& yb) { return ebar2_perp_from_entropy(model, s, S, yb); };
  auto rel = [](double approx, double exact) { return std::abs(approx - exact) / std::max(std::abs(exact), 1e-300); };
  ConstituentReport rep;
  const double dS = (E(rec.Sbar2 + h, s.ybar2) - E(rec.Sbar2 - h, s.ybar2)) / (2.0 * h);
  rep.T_residual = rel(dS, rec.T0);
  rep.max_residual = rep.T_residual;
  const Eigen::Index n = s.ybar2.size();
  rep.F_residual.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXd yp = s.ybar2, ym = s.ybar2;
    yp(j) += h;
    ym(j) -= h;
    const double dy = (E(rec.Sbar2, yp) - E(rec.Sbar2, ym)) / (2.0 * h);
    rep.F_residual(j) = rel(dy, rec.F0(j));
    rep.max_residual = std::max(rep.max_residual, rep.F_residual(j));
  }
  return rep;
}

ConstraintReport verify_constraint(const std::vector<ThermoRecord>& records, double tol) {
  ConstraintReport rep;
  rep.tol = tol;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double v = std::abs(records[k].Ebar2_perp + records[k].Ebar2_par);
    if (k == 0) rep.at_t0 = v;
    if (v > rep.max_abs) rep.max_abs = v, rep.t_at_max = records[k].t;
  }
  rep.pass = rep.max_abs <= tol;
  return rep;
}

}  // namespace fastslow
