#pragma once

#include <limits>
#include <vector>

#include "fastslow/pipelines.hpp"

namespace fastslow {

// Fields not produced by a given observable function stay NaN / empty.
struct ThermoRecord {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  double t = 0.0;
  double E_perp = nan, E_par = nan, T_eps = nan, S_eps = nan;
  VectorXd F_eps;
  double Gamma_eps = nan, log_Gamma_eps = nan;
  double T0 = nan, S0 = nan;
  VectorXd F0;
  double E0_perp = nan, E0_perp_from_entropy = nan;
  double Ebar2_perp = nan, Ebar2_par = nan, Sbar2 = nan;
};

// Volume of the unit ball in R^(2r): pi^r / r!.
double unit_ball_volume_even(int r);

// C_eps = -log((2 eps)^r Gamma_2r), so that S_eps = log Gamma_eps + C_eps.
double entropy_constant(int r, double eps);

ThermoRecord observables_eps(const ModelSpec& model, const FullState& s, double eps);
ThermoRecord observables_eps(const ModelSpec& model, const TransformedState& s, double eps);
ThermoRecord observables_leading(const ModelSpec& model, const VectorXd& y0, const VectorXd& p0);

// Leading and averaged second-order fields at a slow state.
ThermoRecord observables_second(const ModelSpec& model, const SlowState& s, const VectorXd& C);

// Right-hand side of the rearranged form <F0, ybar2> + T0 Sbar2 + sum(theta* D_tL)^2 / (16 r T0).
double ebar2_perp_from_entropy(const ModelSpec& model, const SlowState& s, double Sbar2, const VectorXd& ybar2);

// Rapidly oscillating energy/entropy expansion terms at a slow state.
struct OscillatoryThermo {
  double E1_perp_osc = 0.0;  // [E1perp]
  double S1_osc = 0.0;       // [S1]
  double E2_perp_osc = 0.0;  // [E2perp], averages to Ebar2_perp
  double S2_osc = 0.0;       // [S2], averages to Sbar2
};
OscillatoryThermo oscillatory_thermo(const ModelSpec& model, const SlowState& s, const VectorXd& C, double eps);

std::vector<ThermoRecord> thermo_series_second(const ModelSpec& model, const Trajectory& slow, const VectorXd& C);
std::vector<ThermoRecord> thermo_series_full(const ModelSpec& model, const Trajectory& full, double eps);

struct FirstLawReport {
  std::vector<double> residual;  // per output step, per unit time
  double max = 0.0;
  double mean = 0.0;
  double dt_out = 0.0;
};

// Residual of dE0 = F0 . dy0 + T0 dS0 across consecutive samples, using endpoint
// averages of F0 and T0 and divided by the output spacing.
FirstLawReport verify_first_law(const std::vector<ThermoRecord>& records, const Trajectory& traj);

struct ConstituentReport {
  double T_residual = 0.0;  // relative
  VectorXd F_residual;      // relative, per component
  double max_residual = 0.0;
};

// Central differences of Ebar2_perp(Sbar2, ybar2; y0, p0) against T0 and F0.
ConstituentReport verify_constituents(const ModelSpec& model, const SlowState& s, const VectorXd& C, double h);

struct ConstraintReport {
  double max_abs = 0.0;
  double t_at_max = 0.0;
  double at_t0 = 0.0;
  double tol = 0.0;
  bool pass = false;
};

ConstraintReport verify_constraint(const std::vector<ThermoRecord>& records, double tol = 1e-6);

}  // namespace fastslow
