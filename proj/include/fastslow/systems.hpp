#pragma once

#include <vector>

#include <Eigen/Core>

#include "fastslow/integrator.hpp"
#include "fastslow/model.hpp"

namespace fastslow {

using Eigen::VectorXi;

struct FullState {
  VectorXd y, ydot, z, zdot;
};

struct TransformedState {
  VectorXd phi, theta, y, p;
};

struct SlowState {
  VectorXd y0, p0, phi0, ybar2, pbar2, phibar2;
};

struct CorrectionTerms {
  VectorXd theta1_osc, phi2_osc, y2_osc, p2_osc, theta2_osc, thetabar2;
};

// Initial data of the averaged second-order system and the closed-form constant of thetabar2.
struct SecondOrderInitials {
  VectorXd ybar2, pbar2, phibar2, C;
};

// Initial points of each level.
FullState initial_full_state(const ModelSpec& model);
TransformedState initial_transformed_state(const ModelSpec& model);
SlowState initial_slow_state(const ModelSpec& model, const SecondOrderInitials& init);

FullState full_rhs(const ModelSpec& model, double t, const FullState& s, double eps);
double full_energy(const ModelSpec& model, const FullState& s, double eps);

// `phi_reference`, when given, selects the angle branch nearest to it (continuous lifting).
TransformedState to_action_angle(const ModelSpec& model, const FullState& s, double eps,
                                 const VectorXd* phi_reference = nullptr);
FullState from_action_angle(const ModelSpec& model, const TransformedState& s, double eps);

TransformedState transformed_rhs(const ModelSpec& model, double t, const TransformedState& s, double eps);

std::pair<VectorXd, VectorXd> homogenized_rhs(const ModelSpec& model, double t, const VectorXd& y0,
                                              const VectorXd& p0);

SlowState coupled_slow_rhs(const ModelSpec& model, double t, const SlowState& s, const VectorXd& C);

VectorXd theta_bar2(const ModelSpec& model, const VectorXd& y0, const VectorXd& p0, const VectorXd& C);

// Default gap below which [theta_2] refuses to divide: 1e-3 * omega floor.
double default_resonance_tol(const ModelSpec& model);

CorrectionTerms correction_terms(const ModelSpec& model, const SlowState& s, const VectorXd& C, double eps,
                                 double resonance_tol = -1.0);

SecondOrderInitials second_order_initials(const ModelSpec& model, double resonance_tol = -1.0);

VectorXd reconstruct(const VectorXd& y0, const VectorXd& ybar2, const VectorXd& y2_osc, double eps);

struct ResonanceCrossing {
  double t;
  VectorXi gamma;
  double rate;  // |d/dt sum gamma omega| at the crossing
};

struct ResonanceReport {
  int order = 2;
  double tol = 0.0;
  std::vector<double> times;
  std::vector<double> minimum;     // min over gamma of |sum gamma omega| per time
  std::vector<VectorXi> argmin;
  double global_min = 0.0;
  double t_global_min = 0.0;
  std::vector<ResonanceCrossing> crossings;
  bool pass = false;               // order 2: global_min > tol; order 3: no flat crossing
};

// Integer vectors with |gamma|_1 = order, one representative per +/- pair.
std::vector<VectorXi> resonance_vectors(int r, int order);

// Needs columns y1..yn; uses p1..pn for crossing rates when present.
ResonanceReport check_resonance(const ModelSpec& model, const Trajectory& traj, int order,
                                double tol = -1.0);

// Right-hand sides in the packed (q, p) form used by the integrator. Each owns its
// evaluator, so keep one instance per integration.

// q = (y, z), p = (ydot, zdot).
class FullSystem {
 public:
  FullSystem(const ModelSpec& model, double eps);
  void operator()(double t, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp);

 private:
  ModelEvaluator eval_;
  double eps_;
};

// q = (phi, y), p = (theta, p).
class TransformedSystem {
 public:
  TransformedSystem(const ModelSpec& model, double eps);
  void operator()(double t, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp);

 private:
  ModelEvaluator eval_;
  double eps_;
  VectorXd ydot_;
};

// q = y0, p = p0.
class HomogenizedSystem {
 public:
  explicit HomogenizedSystem(const ModelSpec& model);
  void operator()(double t, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp);

 private:
  ModelEvaluator eval_;
  VectorXd theta_star_;
};

// q = (y0, phi0, ybar2, phibar2), p = (p0, pbar2).
class SecondOrderSystem {
 public:
  SecondOrderSystem(const ModelSpec& model, VectorXd C);
  void operator()(double t, const VectorXd& q, const VectorXd& p, VectorXd& dq, VectorXd& dp);

  static void pack(const SlowState& s, VectorXd& q, VectorXd& p);
  static SlowState unpack(int n, int r, const Eigen::Ref<const VectorXd>& q, const Eigen::Ref<const VectorXd>& p);

 private:
  ModelEvaluator eval_;
  VectorXd theta_star_, C_;
  VectorXd D2Lp_, D2LDL_;
};

}  // namespace fastslow
