#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fastslow/expr.hpp"
#include "fastslow/jet.hpp"

namespace fastslow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Fast-slow model: slow potential V(y), fast frequencies omega_l(y), initial data.
// Validated on construction and immutable afterwards. Fast-channel indices are zero-based.
class ModelSpec {
 public:
  ModelSpec(std::string name, int n, int r, ExprPtr V, std::vector<ExprPtr> omega, VectorXd y_star,
            VectorXd p_star, VectorXd u_star, double T, double omega_floor = 1e-6);

  const std::string& name() const { return name_; }
  int n() const { return n_; }
  int r() const { return r_; }
  const ExprNode& V() const { return *V_; }
  const ExprNode& omega(int l) const { return *omega_.at(l); }
  const VectorXd& y_star() const { return y_star_; }
  const VectorXd& p_star() const { return p_star_; }
  const VectorXd& u_star() const { return u_star_; }
  double T() const { return T_; }
  double omega_floor() const { return omega_floor_; }

  const Tape& v_tape() const { return v_tape_; }
  const Tape& omega_tape(int l) const { return omega_tapes_.at(l); }

  // Same model with u* replaced, used for scaling studies.
  ModelSpec with_u_star(const VectorXd& u) const;

 private:
  std::string name_;
  int n_;
  int r_;
  ExprPtr V_;
  std::vector<ExprPtr> omega_;
  VectorXd y_star_, p_star_, u_star_;
  double T_;
  double omega_floor_;
  Tape v_tape_;
  std::vector<Tape> omega_tapes_;
};

// JSON document with fields name, n, r, V, omega, y_star, p_star, u_star, T, omega_floor.
ModelSpec parse_model(std::string_view json_text);

// "builtin:test", "builtin:constant", or a path to a JSON config.
ModelSpec load_model(const std::string& source);

// V = (y1^4 + y2^4)/2, omega = (4 + (y1 y2)^2, 2 + sin y1), y* = (1,-0.5), p* = (1,1.2), u* = (3,2).
ModelSpec test_model();

// Test-model potential and initial data with constant frequencies (4, 2).
ModelSpec constant_omega_model();

Jet2d v_jet(const ModelSpec& model, const VectorXd& y);
Jet2d omega_jet(const ModelSpec& model, int l, const VectorXd& y);
Jet2d log_omega_jet(const ModelSpec& model, int l, const VectorXd& y);

// theta*_l = u*_l^2 / (2 omega_l(y*)).
VectorXd theta_star(const ModelSpec& model);

// All jets at one slow point.
struct SlowJets {
  Jet2d V;
  std::vector<Jet2d> omega;
  std::vector<Jet2d> L;  // log omega

  VectorXd omega_values() const;
};

// Reusable evaluator owning the tape workspaces; one per thread/integration.
class ModelEvaluator {
 public:
  explicit ModelEvaluator(const ModelSpec& model);

  // Evaluates V and all omega/log-omega jets at y. Throws FrequencyNotPositive below the floor.
  const SlowJets& evaluate(const Eigen::Ref<const VectorXd>& y, JetOrder v_order, JetOrder omega_order);

  const ModelSpec& model() const { return *model_; }

 private:
  const ModelSpec* model_;
  Tape::Workspace<double> work_;
  SlowJets jets_;
};

}  // namespace fastslow
