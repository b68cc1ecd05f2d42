#pragma once

#include <string>
#include <vector>

#include "fastslow/systems.hpp"

namespace fastslow {

struct RunConfig {
  double dt = 1e-3;
  double T = 1.0;
  int output_stride = 1;
  double fp_tol = 1e-13;
  int fp_max_iters = 100;
};

// Largest dt' <= dt with T/dt' an integer.
double adjusted_dt(double T, double dt);

// Labels "prefix1".."prefixN".
std::vector<std::string> indexed_labels(const std::string& prefix, int count);

// Columns y, p (= ydot), z, zdot.
Trajectory run_full(const ModelSpec& model, double eps, const RunConfig& cfg);

// Columns phi, theta, y, p.
Trajectory run_transformed(const ModelSpec& model, double eps, const RunConfig& cfg);

// Columns y, p.
Trajectory run_homogenized(const ModelSpec& model, const RunConfig& cfg);

// Columns y, p (leading order), phi0, ybar2, pbar2, phibar2, y_recon.
Trajectory run_second(const ModelSpec& model, double eps, const RunConfig& cfg,
                      SecondOrderInitials* init_out = nullptr);

// Rows of a second-order trajectory back as slow states.
SlowState slow_state_at(const ModelSpec& model, const Trajectory& traj, Eigen::Index row);
FullState full_state_at(const ModelSpec& model, const Trajectory& traj, Eigen::Index row);

// E(t) along a full trajectory.
VectorXd energy_series(const ModelSpec& model, const Trajectory& full, double eps);

// Trajectory with the named columns in the given order.
Trajectory select_columns(const Trajectory& traj, const std::vector<std::string>& labels);

// Every k-th row, k = target spacing / current spacing (must be an integer).
Trajectory subsample(const Trajectory& traj, double dt_out);

}  // namespace fastslow
