#include "fastslow/pipelines.hpp"

#include <cmath>

namespace fastslow {

namespace {

IntegratorConfig integrator_config(const RunConfig& cfg) {
  IntegratorConfig ic;
  ic.dt = cfg.dt;
  ic.fp_tol = cfg.fp_tol;
  ic.fp_max_iters = cfg.fp_max_iters;
  ic.output_stride = cfg.output_stride;
  return ic;
}

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

VectorXd row_segment(const Trajectory& traj, Eigen::Index row, const std::string& prefix, int count) {
  VectorXd v(count);
  for (int i = 0; i < count; ++i) v(i) = traj.states(row, traj.column(prefix + std::to_string(i + 1)));
  return v;
}

}  // namespace

double adjusted_dt(double T, double dt) {
  if (!(dt > 0) || !(T > 0)) throw Error(ErrorKind::InvalidArgument, "dt and T must be positive");
  const double steps = std::ceil(T / dt - 1e-9);
  return T / std::max(1.0, steps);
}

std::vector<std::string> indexed_labels(const std::string& prefix, int count) {
  std::vector<std::string> out;
  for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Trajectory run_full(const ModelSpec& model, double eps, const RunConfig& cfg) {
  const int n = model.n(), r = model.r();
  const FullState s0 = initial_full_state(model);
  VectorXd q(n + r), p(n + r);
  q << s0.y, s0.z;
  p << s0.ydot, s0.zdot;
  const auto y = indexed_labels("y", n), pl = indexed_labels("p", n), z = indexed_labels("z", r),
             zd = indexed_labels("zdot", r);
  Trajectory t = integrate_combined(FullSystem(model, eps), 0.0, q, p, integrator_config(cfg), cfg.T,
                                    concat({y, z, pl, zd}));
  return select_columns(t, concat({y, pl, z, zd}));
}

Trajectory run_transformed(const ModelSpec& model, double eps, const RunConfig& cfg) {
  const int n = model.n(), r = model.r();
  const TransformedState s0 = initial_transformed_state(model);
  VectorXd q(r + n), p(r + n);
  q << s0.phi, s0.y;
  p << s0.theta, s0.p;
  const auto ph = indexed_labels("phi", r), th = indexed_labels("theta", r), y = indexed_labels("y", n),
             pl = indexed_labels("p", n);
  Trajectory t = integrate_combined(TransformedSystem(model, eps), 0.0, q, p, integrator_config(cfg), cfg.T,
                                    concat({ph, y, th, pl}));
  return select_columns(t, concat({ph, th, y, pl}));
}

Trajectory run_homogenized(const ModelSpec& model, const RunConfig& cfg) {
  const int n = model.n();
  return integrate_combined(HomogenizedSystem(model), 0.0, model.y_star(), model.p_star(),
                            integrator_config(cfg), cfg.T, concat({indexed_labels("y", n), indexed_labels("p", n)}));
}

Trajectory run_second(const ModelSpec& model, double eps, const RunConfig& cfg, SecondOrderInitials* init_out) {
  const int n = model.n(), r = model.r();
  const SecondOrderInitials init = second_order_initials(model);
  if (init_out) *init_out = init;
  VectorXd q, p;
  SecondOrderSystem::pack(initial_slow_state(model, init), q, p);
  const auto y = indexed_labels("y", n), pl = indexed_labels("p", n), ph = indexed_labels("phi0", r),
             yb = indexed_labels("ybar2", n), pb = indexed_labels("pbar2", n), phb = indexed_labels("phibar2", r);
  Trajectory t = integrate_combined(SecondOrderSystem(model, init.C), 0.0, q, p, integrator_config(cfg), cfg.T,
                                    concat({y, ph, yb, phb, pl, pb}));
  t = select_columns(t, concat({y, pl, ph, yb, pb, phb}));
  Eigen::MatrixXd states(t.rows(), t.states.cols() + n);
  states.leftCols(t.states.cols()) = t.states;
  for (Eigen::Index k = 0; k < t.rows(); ++k) {
    const SlowState s = slow_state_at(model, t, k);
    const CorrectionTerms c = correction_terms(model, s, init.C, eps);
    states.row(k).tail(n) = reconstruct(s.y0, s.ybar2, c.y2_osc, eps).transpose();
  }
  t.states = std::move(states);
  for (const auto& l : indexed_labels("y_recon", n)) t.labels.push_back(l);
  return t;
}

SlowState slow_state_at(const ModelSpec& model, const Trajectory& traj, Eigen::Index row) {
  const int n = model.n(), r = model.r();
  return {row_segment(traj, row, "y", n),     row_segment(traj, row, "p", n),
          row_segment(traj, row, "phi0", r),  row_segment(traj, row, "ybar2", n),
          row_segment(traj, row, "pbar2", n), row_segment(traj, row, "phibar2", r)};
}

FullState full_state_at(const ModelSpec& model, const Trajectory& traj, Eigen::Index row) {
  const int n = model.n(), r = model.r();
  return {row_segment(traj, row, "y", n), row_segment(traj, row, "p", n), row_segment(traj, row, "z", r),
          row_segment(traj, row, "zdot", r)};
}

VectorXd energy_series(const ModelSpec& model, const Trajectory& full, double eps) {
  VectorXd e(full.rows());
  for (Eigen::Index k = 0; k < full.rows(); ++k) e(k) = full_energy(model, full_state_at(model, full, k), eps);
  return e;
}

Trajectory select_columns(const Trajectory& traj, const std::vector<std::string>& labels) {
  Trajectory out;
  out.times = traj.times;
  out.labels = labels;
  out.states.resize(traj.rows(), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.states.col(static_cast<Eigen::Index>(i)) = traj.states.col(traj.column(labels[i]));
  return out;
}

Trajectory subsample(const Trajectory& traj, double dt_out) {
  if (traj.times.size() < 2) return traj;
  const double spacing = traj.times[1] - traj.times[0];
  const double k = dt_out / spacing;
  const long stride = std::lround(k);
  if (stride < 1 || std::abs(k - static_cast<double>(stride)) > 1e-6 * k)
    throw Error(ErrorKind::GridMismatch, "output spacing is not a multiple of the trajectory spacing");
  const Eigen::Index rows = (traj.rows() - 1) / stride + 1;
  if ((traj.rows() - 1) % stride != 0) throw Error(ErrorKind::GridMismatch, "trajectory end is off the coarse grid");
  Trajectory out;
  out.labels = traj.labels;
  out.states.resize(rows, traj.states.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    out.times.push_back(traj.times[i * stride]);
    out.states.row(i) = traj.states.row(i * stride);
  }
  return out;
}

}  // namespace fastslow
