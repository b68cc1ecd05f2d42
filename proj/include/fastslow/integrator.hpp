#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fastslow/errors.hpp"

namespace fastslow {

template <typename Scalar = double>
struct ButcherPair {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
  Vec2 cA, bA;
  Mat2 aA;
  Vec2 cB, bB;
  Mat2 aB;
};

// Lobatto IIIA (positions) / IIIB (momenta), two stages.
template <typename Scalar = double>
ButcherPair<Scalar> lobatto_pair() {
  ButcherPair<Scalar> t;
  const Scalar h = Scalar(1) / Scalar(2);
  t.cA << Scalar(0), Scalar(1);
  t.aA << Scalar(0), Scalar(0), h, h;
  t.bA << h, h;
  t.cB << Scalar(0), Scalar(1);
  t.aB << h, Scalar(0), h, Scalar(0);
  t.bB << h, h;
  return t;
}

struct IntegratorConfig {
  double dt = 1e-3;
  double fp_tol = 1e-13;
  int fp_max_iters = 100;
  int output_stride = 1;
};

// Samples on a uniform grid; states has one row per sample.
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;
  std::vector<std::string> labels;

  Eigen::Index rows() const { return states.rows(); }
  int column(const std::string& label) const;
  Eigen::VectorXd col(const std::string& label) const { return states.col(column(label)); }
  bool has(const std::string& label) const;
};

inline bool Trajectory::has(const std::string& label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

inline int Trajectory::column(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorKind::InvalidArgument, "trajectory has no column '" + label + "'");
  return static_cast<int>(it - labels.begin());
}

// Partitioned two-stage RK step solved by fixed-point iteration on the stage slopes.
// Rhs: void(Scalar t, const Vector& q, const Vector& p, Vector& dq, Vector& dp).
template <typename Rhs, typename Scalar = double>
class PartitionedStepper {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  PartitionedStepper(Rhs rhs, Eigen::Index nq, Eigen::Index np, const IntegratorConfig& cfg,
                     ButcherPair<Scalar> tab = lobatto_pair<Scalar>())
      : rhs_(std::move(rhs)), cfg_(cfg), tab_(tab) {
    if (!(cfg.fp_tol > 0)) throw Error(ErrorKind::InvalidArgument, "fp_tol must be positive");
    if (cfg.fp_max_iters < 1) throw Error(ErrorKind::InvalidArgument, "fp_max_iters must be at least 1");
    for (int i = 0; i < 2; ++i) {
      Q_[i].resize(nq), P_[i].resize(np), KQ_[i].resize(nq), KP_[i].resize(np);
      Qold_[i].resize(nq), Pold_[i].resize(np), dq_.resize(nq), dp_.resize(np);
    }
  }

  // Advances (q, p) in place by h; returns the number of fixed-point sweeps.
  int step(Scalar t, Scalar h, Vector& q, Vector& p) {
    using std::abs;
    // Initial guess: every stage at the current state, slopes taken at t.
    rhs_(t, q, p, KQ_[0], KP_[0]);
    KQ_[1] = KQ_[0], KP_[1] = KP_[0];
    for (int i = 0; i < 2; ++i) Qold_[i] = q, Pold_[i] = p;
    bool fresh[2] = {tab_.cA(0) == Scalar(0), false};
    for (int it = 1; it <= cfg_.fp_max_iters; ++it) {
      Scalar res(0);
      for (int i = 0; i < 2; ++i) {
        Q_[i] = q + h * (tab_.aA(i, 0) * KQ_[0] + tab_.aA(i, 1) * KQ_[1]);
        P_[i] = p + h * (tab_.aB(i, 0) * KP_[0] + tab_.aB(i, 1) * KP_[1]);
      }
      for (int i = 0; i < 2; ++i) {
        // Unchanged stage values give unchanged slopes; skip the evaluation.
        if (fresh[i] && Q_[i] == Qold_[i] && P_[i] == Pold_[i]) continue;
        fresh[i] = true;
        rhs_(t + tab_.cA(i) * h, Q_[i], P_[i], dq_, dp_);
        // Written so that a NaN residual propagates instead of being dropped.
        const Scalar rq = abs(h) * (dq_ - KQ_[i]).cwiseAbs().maxCoeff();
        const Scalar rp = abs(h) * (dp_ - KP_[i]).cwiseAbs().maxCoeff();
        if (!(rq <= res)) res = rq;
        if (!(rp <= res)) res = rp;
        if (!dq_.allFinite() || !dp_.allFinite()) res = std::numeric_limits<Scalar>::quiet_NaN();
        KQ_[i].swap(dq_), KP_[i].swap(dp_);
        Qold_[i] = Q_[i], Pold_[i] = P_[i];
      }
      if (!(res > Scalar(cfg_.fp_tol))) {
        if (res != res) break;  // NaN
        q += h * (tab_.bA(0) * KQ_[0] + tab_.bA(1) * KQ_[1]);
        p += h * (tab_.bB(0) * KP_[0] + tab_.bB(1) * KP_[1]);
        return it;
      }
    }
    char msg[128];
    std::snprintf(msg, sizeof msg, "stage residual above %g after %d iterations at t = %.17g", cfg_.fp_tol,
                  cfg_.fp_max_iters, double(t));
    throw Error(ErrorKind::FixedPointDivergence, msg);
  }

  const IntegratorConfig& config() const { return cfg_; }

 private:
  Rhs rhs_;
  IntegratorConfig cfg_;
  ButcherPair<Scalar> tab_;
  Vector Q_[2], P_[2], KQ_[2], KP_[2], Qold_[2], Pold_[2], dq_, dp_;
};

// Adapts separate position/momentum callbacks into the combined form.
template <typename F, typename G>
auto combine_rhs(F f, G g) {
  return [f = std::move(f), g = std::move(g)](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                               Eigen::VectorXd& dq, Eigen::VectorXd& dp) {
    dq = f(t, q, p);
    dp = g(t, q, p);
  };
}

// One step with callbacks returning q-dot and p-dot: f(t, q, p), g(t, q, p).
template <typename F, typename G>
std::pair<Eigen::VectorXd, Eigen::VectorXd> step(F f, G g, double t, const Eigen::VectorXd& q,
                                                 const Eigen::VectorXd& p, const IntegratorConfig& cfg) {
  PartitionedStepper stepper(combine_rhs(std::move(f), std::move(g)), q.size(), p.size(), cfg);
  Eigen::VectorXd q1 = q, p1 = p;
  stepper.step(t, cfg.dt, q1, p1);
  return {q1, p1};
}

// Number of steps for [t0, T]; T - t0 must be an integer multiple of dt up to rounding.
inline long step_count(double t0, double T, double dt) {
  const double k = (T - t0) / dt;
  const double kr = std::round(k);
  if (std::abs(k - kr) > 1e-9 * std::max(1.0, kr))
    throw Error(ErrorKind::InvalidArgument, "horizon is not an integer number of steps");
  return static_cast<long>(kr);
}

// Integrates with a combined rhs; samples t0 and every output_stride steps through T.
template <typename Rhs>
Trajectory integrate_combined(Rhs rhs, double t0, const Eigen::VectorXd& q0, const Eigen::VectorXd& p0,
                              const IntegratorConfig& cfg, double T, std::vector<std::string> labels = {}) {
  if (!(cfg.dt > 0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (cfg.output_stride < 1) throw Error(ErrorKind::InvalidArgument, "output_stride must be at least 1");
  if (T < t0) throw Error(ErrorKind::InvalidArgument, "T must not precede t0");
  const long steps = step_count(t0, T, cfg.dt);
  if (steps % cfg.output_stride != 0)
    throw Error(ErrorKind::GridMismatch, "step count is not a multiple of output_stride");
  const Eigen::Index nq = q0.size(), np = p0.size();
  if (labels.empty()) {
    for (Eigen::Index i = 0; i < nq; ++i) labels.push_back("q" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < np; ++i) labels.push_back("p" + std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(labels.size()) != nq + np)
    throw Error(ErrorKind::DimensionMismatch, "label count does not match state dimension");
  const long samples = steps / cfg.output_stride + 1;
  Trajectory traj;
  traj.labels = std::move(labels);
  traj.times.reserve(samples);
  traj.states.resize(samples, nq + np);
  Eigen::VectorXd q = q0, p = p0;
  auto record = [&](long row, double t) {
    traj.times.push_back(t);
    traj.states.row(row).head(nq) = q.transpose();
    traj.states.row(row).tail(np) = p.transpose();
  };
  record(0, t0);
  PartitionedStepper stepper(std::move(rhs), nq, np, cfg);
  long row = 1;
  for (long k = 1; k <= steps; ++k) {
    stepper.step(t0 + static_cast<double>(k - 1) * cfg.dt, cfg.dt, q, p);
    if (k % cfg.output_stride == 0) record(row++, t0 + static_cast<double>(k) * cfg.dt);
  }
  return traj;
}

template <typename F, typename G>
Trajectory integrate(F f, G g, double t0, const Eigen::VectorXd& q0, const Eigen::VectorXd& p0,
                     const IntegratorConfig& cfg, double T, std::vector<std::string> labels = {}) {
  return integrate_combined(combine_rhs(std::move(f), std::move(g)), t0, q0, p0, cfg, T, std::move(labels));
}

}  // namespace fastslow
