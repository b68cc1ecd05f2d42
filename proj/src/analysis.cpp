#include "fastslow/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Dense>

namespace fastslow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_power_of_two_multiple(double big, double small) {
  const double k = big / small;
  const double kr = std::round(k);
  return kr >= 1 && std::abs(k - kr) <= 1e-9 * kr;
}

int stride_for(double spacing, double dt) {
  if (!is_power_of_two_multiple(spacing, dt))
    throw Error(ErrorKind::GridMismatch, "output spacing is not a multiple of the step size");
  return static_cast<int>(std::lround(spacing / dt));
}

RunConfig run_config(double dt, double T, double spacing) {
  RunConfig c;
  c.dt = dt;
  c.T = T;
  c.output_stride = stride_for(spacing, dt);
  return c;
}

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

}  // namespace

double sup_error(const Trajectory& a, const std::string& col_a, const Trajectory& b, const std::string& col_b) {
  if (a.times.size() != b.times.size()) throw Error(ErrorKind::GridMismatch, "trajectories differ in length");
  for (std::size_t k = 0; k < a.times.size(); ++k)
    if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, std::abs(a.times[k])))
      throw Error(ErrorKind::GridMismatch, "trajectories differ at sample " + std::to_string(k));
  const int ca = a.column(col_a), cb = b.column(col_b);
  double m = 0.0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    const double d = std::abs(a.states(k, ca) - b.states(k, cb));
    if (!std::isfinite(d)) return kInf;
    m = std::max(m, d);
  }
  return m;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "slope fit needs two or more points");
  const Eigen::Index m = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(m, 2);
  VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw Error(ErrorKind::InvalidArgument, "slope fit needs positive data");
    A(i, 0) = std::log(x[i]);
    A(i, 1) = 1.0;
    b(i) = std::log(y[i]);
  }
  const Eigen::Vector2d c = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  SlopeFit f;
  f.slope = c(0);
  f.intercept = c(1);
  f.residual = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(m));
  return f;
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double nested_dt(double dt_out, double target) {
  if (!(target > 0) || !(dt_out > 0)) throw Error(ErrorKind::InvalidArgument, "step sizes must be positive");
  double dt = dt_out;
  while (dt > target) dt *= 0.5;
  return dt;
}

SweepReport eps_sweep(const ModelSpec& model, const std::vector<double>& eps_list, double T, const DtPolicy& policy,
                      unsigned workers) {
  if (eps_list.size() < 3) throw Error(ErrorKind::InvalidArgument, "an eps sweep needs at least three values");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw Error(ErrorKind::InvalidArgument, "eps values must strictly decrease");
  step_count(0.0, T, policy.dt_out);
  const std::size_t m = eps_list.size();
  SweepReport rep;
  rep.eps_values = eps_list;
  rep.T = T;
  rep.dt_out = policy.dt_out;
  rep.sup_errors_leading.assign(m, 0.0);
  rep.sup_errors_second.assign(m, 0.0);
  rep.dt_full.assign(m, 0.0);
  rep.dt_slow.assign(m, 0.0);
  std::vector<double> noise(m, 0.0);
  parallel_for(m, workers, [&](std::size_t i) {
    const double eps = eps_list[i];
    const double dtf = nested_dt(policy.dt_out, policy.c_full * eps * eps * eps);
    const double dts = nested_dt(policy.dt_out, policy.c_slow * std::pow(eps, 1.5));
    const Trajectory full = run_full(model, eps, run_config(dtf, T, policy.dt_out));
    const Trajectory hom = run_homogenized(model, run_config(dts, T, policy.dt_out));
    const Trajectory hom_half = run_homogenized(model, run_config(dts / 2, T, policy.dt_out));
    const Trajectory sec = run_second(model, eps, run_config(dts, T, policy.dt_out));
    rep.dt_full[i] = dtf;
    rep.dt_slow[i] = dts;
    rep.sup_errors_leading[i] = sup_error(full, "y1", hom, "y1");
    rep.sup_errors_second[i] = sup_error(full, "y1", sec, "y_recon1");
    noise[i] = sup_error(hom, hom_half, "y1") * 4.0 / 3.0;
  });
  rep.noise_floor = *std::max_element(noise.begin(), noise.end());
  rep.degenerate = std::all_of(rep.sup_errors_leading.begin(), rep.sup_errors_leading.end(),
                               [&](double e) { return e <= 10.0 * rep.noise_floor; });
  auto safe_fit = [&](const std::vector<double>& errs) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < m; ++i)
      if (errs[i] > 0) x.push_back(eps_list[i]), y.push_back(errs[i]);
    if (x.size() < 2) return SlopeFit{std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
    return fit_loglog(x, y);
  };
  rep.slope_leading = safe_fit(rep.sup_errors_leading);
  rep.slope_second = safe_fit(rep.sup_errors_second);
  return rep;
}

const char* to_string(Pipeline p) { return p == Pipeline::Full ? "full" : "slow"; }
const char* to_string(Criterion c) { return c == Criterion::Leading ? "leading" : "second"; }

std::vector<double> default_dt_grid(Pipeline pipeline, double eps, double T) {
  const double finest = pipeline == Pipeline::Full ? eps * eps * eps / 64.0 : std::pow(eps, 1.5) / 256.0;
  int k = static_cast<int>(std::ceil(std::log2(T / finest)));
  k = std::max(k, 16);  // coarsest stays at or below T/4
  std::vector<double> grid;
  for (int j = k; j > k - 15; --j) grid.push_back(std::ldexp(T, -j));
  return grid;
}

void locate_dt_max(StepSizeReport& rep) {
  const std::size_t m = rep.dt_grid.size();
  if (m < 3 || rep.errors.size() != m) throw Error(ErrorKind::InvalidArgument, "need at least three grid errors");
  std::vector<double> low(rep.errors.begin(), rep.errors.begin() + 3);
  std::sort(low.begin(), low.end());
  if (!std::isfinite(low[2]) || !(low[0] >= 0))
    throw Error(ErrorKind::NoPlateau, "errors at the smallest step sizes are not finite");
  if (low[2] > rep.threshold_factor * low[0])
    throw Error(ErrorKind::NoPlateau, "errors at the three smallest step sizes have not settled");
  rep.plateau = low[1];
  rep.dt_max = rep.dt_grid[0];
  for (std::size_t i = 0; i < m; ++i) {
    if (!(rep.errors[i] <= rep.threshold_factor * rep.plateau)) break;
    rep.dt_max = rep.dt_grid[i];
  }
}

namespace {

void validate_grid(const std::vector<double>& grid, double T) {
  if (grid.size() < 3) throw Error(ErrorKind::InvalidArgument, "dt grid needs at least three points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double q = grid[i] / grid[i - 1];
    if (!(q > 1) || std::abs(q - grid[1] / grid[0]) > 1e-9 * q)
      throw Error(ErrorKind::InvalidArgument, "dt grid must be increasing and geometric");
  }
  if (grid.back() / grid.front() < 1e4 * (1 - 1e-9))
    throw Error(ErrorKind::InvalidArgument, "dt grid must span at least four decades");
  for (double dt : grid) step_count(0.0, T, dt);
}

}  // namespace

std::pair<StepSizeReport, StepSizeReport> stepsize_search_both(const ModelSpec& model, double eps, Pipeline pipeline,
                                                               double T, const StepSizeOptions& opts) {
  std::vector<double> grid = opts.dt_grid.empty() ? default_dt_grid(pipeline, eps, T) : opts.dt_grid;
  std::sort(grid.begin(), grid.end());
  validate_grid(grid, T);
  const double out_min = opts.dt_out_min > 0 ? opts.dt_out_min : std::ldexp(T, -14);
  double dt_ref = opts.dt_reference;
  if (!(dt_ref > 0))
    dt_ref = pipeline == Pipeline::Full ? std::ldexp(T, -16) : default_dt_grid(Pipeline::Full, eps, T).front();
  const double base = std::max(out_min, dt_ref);

  // Reference solutions from the complementary pipeline, sampled every `base`.
  Trajectory ref_lead, ref_second;
  if (pipeline == Pipeline::Full) {
    ref_lead = run_homogenized(model, run_config(dt_ref, T, base));
    ref_second = run_second(model, eps, run_config(dt_ref, T, base));
  } else {
    ref_lead = run_full(model, eps, run_config(dt_ref, T, base));
  }

  const std::size_t m = grid.size();
  std::vector<double> err_lead(m, kInf), err_second(m, kInf);
  parallel_for(m, opts.workers, [&](std::size_t i) {
    const double dt = grid[i];
    const double spacing = std::max(dt, base);
    try {
      if (pipeline == Pipeline::Full) {
        const Trajectory run = run_full(model, eps, run_config(dt, T, spacing));
        err_lead[i] = finite_or_inf(sup_error(run, "y1", subsample(ref_lead, spacing), "y1"));
        err_second[i] = finite_or_inf(sup_error(run, "y1", subsample(ref_second, spacing), "y_recon1"));
      } else {
        const Trajectory truth = subsample(ref_lead, spacing);
        const Trajectory hom = run_homogenized(model, run_config(dt, T, spacing));
        err_lead[i] = finite_or_inf(sup_error(truth, "y1", hom, "y1"));
        const Trajectory sec = run_second(model, eps, run_config(dt, T, spacing));
        err_second[i] = finite_or_inf(sup_error(truth, "y1", sec, "y_recon1"));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::GridMismatch || e.is_config_error()) throw;
      // Unstable step sizes fail to integrate; they simply score as infinite error.
    }
  });

  auto make = [&](Criterion c, const std::vector<double>& errs) {
    StepSizeReport rep;
    rep.eps = eps;
    rep.pipeline = pipeline;
    rep.criterion = c;
    rep.T = T;
    rep.dt_grid = grid;
    rep.errors = errs;
    rep.threshold_factor = opts.threshold_factor;
    rep.dt_reference = dt_ref;
    locate_dt_max(rep);
    return rep;
  };
  return {make(Criterion::Leading, err_lead), make(Criterion::Second, err_second)};
}

StepSizeReport stepsize_search(const ModelSpec& model, double eps, Pipeline pipeline, double T, Criterion criterion,
                               const StepSizeOptions& opts) {
  auto both = stepsize_search_both(model, eps, pipeline, T, opts);
  return criterion == Criterion::Leading ? both.first : both.second;
}

BenchReport bench_counts(double eps, double T, double dt_full, double dt_slow) {
  if (!(dt_full > 0) || !(dt_slow > 0) || !(T > 0)) throw Error(ErrorKind::InvalidArgument, "bench needs positive T and dt");
  BenchReport rep;
  rep.eps = eps;
  rep.T = T;
  rep.dt_full = dt_full;
  rep.dt_slow = dt_slow;
  rep.steps_full = static_cast<long>(std::ceil(T / dt_full - 1e-9));
  rep.steps_slow = static_cast<long>(std::ceil(T / dt_slow - 1e-9));
  rep.step_ratio = dt_slow / dt_full;
  rep.step_count_ratio = static_cast<double>(rep.steps_full) / static_cast<double>(rep.steps_slow);
  return rep;
}

BenchReport bench(const ModelSpec& model, double eps, double T, double dt_full, double dt_slow, int repeats) {
  BenchReport rep = bench_counts(eps, T, dt_full, dt_slow);
  repeats = std::max(1, repeats);
  auto timed = [&](auto&& run) {
    std::vector<double> w;
    for (int i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      run();
      w.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(w.begin(), w.end());
    return w[w.size() / 2];
  };
  auto cfg = [&](long steps) {
    RunConfig c;
    c.T = T;
    c.dt = T / static_cast<double>(steps);
    c.output_stride = static_cast<int>(steps);
    return c;
  };
  rep.wall_full = timed([&] { run_full(model, eps, cfg(rep.steps_full)); });
  rep.wall_homogenized = timed([&] { run_homogenized(model, cfg(rep.steps_slow)); });
  rep.wall_second = timed([&] { run_second(model, eps, cfg(rep.steps_slow)); });
  rep.wall_slow_sequential = rep.wall_homogenized + rep.wall_second;
  rep.wall_slow_parallel = std::max(rep.wall_homogenized, rep.wall_second);
  rep.wall_ratio = rep.wall_slow_parallel > 0 ? rep.wall_full / rep.wall_slow_parallel : 0.0;
  return rep;
}

Trajectory windowed_average(const std::vector<double>& times, const VectorXd& values, double window) {
  const Eigen::Index m = static_cast<Eigen::Index>(times.size());
  if (values.size() != m) throw Error(ErrorKind::DimensionMismatch, "times and values differ in length");
  if (m < 2) throw Error(ErrorKind::InvalidArgument, "need at least two samples");
  const double dt = times[1] - times[0];
  const double span = times.back() - times.front();
  if (!(window > 0) || window > span * (1 + 1e-12)) throw Error(ErrorKind::InvalidArgument, "window must lie in (0, span]");
  const Eigen::Index half = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(0.5 * window / dt)));
  // Prefix trapezoid integrals let each window cost O(1).
  VectorXd cum(m);
  cum(0) = 0.0;
  for (Eigen::Index k = 1; k < m; ++k) cum(k) = cum(k - 1) + 0.5 * (values(k) + values(k - 1)) * (times[k] - times[k - 1]);
  Trajectory out;
  out.labels = {"average"};
  std::vector<double> avg;
  for (Eigen::Index k = half; k + half < m; ++k) {
    out.times.push_back(times[k]);
    avg.push_back((cum(k + half) - cum(k - half)) / (times[k + half] - times[k - half]));
  }
  out.states = Eigen::Map<const VectorXd>(avg.data(), static_cast<Eigen::Index>(avg.size()));
  return out;
}

nlohmann::json to_json(const SweepReport& r) {
  auto fit = [](const SlopeFit& f) { return nlohmann::json{{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}}; };
  return {{"eps_values", r.eps_values},
          {"sup_errors_leading", r.sup_errors_leading},
          {"sup_errors_second", r.sup_errors_second},
          {"slope_leading", fit(r.slope_leading)},
          {"slope_second", fit(r.slope_second)},
          {"dt_full", r.dt_full},
          {"dt_slow", r.dt_slow},
          {"dt_out", r.dt_out},
          {"T", r.T},
          {"noise_floor", r.noise_floor},
          {"degenerate", r.degenerate}};
}

nlohmann::json to_json(const StepSizeReport& r) {
  nlohmann::json errs = nlohmann::json::array();
  for (double e : r.errors) errs.push_back(std::isfinite(e) ? nlohmann::json(e) : nlohmann::json(nullptr));
  return {{"eps", r.eps},
          {"pipeline", to_string(r.pipeline)},
          {"criterion", to_string(r.criterion)},
          {"T", r.T},
          {"dt_grid", r.dt_grid},
          {"errors", errs},
          {"plateau", r.plateau},
          {"dt_max", r.dt_max},
          {"threshold_factor", r.threshold_factor},
          {"dt_reference", r.dt_reference}};
}

nlohmann::json to_json(const BenchReport& r) {
  return {{"eps", r.eps},
          {"T", r.T},
          {"dt_full", r.dt_full},
          {"dt_slow", r.dt_slow},
          {"steps_full", r.steps_full},
          {"steps_slow", r.steps_slow},
          {"step_ratio", r.step_ratio},
          {"step_count_ratio", r.step_count_ratio},
          {"wall_full", r.wall_full},
          {"wall_homogenized", r.wall_homogenized},
          {"wall_second", r.wall_second},
          {"wall_slow_sequential", r.wall_slow_sequential},
          {"wall_slow_parallel", r.wall_slow_parallel},
          {"wall_ratio", r.wall_ratio}};
}

}  // namespace fastslow
