#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fastslow/pipelines.hpp"

namespace fastslow {

// Max over the shared grid of |a[col_a] - b[col_b]|.
double sup_error(const Trajectory& a, const std::string& col_a, const Trajectory& b, const std::string& col_b);
inline double sup_error(const Trajectory& a, const Trajectory& b, const std::string& column) {
  return sup_error(a, column, b, column);
}

// Least-squares fit of log y = slope * log x + intercept; residual is the RMS log misfit.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// Runs fn(i) for i in [0, count) on at most `workers` threads; rethrows the first failure.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);
unsigned default_workers();

// dt_full ~ c_full eps^3, dt_slow ~ c_slow eps^1.5, both rounded down to dt_out / 2^k.
struct DtPolicy {
  double c_full = 0.1;
  double c_slow = 0.02;
  double dt_out = 1.0 / 4096;
};

// Largest dt_out / 2^k not above target (dt_out when the target exceeds it).
double nested_dt(double dt_out, double target);

struct SweepReport {
  std::vector<double> eps_values;
  std::vector<double> sup_errors_leading;
  std::vector<double> sup_errors_second;
  SlopeFit slope_leading;
  SlopeFit slope_second;
  std::vector<double> dt_full;
  std::vector<double> dt_slow;
  double dt_out = 0.0;
  double T = 0.0;
  double noise_floor = 0.0;  // slow-integrator error estimate (Richardson)
  bool degenerate = false;   // all leading errors within 10x of the noise floor
};

SweepReport eps_sweep(const ModelSpec& model, const std::vector<double>& eps_list, double T,
                      const DtPolicy& policy = {}, unsigned workers = 0);

enum class Pipeline { Full, Slow };
enum class Criterion { Leading, Second };

const char* to_string(Pipeline p);
const char* to_string(Criterion c);

struct StepSizeOptions {
  std::vector<double> dt_grid;  // empty: default factor-2 grid of 15 points
  double threshold_factor = 1.5;
  double dt_reference = 0.0;    // 0: default for the complementary pipeline
  double dt_out_min = 0.0;      // 0: T / 2^14
  unsigned workers = 0;
};

struct StepSizeReport {
  double eps = 0.0;
  Pipeline pipeline = Pipeline::Full;
  Criterion criterion = Criterion::Second;
  double T = 0.0;
  std::vector<double> dt_grid;  // increasing
  std::vector<double> errors;
  double plateau = 0.0;
  double dt_max = 0.0;
  double threshold_factor = 1.5;
  double dt_reference = 0.0;
};

// Default grid: T / 2^k for 15 consecutive k, finest at or below eps^3/64 (full)
// or eps^1.5/256 (slow), and coarsest at most T/4.
std::vector<double> default_dt_grid(Pipeline pipeline, double eps, double T);

// Applies the plateau rule to an error curve over an increasing grid.
void locate_dt_max(StepSizeReport& rep);

StepSizeReport stepsize_search(const ModelSpec& model, double eps, Pipeline pipeline, double T, Criterion criterion,
                               const StepSizeOptions& opts = {});

// Both criteria from one set of runs.
std::pair<StepSizeReport, StepSizeReport> stepsize_search_both(const ModelSpec& model, double eps, Pipeline pipeline,
                                                               double T, const StepSizeOptions& opts = {});

struct BenchReport {
  double eps = 0.0, T = 0.0;
  double dt_full = 0.0, dt_slow = 0.0;
  long steps_full = 0, steps_slow = 0;
  double step_ratio = 0.0;        // dt_slow / dt_full
  double step_count_ratio = 0.0;  // steps_full / steps_slow
  double wall_full = 0.0, wall_homogenized = 0.0, wall_second = 0.0;
  double wall_slow_sequential = 0.0, wall_slow_parallel = 0.0;
  double wall_ratio = 0.0;        // wall_full / wall_slow_parallel
};

// Step counts only; no integration.
BenchReport bench_counts(double eps, double T, double dt_full, double dt_slow);

// Step counts plus median wall times over `repeats` runs of each pipeline.
BenchReport bench(const ModelSpec& model, double eps, double T, double dt_full, double dt_slow, int repeats = 1);

// Centered moving average with trapezoidal quadrature, on the samples whose
// window fits inside the span.
Trajectory windowed_average(const std::vector<double>& times, const VectorXd& values, double window);

nlohmann::json to_json(const SweepReport& r);
nlohmann::json to_json(const StepSizeReport& r);
nlohmann::json to_json(const BenchReport& r);

}  // namespace fastslow
