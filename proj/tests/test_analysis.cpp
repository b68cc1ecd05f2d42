#include <atomic>
#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "fastslow/analysis.hpp"

using namespace fastslow;
using Eigen::VectorXd;

namespace {

Trajectory table(std::vector<double> t, std::vector<double> x) {
  Trajectory tr;
  tr.times = std::move(t);
  tr.labels = {"y1"};
  tr.states = Eigen::Map<VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return tr;
}

StepSizeReport curve(const std::vector<double>& errors) {
  StepSizeReport r;
  for (std::size_t i = 0; i < errors.size(); ++i) r.dt_grid.push_back(std::ldexp(1.0, -20 + static_cast<int>(i)));
  r.errors = errors;
  return r;
}

}  // namespace

TEST_CASE("sup error") {
  const Trajectory a = table({0, 0.5, 1}, {1, 2, 3});
  CHECK(sup_error(a, a, "y1") == 0.0);
  const Trajectory b = table({0, 0.5, 1}, {1.5, 2.5, 3.5});
  CHECK(sup_error(a, b, "y1") == 0.5);
  CHECK(sup_error(b, "y1", a, "y1") == 0.5);
  CHECK_THROWS_AS(sup_error(a, table({0, 0.5}, {1, 2}), "y1"), Error);
  try {
    sup_error(a, table({0, 0.25, 1}, {1, 2, 3}), "y1");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
  CHECK_THROWS_AS(sup_error(a, a, "y2"), Error);
}

TEST_CASE("log-log fit") {
  std::vector<double> x = {0.5, 0.25, 0.125, 0.0625}, y;
  for (double v : x) y.push_back(3.0 * v * v);
  const SlopeFit f = fit_loglog(x, y);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.residual < 1e-10);
  y[1] *= 1.5;
  CHECK(fit_loglog(x, y).residual > 0.01);
  CHECK_THROWS_AS(fit_loglog({1.0}, {1.0}), Error);
  CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0, 0.0}), Error);
}

TEST_CASE("plateau rule") {
  StepSizeReport flat = curve(std::vector<double>(15, 2e-6));
  locate_dt_max(flat);
  CHECK(flat.plateau == 2e-6);
  CHECK(flat.dt_max == flat.dt_grid.back());

  // plateau + c dt^2: the threshold 1.5 * plateau is crossed between grid points 8 and 9.
  std::vector<double> e;
  for (int i = 0; i < 15; ++i) e.push_back(1e-6 + 1e-6 * std::pow(4.0, i - 10) * 3.0);
  StepSizeReport q = curve(e);
  locate_dt_max(q);
  CHECK(q.dt_max == q.dt_grid[8]);

  // A spurious dip above the first crossing does not extend the run.
  e[12] = 1e-6;
  StepSizeReport dip = curve(e);
  locate_dt_max(dip);
  CHECK(dip.dt_max == q.dt_max);

  std::vector<double> rising;
  for (int i = 0; i < 15; ++i) rising.push_back(std::pow(2.0, i));
  StepSizeReport r = curve(rising);
  try {
    locate_dt_max(r);
    FAIL("no error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::NoPlateau);
  }
  StepSizeReport n = curve(std::vector<double>(15, NAN));
  CHECK_THROWS_AS(locate_dt_max(n), Error);
  StepSizeReport tiny = curve({1, 1});
  CHECK_THROWS_AS(locate_dt_max(tiny), Error);
}

TEST_CASE("step-size grids") {
  const std::vector<double> g = default_dt_grid(Pipeline::Full, 0.25, 1.0);
  CHECK(g.size() == 15);
  CHECK(g.front() <= 0.25 * 0.25 * 0.25 / 64);
  CHECK(g.back() <= 0.25);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] == 2 * g[i - 1]);
  const std::vector<double> s = default_dt_grid(Pipeline::Slow, 0.0625, 2.0);
  CHECK(s.front() <= std::pow(0.0625, 1.5) / 256);
  CHECK(s.back() <= 0.5);
  CHECK(std::log2(2.0 / s.front()) == std::round(std::log2(2.0 / s.front())));

  CHECK(nested_dt(1.0 / 4096, 1.0) == 1.0 / 4096);
  CHECK(nested_dt(1.0 / 4096, 1e-5) == std::ldexp(1.0, -17));
  CHECK(nested_dt(0.5, 0.5) == 0.5);
  CHECK_THROWS_AS(nested_dt(0.5, 0.0), Error);

  const ModelSpec m = test_model();
  const auto [lead, second] = stepsize_search_both(m, 0.25, Pipeline::Slow, 1.0);
  CHECK(lead.criterion == Criterion::Leading);
  CHECK(second.criterion == Criterion::Second);
  CHECK(second.dt_max <= lead.dt_max);
  CHECK(second.dt_max > 0);
  CHECK(std::find(lead.dt_grid.begin(), lead.dt_grid.end(), lead.dt_max) != lead.dt_grid.end());
  CHECK(lead.plateau > 0);
  const nlohmann::json j = to_json(second);
  CHECK(j["pipeline"] == "slow");
  CHECK(j["errors"].size() == 15);
  CHECK(j["dt_max"].get<double>() == second.dt_max);

  StepSizeOptions bad;
  bad.dt_grid = {1e-3, 2e-3, 4e-3};
  CHECK_THROWS_AS(stepsize_search(m, 0.25, Pipeline::Full, 1.0, Criterion::Leading, bad), Error);
}

TEST_CASE("step counts") {
  const BenchReport b = bench_counts(0.03125, 1.0, 4e-6, 3e-4);
  CHECK(b.step_ratio == doctest::Approx(75.0));
  CHECK(b.steps_full == 250000);
  CHECK(b.steps_slow == 3334);
  const BenchReport same = bench_counts(0.1, 2.0, 0.01, 0.01);
  CHECK(same.step_count_ratio == 1.0);
  CHECK(same.steps_full == 200);
  CHECK_THROWS_AS(bench_counts(0.1, 1.0, 0.0, 0.1), Error);
  const nlohmann::json j = to_json(b);
  CHECK(j["steps_full"] == 250000);

  const BenchReport t = bench(test_model(), 0.25, 1.0, 1.0 / 1024, 1.0 / 256);
  CHECK(t.wall_full >= 0);
  CHECK(t.wall_slow_parallel <= t.wall_slow_sequential);
}

TEST_CASE("windowed average") {
  std::vector<double> t;
  for (int k = 0; k <= 4000; ++k) t.push_back(k / 4000.0);
  const Trajectory z = windowed_average(t, VectorXd::Zero(4001), 0.1);
  CHECK(z.states.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.times.front() == doctest::Approx(0.05));

  for (double eps : {0.05, 0.01}) {
    VectorXd v(4001);
    for (int k = 0; k <= 4000; ++k) v(k) = std::sin(2 * t[k] / eps);
    const Trajectory a = windowed_average(t, v, 0.2);
    // |integral of sin(2t/eps)| <= eps over any interval.
    CHECK(a.states.cwiseAbs().maxCoeff() <= eps / 0.2 * 1.01);
  }
  VectorXd lin(4001);
  for (int k = 0; k <= 4000; ++k) lin(k) = 3 * t[k] + 1;
  const Trajectory l = windowed_average(t, lin, 0.5);
  for (Eigen::Index k = 0; k < l.rows(); ++k) CHECK(l.states(k, 0) == doctest::Approx(3 * l.times[k] + 1).epsilon(1e-12));
  CHECK_THROWS_AS(windowed_average(t, VectorXd::Zero(3), 0.1), Error);
  CHECK_THROWS_AS(windowed_average(t, VectorXd::Zero(4001), 2.0), Error);
}

TEST_CASE("eps sweep") {
  CHECK_THROWS_AS(eps_sweep(test_model(), {0.25, 0.125}, 1.0), Error);
  CHECK_THROWS_AS(eps_sweep(test_model(), {0.125, 0.25, 0.0625}, 1.0), Error);

  const SweepReport c = eps_sweep(constant_omega_model(), {0.25, 0.125, 0.0625}, 1.0);
  CHECK(c.degenerate);
  for (double e : c.sup_errors_leading) CHECK(e <= 10 * c.noise_floor);

  const SweepReport s = eps_sweep(test_model(), {0.25, 0.125, 0.0625}, 1.0);
  CHECK_FALSE(s.degenerate);
  CHECK(s.slope_leading.slope > 1.5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s.sup_errors_second[i] < s.sup_errors_leading[i]);
    CHECK(s.dt_full[i] <= 0.1 * std::pow(s.eps_values[i], 3));
    CHECK(std::fmod(s.dt_out / s.dt_full[i], 1.0) == 0.0);
  }
  const nlohmann::json j = to_json(s);
  CHECK(j["eps_values"].size() == 3);
  CHECK(j["degenerate"] == false);
}

TEST_CASE("parallel_for") {
  std::vector<int> out(50, 0);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  std::atomic<int> ran{0};
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [&](std::size_t i) {
                                 ++ran;
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(default_workers() >= 1);
}
