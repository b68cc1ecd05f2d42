#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"

#include "fastslow/integrator.hpp"

using namespace fastslow;
using Eigen::VectorXd;

namespace {

const double kTwoPi = 2 * std::numbers::pi;

VectorXd vec(double a) { return VectorXd::Constant(1, a); }

auto ho_f = [](double, const VectorXd&, const VectorXd& p) { return VectorXd(p); };
auto ho_g = [](double, const VectorXd& q, const VectorXd&) { return VectorXd(-q); };

// |(q, p)(T) - exact| for the unit oscillator from (1, 0), with T an integer multiple of dt.
double ho_end_error(double dt, double T) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.output_stride = static_cast<int>(std::lround(T / dt));
  const Trajectory tr = integrate(ho_f, ho_g, 0.0, vec(1), vec(0), cfg, T);
  const Eigen::Index last = tr.rows() - 1;
  return std::hypot(tr.states(last, 0) - std::cos(T), tr.states(last, 1) + std::sin(T));
}

}  // namespace

TEST_CASE("Lobatto IIIA/IIIB tableau") {
  const auto t = lobatto_pair();
  CHECK(t.cA(0) == 0.0);
  CHECK(t.cA(1) == 1.0);
  CHECK(t.aA(0, 0) == 0.0);
  CHECK(t.aA(0, 1) == 0.0);
  CHECK(t.aA(1, 0) == 0.5);
  CHECK(t.aA(1, 1) == 0.5);
  CHECK(t.bA(0) == 0.5);
  CHECK(t.bA(1) == 0.5);
  CHECK(t.aB(0, 0) == 0.5);
  CHECK(t.aB(0, 1) == 0.0);
  CHECK(t.aB(1, 0) == 0.5);
  CHECK(t.aB(1, 1) == 0.0);
  CHECK(t.bB.sum() == 1.0);
  CHECK(t.bA == t.bB);
  CHECK(t.cB == t.cA);
  const auto tl = lobatto_pair<long double>();
  CHECK(tl.aB(1, 0) == 0.5L);
}

TEST_CASE("single steps") {
  IntegratorConfig cfg;
  cfg.dt = 0.5;
  auto zero = [](double, const VectorXd&, const VectorXd& p) { return VectorXd(VectorXd::Zero(p.size())); };
  auto [q, p] = step(ho_f, zero, 0.0, vec(0), vec(1), cfg);
  CHECK(q(0) == 0.5);
  CHECK(p(0) == 1.0);

  // Constant force: the scheme reproduces the parabola exactly.
  auto force = [](double, const VectorXd&, const VectorXd&) { return vec(-2.0); };
  auto [q2, p2] = step(ho_f, force, 0.0, vec(1), vec(3), cfg);
  CHECK(q2(0) == doctest::Approx(1 + 3 * 0.5 - 0.25).epsilon(1e-15));
  CHECK(p2(0) == doctest::Approx(3 - 1.0).epsilon(1e-15));
}

TEST_CASE("harmonic oscillator") {
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  const double T = 628 * 0.01;  // integer step count close to one period
  const Trajectory tr = integrate(ho_f, ho_g, 0.0, vec(1), vec(0), cfg, T);
  double drift = 0;
  for (Eigen::Index k = 0; k < tr.rows(); ++k)
    drift = std::max(drift, std::abs(0.5 * (tr.states(k, 0) * tr.states(k, 0) + tr.states(k, 1) * tr.states(k, 1)) - 0.5));
  CHECK(drift <= 1e-4);
  CHECK(tr.labels == std::vector<std::string>{"q1", "p1"});

  SUBCASE("analytic solution at dt = 1e-3") {
    IntegratorConfig c;
    c.dt = kTwoPi / 6283;
    const Trajectory t = integrate(ho_f, ho_g, 0.0, vec(0), vec(1), c, kTwoPi);
    double err = 0;
    for (Eigen::Index k = 0; k < t.rows(); ++k) err = std::max(err, std::abs(t.states(k, 0) - std::sin(t.times[k])));
    CHECK(err <= 1e-5);
  }

  SUBCASE("second-order convergence") {
    const double T = kTwoPi;
    for (int n : {200, 400, 800}) {
      const double e1 = ho_end_error(T / n, T), e2 = ho_end_error(T / (2 * n), T);
      CAPTURE(n);
      CHECK(e1 / e2 >= 3.6);
      CHECK(e1 / e2 <= 4.4);
      CHECK(std::log2(e1 / e2) >= 1.8);
      CHECK(std::log2(e1 / e2) <= 2.2);
    }
  }
}

TEST_CASE("non-autonomous quadrature is exact") {
  IntegratorConfig cfg;
  cfg.dt = 0.125;
  auto f = [](double t, const VectorXd&, const VectorXd&) { return vec(t); };
  auto g = [](double, const VectorXd&, const VectorXd&) { return vec(0); };
  const Trajectory tr = integrate(f, g, 0.0, vec(0), vec(0), cfg, 3.0);
  CHECK(tr.states(tr.rows() - 1, 0) == doctest::Approx(4.5).epsilon(1e-15));
  for (Eigen::Index k = 0; k < tr.rows(); ++k)
    CHECK(tr.states(k, 0) == doctest::Approx(0.5 * tr.times[k] * tr.times[k]).epsilon(1e-14));
}

TEST_CASE("time reversibility and determinism") {
  // Pendulum: separable, autonomous, nonlinear.
  auto f = [](double, const VectorXd&, const VectorXd& p) { return VectorXd(p); };
  auto g = [](double, const VectorXd& q, const VectorXd&) { return VectorXd(-q.array().sin()); };
  IntegratorConfig cfg;
  PartitionedStepper s(combine_rhs(f, g), 1, 1, cfg);
  VectorXd q = vec(1.3), p = vec(-0.4);
  for (int k = 0; k < 50; ++k) s.step(0.0, 0.05, q, p);
  for (int k = 0; k < 50; ++k) s.step(0.0, -0.05, q, p);
  CHECK(std::abs(q(0) - 1.3) <= 10 * cfg.fp_tol);
  CHECK(std::abs(p(0) + 0.4) <= 10 * cfg.fp_tol);

  cfg.dt = 0.01;
  cfg.output_stride = 10;
  const Trajectory a = integrate(f, g, 0.0, vec(1.3), vec(-0.4), cfg, 5.0);
  const Trajectory b = integrate(f, g, 0.0, vec(1.3), vec(-0.4), cfg, 5.0);
  CHECK(a.states == b.states);
  CHECK(a.times == b.times);
}

TEST_CASE("trajectory grid") {
  IntegratorConfig cfg;
  cfg.dt = 0.1;
  const Trajectory one = integrate(ho_f, ho_g, 2.0, vec(1), vec(0), cfg, 2.0);
  CHECK(one.rows() == 1);
  CHECK(one.times.front() == 2.0);

  cfg.output_stride = 5;
  const Trajectory tr = integrate(ho_f, ho_g, 0.0, vec(1), vec(0), cfg, 2.0, {"x", "v"});
  CHECK(tr.rows() == 5);
  CHECK(tr.times.back() == doctest::Approx(2.0));
  for (std::size_t k = 1; k < tr.times.size(); ++k) CHECK(tr.times[k] - tr.times[k - 1] == doctest::Approx(0.5));
  CHECK(tr.column("v") == 1);
  CHECK(tr.has("x"));
  CHECK_THROWS_AS(tr.column("z"), Error);

  cfg.output_stride = 3;
  try {
    integrate(ho_f, ho_g, 0.0, vec(1), vec(0), cfg, 2.0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
  cfg.output_stride = 1;
  CHECK_THROWS_AS(integrate(ho_f, ho_g, 0.0, vec(1), vec(0), cfg, 0.25), Error);
  CHECK_THROWS_AS(integrate(ho_f, ho_g, 0.0, vec(1), vec(0), cfg, 1.0, {"only-one"}), Error);
}

TEST_CASE("fixed-point failures") {
  IntegratorConfig cfg;
  cfg.dt = 0.1;
  cfg.fp_max_iters = 1;
  try {
    step(ho_f, ho_g, 0.0, vec(1), vec(0), cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FixedPointDivergence);
  }

  cfg.fp_max_iters = 100;
  auto nan_force = [](double, const VectorXd&, const VectorXd&) {
    return vec(std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(step(ho_f, nan_force, 0.0, vec(1), vec(0), cfg), Error);

  // Strong damping makes the implicit momentum stage non-contractive (h/2 * 1e4 > 1).
  auto damped = [](double, const VectorXd&, const VectorXd& p) { return VectorXd(-1e4 * p); };
  try {
    step(ho_f, damped, 0.0, vec(1), vec(1), cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FixedPointDivergence);
  }

  cfg.fp_tol = 0;
  CHECK_THROWS_AS(step(ho_f, ho_g, 0.0, vec(1), vec(0), cfg), Error);
}
