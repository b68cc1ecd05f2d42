#include <cmath>
#include <thread>
#include <vector>

#include "doctest.h"

#include "fastslow/model.hpp"
#include "test_util.hpp"

using namespace fastslow;
using Eigen::VectorXd;

namespace {

Jet2d eval(const std::string& text, const VectorXd& y, JetOrder order = JetOrder::Hessian) {
  const ExprPtr e = parse_expression(text, static_cast<int>(y.size()));
  const Tape tape(*e, static_cast<int>(y.size()));
  Tape::Workspace<double> work;
  tape.prepare(work);
  Jet2d out(y.size());
  tape.evaluate(y, order, work, out);
  return out;
}

double value_of(const std::string& text, const VectorXd& y) { return eval(text, y, JetOrder::Value).value; }

const char* kConfig = R"cfg({
  "name": "cfg", "n": 2, "r": 2,
  "V": "0.5*y1^4 + 0.5*y2^4",
  "omega": ["4 + (y1*y2)^2", "2 + sin(y1)"],
  "y_star": [1, -0.5], "p_star": [1, 1.2], "u_star": [3, 2], "T": 1
})cfg";

}  // namespace

TEST_CASE("expression parsing") {
  CHECK(to_sexpr(*parse_expression("2 + sin(y1)", 2)) == "(sum (const 2) (sin (var 1)))");
  CHECK(to_sexpr(*parse_expression("y1*y2^3", 2)) == "(prod (var 1) (pow (var 2) 3))");
  CHECK(to_sexpr(*parse_expression("-y1", 1)) == "(diff (const 0) (var 1))");
  CHECK(to_sexpr(*parse_expression("y1 - y2 - y1", 2)) == "(diff (diff (var 1) (var 2)) (var 1))");
  CHECK(to_sexpr(*parse_expression("exp(y1)/log(y2)", 2)) == "(quot (exp (var 1)) (log (var 2)))");
  CHECK(max_variable_index(*parse_expression("y1 + 3*y3", 3)) == 3);
  CHECK(max_variable_index(*parse_expression("2.5", 3)) == 0);

  SUBCASE("precedence and associativity") {
    const VectorXd y = VectorXd::Constant(2, 2.0);
    CHECK(value_of("1 + 2*3", y) == doctest::Approx(7));
    CHECK(value_of("-y1^2", y) == doctest::Approx(-4));
    CHECK(value_of("8/2/2", y) == doctest::Approx(2));
    CHECK(value_of("y1^(-2)", y) == doctest::Approx(0.25));
    CHECK(value_of("1.5e1 + .5", y) == doctest::Approx(15.5));
    CHECK(value_of("cos(0)*exp(0)", y) == doctest::Approx(1));
  }

  SUBCASE("malformed input") {
    for (const char* bad : {"", "y3", "y0", "x", "sin y1", "2 +", "(y1", "y1)", "y1^1.5", "y1^y2", "tan(y1)", "1..2",
                            "y1 y2", "y1^65", "2^3^1"}) {
      CAPTURE(bad);
      try {
        parse_expression(bad, 2);
        FAIL("accepted");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedExpression);
      }
    }
  }
}

TEST_CASE("jets agree with finite differences") {
  const std::vector<std::string> exprs = {"0.5*y1^4 + 0.5*y2^4", "4 + (y1*y2)^2", "2 + sin(y1)",
                                          "exp(y1*y2) - cos(y2)/(2 + y1^2)", "log(3 + y1^2 + y2^2)*y2",
                                          "y1^(-3) + (y1 - y2)^5", "sin(cos(y1 + y2))*exp(-y1)"};
  const std::vector<VectorXd> points = {(VectorXd(2) << 1, -0.5).finished(), (VectorXd(2) << 0.3, 0.7).finished(),
                                        (VectorXd(2) << -1.2, 2.1).finished(), (VectorXd(2) << 2.0, -1.5).finished()};
  for (const auto& ex : exprs) {
    for (const auto& y : points) {
      CAPTURE(ex);
      const Jet2d j = eval(ex, y);
      CHECK(j.value == doctest::Approx(value_of(ex, y)).epsilon(1e-15));
      const VectorXd g = testutil::fd_gradient([&](const VectorXd& x) { return value_of(ex, x); }, y);
      for (int i = 0; i < 2; ++i) CHECK(testutil::rel_err(j.gradient(i), g(i)) <= 1e-5);
      for (int i = 0; i < 2; ++i) {
        const VectorXd hi = testutil::fd_gradient([&](const VectorXd& x) { return eval(ex, x).gradient(i); }, y);
        for (int k = 0; k < 2; ++k) CHECK(testutil::rel_err(j.hessian(i, k), hi(k)) <= 1e-5);
      }
      // Exact symmetry, not approximate.
      CHECK(j.hessian(0, 1) == j.hessian(1, 0));
    }
  }
}

TEST_CASE("jet orders and arithmetic helpers") {
  const VectorXd y = (VectorXd(2) << 0.4, -1.1).finished();
  const Jet2d full = eval("sin(y1)*y2^2", y);
  const Jet2d grad = eval("sin(y1)*y2^2", y, JetOrder::Gradient);
  CHECK(grad.value == full.value);
  CHECK(grad.gradient == full.gradient);

  const Jet2d a = Jet2d::variable(2, 0, 0.4), b = Jet2d::variable(2, 1, -1.1);
  const Jet2d q = (a * b + Jet2d::constant(2, 3.0)) / b;
  const Jet2d ref = eval("(y1*y2 + 3)/y2", y);
  CHECK(q.value == doctest::Approx(ref.value));
  CHECK((q.gradient - ref.gradient).norm() < 1e-14);
  CHECK((q.hessian - ref.hessian).norm() < 1e-13);
  const Jet2d l = log(Jet2d::constant(2, 2.0) + a);
  CHECK(l.gradient(0) == doctest::Approx(1 / 2.4));
  CHECK(l.hessian(0, 0) == doctest::Approx(-1 / (2.4 * 2.4)));
}

TEST_CASE("evaluation domain errors") {
  const VectorXd zero = VectorXd::Zero(2);
  for (const char* ex : {"1/y1", "log(y1)", "log(y1 - 1)", "y1^(-1)"}) {
    CAPTURE(ex);
    try {
      eval(ex, zero);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DomainError);
    }
  }
  const Tape t2(*parse_expression("y1", 2), 2);
  Tape::Workspace<double> work;
  t2.prepare(work);
  Jet2d out(2);
  CHECK_THROWS_AS(t2.evaluate(VectorXd::Zero(3), JetOrder::Value, work, out), Error);
}

TEST_CASE("test model slow potential and frequencies") {
  const ModelSpec m = test_model();
  CHECK(m.n() == 2);
  CHECK(m.r() == 2);
  CHECK(m.y_star() == (VectorXd(2) << 1, -0.5).finished());
  CHECK(m.p_star() == (VectorXd(2) << 1, 1.2).finished());
  CHECK(m.u_star() == (VectorXd(2) << 3, 2).finished());
  CHECK(m.omega_floor() == 1e-6);
  CHECK(to_sexpr(m.omega(1)) == "(sum (const 2) (sin (var 1)))");

  const VectorXd ys = m.y_star();
  const Jet2d V = v_jet(m, ys);
  CHECK(V.value == doctest::Approx(0.53125).epsilon(1e-15));
  CHECK(V.gradient(0) == doctest::Approx(2.0));
  CHECK(V.gradient(1) == doctest::Approx(-0.25));
  CHECK(V.hessian(0, 0) == doctest::Approx(6.0));
  CHECK(V.hessian(0, 1) == 0.0);

  const Jet2d w1 = omega_jet(m, 0, ys);
  CHECK(w1.value == doctest::Approx(4.25));
  CHECK(w1.gradient(0) == doctest::Approx(0.5));
  CHECK(w1.gradient(1) == doctest::Approx(-1.0));

  const Jet2d w2 = omega_jet(m, 1, (VectorXd(2) << 0, 17).finished());
  CHECK(w2.value == doctest::Approx(2.0));
  CHECK(w2.gradient(0) == doctest::Approx(1.0));
  for (double a : {-2.0, 0.3, 5.0}) CHECK(omega_jet(m, 1, (VectorXd(2) << a, a * a).finished()).gradient(1) == 0.0);

  const Jet2d L1 = log_omega_jet(m, 0, ys);
  CHECK(L1.value == doctest::Approx(1.446918982936325).epsilon(1e-14));
  CHECK(L1.gradient(0) == doctest::Approx(0.1176470588235294));
  CHECK(L1.gradient(1) == doctest::Approx(-0.2352941176470588));
}

TEST_CASE("log-frequency jets") {
  const ModelSpec m = test_model();
  for (const VectorXd& y : {(VectorXd(2) << 1, -0.5).finished(), (VectorXd(2) << -0.7, 1.3).finished()}) {
    for (int l = 0; l < 2; ++l) {
      const Jet2d L = log_omega_jet(m, l, y), w = omega_jet(m, l, y);
      CHECK(testutil::rel_err(L.value, std::log(w.value)) <= 1e-14);
      CHECK((L.gradient - w.gradient / w.value).norm() < 1e-14);
      const Eigen::MatrixXd ref = w.hessian / w.value - w.gradient * w.gradient.transpose() / (w.value * w.value);
      CHECK((L.hessian - ref).norm() < 1e-13);
      for (int i = 0; i < 2; ++i) {
        const VectorXd fd =
            testutil::fd_gradient([&](const VectorXd& x) { return log_omega_jet(m, l, x).gradient(i); }, y);
        CHECK((L.hessian.row(i).transpose() - fd).norm() <= 1e-6);
      }
    }
  }
  const ModelSpec c = constant_omega_model();
  CHECK(log_omega_jet(c, 0, c.y_star()).gradient.norm() == 0.0);
  CHECK(omega_jet(c, 1, c.y_star()).value == 2.0);
}

TEST_CASE("theta star") {
  const ModelSpec m = test_model();
  const VectorXd ts = theta_star(m);
  CHECK(ts(0) == doctest::Approx(1.0588235294117647));
  CHECK(ts(1) == doctest::Approx(0.7038607857314489));
  CHECK(theta_star(m.with_u_star(VectorXd::Zero(2))).norm() == 0.0);
  const VectorXd t2 = theta_star(m.with_u_star(2 * m.u_star()));
  CHECK((t2 - 4 * ts).norm() < 1e-14);
}

TEST_CASE("model config parsing") {
  const ModelSpec m = parse_model(kConfig);
  const ModelSpec ref = test_model();
  CHECK(m.name() == "cfg");
  CHECK(m.T() == 1.0);
  CHECK(m.omega_floor() == 1e-6);
  const VectorXd y = (VectorXd(2) << 0.2, -1.7).finished();
  CHECK(v_jet(m, y).value == doctest::Approx(v_jet(ref, y).value));
  for (int l = 0; l < 2; ++l) CHECK(omega_jet(m, l, y).value == doctest::Approx(omega_jet(ref, l, y).value));

  auto kind_of = [](const std::string& text) {
    try {
      parse_model(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::NoPlateau;  // sentinel: no error
  };
  std::string s = kConfig;
  CHECK(kind_of(std::string(s).replace(s.find("[3, 2]"), 6, "[3, 2, 1]")) == ErrorKind::DimensionMismatch);
  CHECK(kind_of(std::string(s).replace(s.find("[1, -0.5]"), 9, "[1]")) == ErrorKind::DimensionMismatch);
  CHECK(kind_of(std::string(s).replace(s.find("2 + sin(y1)"), 11, "sin(y1) - 1")) ==
        ErrorKind::NonPositiveFrequencyAtStart);
  CHECK(kind_of(std::string(s).replace(s.find("2 + sin(y1)"), 11, "2 + sin(y3)")) == ErrorKind::MalformedExpression);
  CHECK(kind_of(std::string(s).replace(s.find("\"T\": 1"), 6, "\"T\": 0")) == ErrorKind::InvalidArgument);
  CHECK(kind_of("{\"n\": 2}") == ErrorKind::InvalidArgument);
  CHECK(kind_of("not json") == ErrorKind::InvalidArgument);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), Error);
  CHECK(load_model("builtin:test").name() == "test");
}

TEST_CASE("frequency floor along the trajectory") {
  const ModelSpec m = test_model();
  ModelEvaluator ev(m);
  // omega_2 = 2 + sin(y1) stays above 1; drive the floor check with a model whose frequency vanishes.
  CHECK_NOTHROW(ev.evaluate(m.y_star(), JetOrder::Gradient, JetOrder::Hessian));
  const ModelSpec z("dip", 1, 1, parse_expression("0", 1), {parse_expression("1 - y1", 1)},
                    VectorXd::Zero(1), VectorXd::Zero(1), VectorXd::Ones(1), 1.0);
  try {
    omega_jet(z, 0, VectorXd::Constant(1, 2.0));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FrequencyNotPositive);
  }
}

TEST_CASE("concurrent evaluation is pure") {
  const ModelSpec m = test_model();
  const VectorXd y = (VectorXd(2) << 0.8, -0.3).finished();
  const Jet2d ref = v_jet(m, y);
  std::vector<double> out(4);
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i)
    ts.emplace_back([&, i] {
      double acc = 0;
      for (int k = 0; k < 200; ++k) acc = v_jet(m, y).value + omega_jet(m, 0, y).value;
      out[i] = acc;
    });
  for (auto& t : ts) t.join();
  for (double v : out) CHECK(v == ref.value + omega_jet(m, 0, y).value);
}
