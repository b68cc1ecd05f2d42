#include "fastslow/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fastslow {

namespace {

std::string format_point(const Eigen::Ref<const VectorXd>& y) {
  std::ostringstream s;
  s << "(";
  for (Eigen::Index i = 0; i < y.size(); ++i) s << (i ? ", " : "") << y(i);
  s << ")";
  return s.str();
}

void check_floor(const ModelSpec& model, int l, double value, const Eigen::Ref<const VectorXd>& y) {
  if (!(value >= model.omega_floor())) {
    std::ostringstream msg;
    msg << "omega_" << l + 1 << " = " << value << " below floor " << model.omega_floor() << " at y = "
        << format_point(y);
    throw Error(ErrorKind::FrequencyNotPositive, msg.str());
  }
}

void log_of(const Jet2d& w, Jet2d& out) {
  const double inv = 1.0 / w.value;
  jet_compose(w, std::log(w.value), inv, -inv * inv, out, JetOrder::Hessian);
}

}  // namespace

ModelSpec::ModelSpec(std::string name, int n, int r, ExprPtr V, std::vector<ExprPtr> omega, VectorXd y_star,
                     VectorXd p_star, VectorXd u_star, double T, double omega_floor)
    : name_(std::move(name)),
      n_(n),
      r_(r),
      V_(std::move(V)),
      omega_(std::move(omega)),
      y_star_(std::move(y_star)),
      p_star_(std::move(p_star)),
      u_star_(std::move(u_star)),
      T_(T),
      omega_floor_(omega_floor) {
  if (n_ < 1 || r_ < 1) throw Error(ErrorKind::DimensionMismatch, "n and r must be at least 1");
  if (!V_) throw Error(ErrorKind::MalformedExpression, "missing potential V");
  if (static_cast<int>(omega_.size()) != r_)
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(r_) + " frequencies, got " +
                                                  std::to_string(omega_.size()));
  if (y_star_.size() != n_) throw Error(ErrorKind::DimensionMismatch, "|y_star| != n");
  if (p_star_.size() != n_) throw Error(ErrorKind::DimensionMismatch, "|p_star| != n");
  if (u_star_.size() != r_) throw Error(ErrorKind::DimensionMismatch, "|u_star| != r");
  if (!(omega_floor_ > 0)) throw Error(ErrorKind::InvalidArgument, "omega_floor must be positive");
  if (!(T_ > 0)) throw Error(ErrorKind::InvalidArgument, "horizon T must be positive");
  v_tape_ = Tape(*V_, n_);
  for (const auto& w : omega_) {
    if (!w) throw Error(ErrorKind::MalformedExpression, "missing frequency expression");
    omega_tapes_.emplace_back(*w, n_);
  }
  Tape::Workspace<double> work;
  Jet2d j(n_);
  for (int l = 0; l < r_; ++l) {
    omega_tapes_[l].prepare(work);
    omega_tapes_[l].evaluate(y_star_, JetOrder::Value, work, j);
    if (!(j.value >= omega_floor_)) {
      std::ostringstream msg;
      msg << "omega_" << l + 1 << "(y*) = " << j.value << " is not above the floor " << omega_floor_;
      throw Error(ErrorKind::NonPositiveFrequencyAtStart, msg.str());
    }
  }
}

ModelSpec ModelSpec::with_u_star(const VectorXd& u) const {
  return ModelSpec(name_, n_, r_, V_, omega_, y_star_, p_star_, u, T_, omega_floor_);
}

namespace {

VectorXd read_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::InvalidArgument, std::string("config is missing '") + key + "'");
  const auto& a = j.at(key);
  if (!a.is_array()) throw Error(ErrorKind::InvalidArgument, std::string("'") + key + "' must be an array");
  VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

template <typename T>
T read_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::InvalidArgument, std::string("config is missing '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace

ModelSpec parse_model(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    const int n = read_field<int>(j, "n");
    const int r = read_field<int>(j, "r");
    if (n < 1 || r < 1) throw Error(ErrorKind::DimensionMismatch, "n and r must be at least 1");
    ExprPtr V = parse_expression(read_field<std::string>(j, "V"), n);
    std::vector<ExprPtr> omega;
    for (const auto& w : read_field<std::vector<std::string>>(j, "omega")) omega.push_back(parse_expression(w, n));
    const double floor = j.contains("omega_floor") ? j.at("omega_floor").get<double>() : 1e-6;
    const std::string name = j.contains("name") ? j.at("name").get<std::string>() : std::string("unnamed");
    return ModelSpec(name, n, r, V, omega, read_vector(j, "y_star"), read_vector(j, "p_star"),
                     read_vector(j, "u_star"), read_field<double>(j, "T"), floor);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad config field: ") + e.what());
  }
}

ModelSpec load_model(const std::string& source) {
  if (source == "builtin:test") return test_model();
  if (source == "builtin:constant") return constant_omega_model();
  std::ifstream in(source);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open model config '" + source + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

namespace {

ExprPtr test_potential() {
  // (y1^4)/2 + (y2^4)/2
  auto half = make_constant(0.5);
  auto t1 = make_binary(NodeKind::Product, half, make_power(make_variable(0), 4));
  auto t2 = make_binary(NodeKind::Product, half, make_power(make_variable(1), 4));
  return make_binary(NodeKind::Sum, t1, t2);
}

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

ModelSpec test_model() {
  auto y1y2 = make_binary(NodeKind::Product, make_variable(0), make_variable(1));
  auto w1 = make_binary(NodeKind::Sum, make_constant(4.0), make_power(y1y2, 2));
  auto w2 = make_binary(NodeKind::Sum, make_constant(2.0), make_unary(NodeKind::Sin, make_variable(0)));
  return ModelSpec("test", 2, 2, test_potential(), {w1, w2}, vec2(1.0, -0.5), vec2(1.0, 1.2), vec2(3.0, 2.0), 1.0);
}

ModelSpec constant_omega_model() {
  return ModelSpec("constant", 2, 2, test_potential(), {make_constant(4.0), make_constant(2.0)}, vec2(1.0, -0.5),
                   vec2(1.0, 1.2), vec2(3.0, 2.0), 1.0);
}

Jet2d v_jet(const ModelSpec& model, const VectorXd& y) {
  if (y.size() != model.n()) throw Error(ErrorKind::DimensionMismatch, "|y| != n");
  Tape::Workspace<double> work;
  model.v_tape().prepare(work);
  Jet2d out(model.n());
  model.v_tape().evaluate(y, JetOrder::Hessian, work, out);
  return out;
}

Jet2d omega_jet(const ModelSpec& model, int l, const VectorXd& y) {
  if (l < 0 || l >= model.r()) throw Error(ErrorKind::DimensionMismatch, "fast channel index out of range");
  if (y.size() != model.n()) throw Error(ErrorKind::DimensionMismatch, "|y| != n");
  Tape::Workspace<double> work;
  model.omega_tape(l).prepare(work);
  Jet2d out(model.n());
  model.omega_tape(l).evaluate(y, JetOrder::Hessian, work, out);
  check_floor(model, l, out.value, y);
  return out;
}

Jet2d log_omega_jet(const ModelSpec& model, int l, const VectorXd& y) {
  const Jet2d w = omega_jet(model, l, y);
  Jet2d out(model.n());
  log_of(w, out);
  return out;
}

VectorXd theta_star(const ModelSpec& model) {
  VectorXd th(model.r());
  for (int l = 0; l < model.r(); ++l) {
    const double u = model.u_star()(l);
    th(l) = u * u / (2.0 * omega_jet(model, l, model.y_star()).value);
  }
  return th;
}

VectorXd SlowJets::omega_values() const {
  VectorXd w(static_cast<Eigen::Index>(omega.size()));
  for (std::size_t l = 0; l < omega.size(); ++l) w(static_cast<Eigen::Index>(l)) = omega[l].value;
  return w;
}

ModelEvaluator::ModelEvaluator(const ModelSpec& model) : model_(&model) {
  const int n = model.n();
  model.v_tape().prepare(work_);
  for (int l = 0; l < model.r(); ++l) model.omega_tape(l).prepare(work_);
  jets_.V = Jet2d(n);
  jets_.omega.assign(model.r(), Jet2d(n));
  jets_.L.assign(model.r(), Jet2d(n));
}

const SlowJets& ModelEvaluator::evaluate(const Eigen::Ref<const VectorXd>& y, JetOrder v_order,
                                         JetOrder omega_order) {
  model_->v_tape().evaluate(y, v_order, work_, jets_.V);
  for (int l = 0; l < model_->r(); ++l) {
    Jet2d& w = jets_.omega[l];
    model_->omega_tape(l).evaluate(y, omega_order, work_, w);
    check_floor(*model_, l, w.value, y);
    const double inv = 1.0 / w.value;
    jet_compose(w, std::log(w.value), inv, -inv * inv, jets_.L[l], omega_order);
  }
  return jets_;
}

}  // namespace fastslow
