#pragma once

#include <Eigen/Core>

namespace fastslow {

// How much of a jet to compute. Lower orders leave the higher parts untouched.
enum class JetOrder { Value = 0, Gradient = 1, Hessian = 2 };

// Second-order truncated Taylor jet: value, gradient and symmetric Hessian.
template <typename Scalar>
struct Jet2 {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Scalar value{0};
  Vector gradient;
  Matrix hessian;

  Jet2() = default;
  explicit Jet2(Eigen::Index n) : gradient(Vector::Zero(n)), hessian(Matrix::Zero(n, n)) {}

  static Jet2 constant(Eigen::Index n, Scalar c) {
    Jet2 j(n);
    j.value = c;
    return j;
  }

  static Jet2 variable(Eigen::Index n, Eigen::Index index, Scalar x) {
    Jet2 j(n);
    j.value = x;
    j.gradient(index) = Scalar(1);
    return j;
  }

  Eigen::Index dim() const { return gradient.size(); }
};

using Jet2d = Jet2<double>;

// In-place kernels. `out` must not alias an input.

template <typename Scalar>
void jet_add(const Jet2<Scalar>& a, const Jet2<Scalar>& b, Jet2<Scalar>& out, JetOrder order) {
  out.value = a.value + b.value;
  if (order >= JetOrder::Gradient) out.gradient = a.gradient + b.gradient;
  if (order >= JetOrder::Hessian) out.hessian = a.hessian + b.hessian;
}

template <typename Scalar>
void jet_sub(const Jet2<Scalar>& a, const Jet2<Scalar>& b, Jet2<Scalar>& out, JetOrder order) {
  out.value = a.value - b.value;
  if (order >= JetOrder::Gradient) out.gradient = a.gradient - b.gradient;
  if (order >= JetOrder::Hessian) out.hessian = a.hessian - b.hessian;
}

template <typename Scalar>
void jet_mul(const Jet2<Scalar>& a, const Jet2<Scalar>& b, Jet2<Scalar>& out, JetOrder order) {
  out.value = a.value * b.value;
  if (order >= JetOrder::Gradient) out.gradient = a.value * b.gradient + b.value * a.gradient;
  if (order >= JetOrder::Hessian) {
    out.hessian = a.value * b.hessian + b.value * a.hessian;
    out.hessian.noalias() += a.gradient * b.gradient.transpose();
    out.hessian.noalias() += b.gradient * a.gradient.transpose();
  }
}

// q = a/b, derived from q*b = a so the Hessian stays exactly symmetric.
template <typename Scalar>
void jet_div(const Jet2<Scalar>& a, const Jet2<Scalar>& b, Jet2<Scalar>& out, JetOrder order) {
  const Scalar inv = Scalar(1) / b.value;
  out.value = a.value * inv;
  if (order >= JetOrder::Gradient) out.gradient = (a.gradient - out.value * b.gradient) * inv;
  if (order >= JetOrder::Hessian) {
    out.hessian = a.hessian - out.value * b.hessian;
    out.hessian.noalias() -= out.gradient * b.gradient.transpose();
    out.hessian.noalias() -= b.gradient * out.gradient.transpose();
    out.hessian *= inv;
  }
}

// Chain rule for a scalar function with derivatives f1, f2 at a.value.
template <typename Scalar>
void jet_compose(const Jet2<Scalar>& a, Scalar f0, Scalar f1, Scalar f2, Jet2<Scalar>& out,
                 JetOrder order) {
  out.value = f0;
  if (order >= JetOrder::Gradient) out.gradient = f1 * a.gradient;
  if (order >= JetOrder::Hessian) {
    out.hessian = f1 * a.hessian;
    out.hessian.noalias() += f2 * (a.gradient * a.gradient.transpose());
  }
}

// Value-returning forms for everyday use outside hot loops.

template <typename Scalar>
Jet2<Scalar> operator+(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  Jet2<Scalar> out(a.dim());
  jet_add(a, b, out, JetOrder::Hessian);
  return out;
}

template <typename Scalar>
Jet2<Scalar> operator-(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  Jet2<Scalar> out(a.dim());
  jet_sub(a, b, out, JetOrder::Hessian);
  return out;
}

template <typename Scalar>
Jet2<Scalar> operator*(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  Jet2<Scalar> out(a.dim());
  jet_mul(a, b, out, JetOrder::Hessian);
  return out;
}

template <typename Scalar>
Jet2<Scalar> operator/(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  Jet2<Scalar> out(a.dim());
  jet_div(a, b, out, JetOrder::Hessian);
  return out;
}

template <typename Scalar>
Jet2<Scalar> log(const Jet2<Scalar>& a) {
  using std::log;
  Jet2<Scalar> out(a.dim());
  const Scalar inv = Scalar(1) / a.value;
  jet_compose(a, log(a.value), inv, -inv * inv, out, JetOrder::Hessian);
  return out;
}

}  // namespace fastslow
