#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fastslow/errors.hpp"
#include "fastslow/jet.hpp"

namespace fastslow {

enum class NodeKind { Constant, Variable, Sum, Difference, Product, Quotient, Power, Sin, Cos, Exp, Log };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

// Immutable expression tree over the slow variables y1..yn.
struct ExprNode {
  NodeKind kind = NodeKind::Constant;
  double constant = 0.0;  // Constant only
  int index = 0;          // Variable: zero-based slot; Power: integer exponent
  std::vector<ExprPtr> children;
};

ExprPtr make_constant(double c);
ExprPtr make_variable(int zero_based_index);
ExprPtr make_unary(NodeKind kind, ExprPtr a);
ExprPtr make_binary(NodeKind kind, ExprPtr a, ExprPtr b);
ExprPtr make_power(ExprPtr base, int exponent);

// Grammar: + - * / ^(integer), unary minus, sin cos exp log, y1..yn, decimal literals.
// `n` bounds the admissible variable indices.
ExprPtr parse_expression(std::string_view text, int n);

// S-expression rendering, e.g. "(sum (const 2) (sin (var 1)))".
std::string to_sexpr(const ExprNode& node);

// Largest one-based variable index referenced (0 if none).
int max_variable_index(const ExprNode& node);

// Post-order instruction list compiled from an ExprNode, evaluated into jets
// without allocating once a workspace has been sized.
class Tape {
 public:
  struct Instr {
    NodeKind op;
    int a = -1;
    int b = -1;
    int k = 0;
    double c = 0.0;
  };

  Tape() = default;
  Tape(const ExprNode& root, int n);

  int dim() const { return n_; }
  std::size_t size() const { return code_.size(); }

  template <typename Scalar>
  using Workspace = std::vector<Jet2<Scalar>>;

  template <typename Scalar>
  void prepare(Workspace<Scalar>& work) const {
    if (work.size() < code_.size()) work.resize(code_.size(), Jet2<Scalar>(n_));
  }

  // Evaluates into `out`; `work` must have been prepared for this tape (or a larger one).
  template <typename Scalar, typename Derived>
  void evaluate(const Eigen::MatrixBase<Derived>& y, JetOrder order, Workspace<Scalar>& work,
                Jet2<Scalar>& out) const;

 private:
  int emit(const ExprNode& node);

  template <typename Scalar, typename Derived>
  [[noreturn]] static void domain_failure(const char* what, const Eigen::MatrixBase<Derived>& y);

  int n_ = 0;
  std::vector<Instr> code_;
};

template <typename Scalar, typename Derived>
void Tape::domain_failure(const char* what, const Eigen::MatrixBase<Derived>& y) {
  std::ostringstream msg;
  msg << what << " at y = (";
  for (Eigen::Index i = 0; i < y.size(); ++i) msg << (i ? ", " : "") << y(i);
  msg << ")";
  throw Error(ErrorKind::DomainError, msg.str());
}

template <typename Scalar, typename Derived>
void Tape::evaluate(const Eigen::MatrixBase<Derived>& y, JetOrder order, Workspace<Scalar>& work,
                    Jet2<Scalar>& out) const {
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  if (y.size() != n_) throw Error(ErrorKind::DimensionMismatch, "expression evaluated at wrong dimension");
  const bool grad = order >= JetOrder::Gradient;
  const bool hess = order >= JetOrder::Hessian;
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    Jet2<Scalar>& r = work[i];
    switch (ins.op) {
      case NodeKind::Constant:
        r.value = Scalar(ins.c);
        if (grad) r.gradient.setZero();
        if (hess) r.hessian.setZero();
        break;
      case NodeKind::Variable:
        r.value = Scalar(y(ins.k));
        if (grad) {
          r.gradient.setZero();
          r.gradient(ins.k) = Scalar(1);
        }
        if (hess) r.hessian.setZero();
        break;
      case NodeKind::Sum: jet_add(work[ins.a], work[ins.b], r, order); break;
      case NodeKind::Difference: jet_sub(work[ins.a], work[ins.b], r, order); break;
      case NodeKind::Product: jet_mul(work[ins.a], work[ins.b], r, order); break;
      case NodeKind::Quotient:
        if (work[ins.b].value == Scalar(0)) domain_failure<Scalar>("division by zero", y);
        jet_div(work[ins.a], work[ins.b], r, order);
        break;
      case NodeKind::Power: {
        const Scalar u = work[ins.a].value;
        const int k = ins.k;
        if (k < 0 && u == Scalar(0)) domain_failure<Scalar>("negative power of zero", y);
        Scalar f0, f1, f2;
        if (k == 0) {
          f0 = Scalar(1), f1 = Scalar(0), f2 = Scalar(0);
        } else if (k == 1) {
          f0 = u, f1 = Scalar(1), f2 = Scalar(0);
        } else if (k == 2) {
          f0 = u * u, f1 = Scalar(2) * u, f2 = Scalar(2);
        } else {
          const Scalar um2 = pow(u, k - 2);
          f2 = Scalar(k) * Scalar(k - 1) * um2;
          f1 = Scalar(k) * um2 * u;
          f0 = um2 * u * u;
        }
        jet_compose(work[ins.a], f0, f1, f2, r, order);
        break;
      }
      case NodeKind::Sin: {
        const Scalar u = work[ins.a].value, s = sin(u);
        jet_compose(work[ins.a], s, cos(u), -s, r, order);
        break;
      }
      case NodeKind::Cos: {
        const Scalar u = work[ins.a].value, c = cos(u);
        jet_compose(work[ins.a], c, -sin(u), -c, r, order);
        break;
      }
      case NodeKind::Exp: {
        const Scalar e = exp(work[ins.a].value);
        jet_compose(work[ins.a], e, e, e, r, order);
        break;
      }
      case NodeKind::Log: {
        const Scalar u = work[ins.a].value;
        if (!(u > Scalar(0))) domain_failure<Scalar>("log of non-positive argument", y);
        const Scalar inv = Scalar(1) / u;
        jet_compose(work[ins.a], log(u), inv, -inv * inv, r, order);
        break;
      }
    }
  }
  const Jet2<Scalar>& top = work[code_.size() - 1];
  out.value = top.value;
  if (grad) out.gradient = top.gradient;
  if (hess) out.hessian = top.hessian;
}

}  // namespace fastslow
