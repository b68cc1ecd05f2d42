#include "fastslow/expr.hpp"

#include <cctype>
#include <charconv>
#include <functional>

namespace fastslow {

ExprPtr make_constant(double c) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::Constant;
  node->constant = c;
  return node;
}

ExprPtr make_variable(int zero_based_index) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::Variable;
  node->index = zero_based_index;
  return node;
}

ExprPtr make_unary(NodeKind kind, ExprPtr a) {
  auto node = std::make_shared<ExprNode>();
  node->kind = kind;
  node->children = {std::move(a)};
  return node;
}

ExprPtr make_binary(NodeKind kind, ExprPtr a, ExprPtr b) {
  auto node = std::make_shared<ExprNode>();
  node->kind = kind;
  node->children = {std::move(a), std::move(b)};
  return node;
}

ExprPtr make_power(ExprPtr base, int exponent) {
  auto node = std::make_shared<ExprNode>();
  node->kind = NodeKind::Power;
  node->index = exponent;
  node->children = {std::move(base)};
  return node;
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int n) : s_(text), n_(n) {}

  ExprPtr parse() {
    ExprPtr e = expression();
    skip_space();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::MalformedExpression,
                what + " at offset " + std::to_string(pos_) + " in \"" + std::string(s_) + "\"");
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  ExprPtr expression() {
    ExprPtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make_binary(NodeKind::Sum, lhs, term());
      else if (accept('-')) lhs = make_binary(NodeKind::Difference, lhs, term());
      else return lhs;
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make_binary(NodeKind::Product, lhs, unary());
      else if (accept('/')) lhs = make_binary(NodeKind::Quotient, lhs, unary());
      else return lhs;
    }
  }

  ExprPtr unary() {
    if (accept('-')) return make_binary(NodeKind::Difference, make_constant(0.0), unary());
    if (accept('+')) return unary();
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (!accept('^')) return base;
    return make_power(base, integer_exponent());
  }

  int integer_exponent() {
    const bool paren = accept('(');
    bool negative = false;
    if (accept('-')) negative = true;
    else accept('+');
    skip_space();
    const double v = number();
    if (paren) expect(')');
    if (v != std::floor(v) || v > 64) fail("exponent must be an integer literal");
    const int k = static_cast<int>(v);
    return negative ? -k : k;
  }

  double number() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    if (pos_ == start) fail("expected a number");
    double v = 0.0;
    const auto* first = s_.data() + start;
    const auto* last = s_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      pos_ = start;
      fail("malformed decimal literal");
    }
    return v;
  }

  ExprPtr primary() {
    skip_space();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = expression();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return make_constant(number());
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view word = s_.substr(start, pos_ - start);
      if (word.size() >= 2 && word[0] == 'y') {
        int j = 0;
        auto [ptr, ec] = std::from_chars(word.data() + 1, word.data() + word.size(), j);
        if (ec != std::errc() || ptr != word.data() + word.size() || j < 1) {
          pos_ = start;
          fail("bad variable name '" + std::string(word) + "'");
        }
        if (j > n_) {
          pos_ = start;
          fail("variable y" + std::to_string(j) + " exceeds slow dimension " + std::to_string(n_));
        }
        return make_variable(j - 1);
      }
      NodeKind kind;
      if (word == "sin") kind = NodeKind::Sin;
      else if (word == "cos") kind = NodeKind::Cos;
      else if (word == "exp") kind = NodeKind::Exp;
      else if (word == "log") kind = NodeKind::Log;
      else {
        pos_ = start;
        fail("unknown identifier '" + std::string(word) + "'");
      }
      expect('(');
      ExprPtr arg = expression();
      expect(')');
      return make_unary(kind, arg);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view s_;
  int n_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ExprPtr parse_expression(std::string_view text, int n) { return Parser(text, n).parse(); }

std::string to_sexpr(const ExprNode& node) {
  auto child = [&](std::size_t i) { return to_sexpr(*node.children.at(i)); };
  switch (node.kind) {
    case NodeKind::Constant: return "(const " + format_number(node.constant) + ")";
    case NodeKind::Variable: return "(var " + std::to_string(node.index + 1) + ")";
    case NodeKind::Sum: return "(sum " + child(0) + " " + child(1) + ")";
    case NodeKind::Difference: return "(diff " + child(0) + " " + child(1) + ")";
    case NodeKind::Product: return "(prod " + child(0) + " " + child(1) + ")";
    case NodeKind::Quotient: return "(quot " + child(0) + " " + child(1) + ")";
    case NodeKind::Power: return "(pow " + child(0) + " " + std::to_string(node.index) + ")";
    case NodeKind::Sin: return "(sin " + child(0) + ")";
    case NodeKind::Cos: return "(cos " + child(0) + ")";
    case NodeKind::Exp: return "(exp " + child(0) + ")";
    case NodeKind::Log: return "(log " + child(0) + ")";
  }
  return "?";
}

int max_variable_index(const ExprNode& node) {
  int m = node.kind == NodeKind::Variable ? node.index + 1 : 0;
  for (const auto& c : node.children) m = std::max(m, max_variable_index(*c));
  return m;
}

Tape::Tape(const ExprNode& root, int n) : n_(n) {
  if (max_variable_index(root) > n)
    throw Error(ErrorKind::DimensionMismatch, "expression references a variable beyond y" + std::to_string(n));
  emit(root);
}

int Tape::emit(const ExprNode& node) {
  Instr ins{node.kind};
  switch (node.kind) {
    case NodeKind::Constant: ins.c = node.constant; break;
    case NodeKind::Variable: ins.k = node.index; break;
    case NodeKind::Power:
      ins.a = emit(*node.children.at(0));
      ins.k = node.index;
      break;
    case NodeKind::Sin:
    case NodeKind::Cos:
    case NodeKind::Exp:
    case NodeKind::Log: ins.a = emit(*node.children.at(0)); break;
    default:
      ins.a = emit(*node.children.at(0));
      ins.b = emit(*node.children.at(1));
      break;
  }
  code_.push_back(ins);
  return static_cast<int>(code_.size()) - 1;
}

}  // namespace fastslow
