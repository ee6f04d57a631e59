#pragma once
/**
 * @file sysdsl.hpp
 * @brief Expression language for A(t) entries and f(t, x) components.
 *
 * Grammar (whitespace insignificant):
 *
 *     expr    := term (('+' | '-') term)*
 *     term    := unary (('*' | '/') unary)*
 *     unary   := ('-' | '+') unary | power
 *     power   := primary ('^' unary)?          // right associative
 *     primary := number | 't' | 'x'k | func '(' expr ')' | '(' expr ')'
 *     func    := sin | cos | exp | ln | sqrt | atan | tanh | abs
 *
 * Expressions are immutable trees. Construction folds constants and the
 * 0/1 identities; no other simplification is attempted.
 */

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topeq/errors.hpp"

namespace topeq::dsl {

enum class Op { Num, T, X, Neg, Sin, Cos, Exp, Ln, Sqrt, Atan, Tanh, Abs, Add, Sub, Mul, Div, Pow };

/// Differentiation variable: t or x_k (1-based).
struct Var {
  bool is_time = false;
  int index = 0;

  static Var t() { return {true, 0}; }
  static Var x(int k) { return {false, k}; }
  bool operator==(const Var&) const = default;
};

struct Env {
  double t = 0.0;
  std::span<const double> x;
};

class Expr {
 public:
  struct Node {
    Op op;
    double value = 0.0;  // Num
    int index = 0;       // X
    std::shared_ptr<const Node> a, b;
  };
  using NodePtr = std::shared_ptr<const Node>;

  Expr() : Expr(number(0.0)) {}

  static Expr number(double v, int dim = 0) { return Expr(make(Op::Num, v, 0, nullptr, nullptr), dim); }
  static Expr time(int dim = 0) { return Expr(make(Op::T, 0, 0, nullptr, nullptr), dim); }
  static Expr var(int k, int dim) { return Expr(make(Op::X, 0, k, nullptr, nullptr), dim); }

  static Expr unary(Op op, const Expr& e);
  static Expr binary(Op op, const Expr& l, const Expr& r);

  friend Expr operator+(const Expr& l, const Expr& r) { return binary(Op::Add, l, r); }
  friend Expr operator-(const Expr& l, const Expr& r) { return binary(Op::Sub, l, r); }
  friend Expr operator*(const Expr& l, const Expr& r) { return binary(Op::Mul, l, r); }
  friend Expr operator/(const Expr& l, const Expr& r) { return binary(Op::Div, l, r); }
  friend Expr operator-(const Expr& e) { return unary(Op::Neg, e); }
  friend Expr pow(const Expr& l, const Expr& r) { return binary(Op::Pow, l, r); }

  Op op() const { return node_->op; }
  /// Declared dimension n (variables x1..xn allowed).
  int dim() const { return dim_; }
  bool is_number() const { return node_->op == Op::Num; }
  double number_value() const { return node_->value; }
  const NodePtr& node() const { return node_; }

  bool depends_on(Var v) const { return depends(*node_, v); }

  double eval(const Env& env) const;
  Expr diff(Var v) const;
  std::string str() const { return print(*node_); }

 private:
  Expr(NodePtr n, int dim) : node_(std::move(n)), dim_(dim) {}

  static NodePtr make(Op op, double v, int idx, NodePtr a, NodePtr b) {
    return std::make_shared<const Node>(Node{op, v, idx, std::move(a), std::move(b)});
  }
  static Expr wrap(const NodePtr& n, int dim) { return Expr(n, dim); }

  static bool depends(const Node& n, Var v);
  static double eval_node(const Node& n, const Env& env);
  static Expr diff_node(const NodePtr& n, Var v, int dim);
  static int precedence(const Node& n);
  static std::string print(const Node& n);

  NodePtr node_;
  int dim_ = 0;
};

// ------------------------------------------------------------------ construction

namespace detail {

inline bool is_num(const Expr& e, double v) { return e.is_number() && e.number_value() == v; }

inline double apply_unary(Op op, double a) {
  switch (op) {
    case Op::Neg: return -a;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Exp: return std::exp(a);
    case Op::Ln: return std::log(a);
    case Op::Sqrt: return std::sqrt(a);
    case Op::Atan: return std::atan(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Abs: return std::abs(a);
    default: return std::nan("");
  }
}

inline double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return std::pow(a, b);
    default: return std::nan("");
  }
}

inline const char* func_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sqrt: return "sqrt";
    case Op::Atan: return "atan";
    case Op::Tanh: return "tanh";
    case Op::Abs: return "abs";
    default: return "?";
  }
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Expr Expr::unary(Op op, const Expr& e) {
  if (e.is_number()) {
    const double v = detail::apply_unary(op, e.number_value());
    if (std::isfinite(v)) return number(v, e.dim());
  }
  if (op == Op::Neg && e.op() == Op::Neg) return wrap(e.node()->a, e.dim());
  return Expr(make(op, 0, 0, e.node(), nullptr), e.dim());
}

inline Expr Expr::binary(Op op, const Expr& l, const Expr& r) {
  const int dim = std::max(l.dim(), r.dim());
  if (l.is_number() && r.is_number()) {
    const double v = detail::apply_binary(op, l.number_value(), r.number_value());
    if (std::isfinite(v)) return number(v, dim);
  }
  using detail::is_num;
  switch (op) {
    case Op::Add:
      if (is_num(l, 0)) return wrap(r.node(), dim);
      if (is_num(r, 0)) return wrap(l.node(), dim);
      break;
    case Op::Sub:
      if (is_num(r, 0)) return wrap(l.node(), dim);
      if (is_num(l, 0)) return unary(Op::Neg, wrap(r.node(), dim));
      break;
    case Op::Mul:
      if (is_num(l, 0) || is_num(r, 0)) return number(0.0, dim);
      if (is_num(l, 1)) return wrap(r.node(), dim);
      if (is_num(r, 1)) return wrap(l.node(), dim);
      break;
    case Op::Div:
      if (is_num(r, 1)) return wrap(l.node(), dim);
      break;
    case Op::Pow:
      if (is_num(r, 1)) return wrap(l.node(), dim);
      if (is_num(r, 0)) return number(1.0, dim);
      break;
    default:
      break;
  }
  return Expr(make(op, 0, 0, l.node(), r.node()), dim);
}

// ------------------------------------------------------------------ evaluation

inline bool Expr::depends(const Node& n, Var v) {
  switch (n.op) {
    case Op::Num: return false;
    case Op::T: return v.is_time;
    case Op::X: return !v.is_time && v.index == n.index;
    default:
      return (n.a && depends(*n.a, v)) || (n.b && depends(*n.b, v));
  }
}

inline double Expr::eval_node(const Node& n, const Env& env) {
  switch (n.op) {
    case Op::Num: return n.value;
    case Op::T: return env.t;
    case Op::X: return env.x[static_cast<std::size_t>(n.index - 1)];
    case Op::Add: return eval_node(*n.a, env) + eval_node(*n.b, env);
    case Op::Sub: return eval_node(*n.a, env) - eval_node(*n.b, env);
    case Op::Mul: return eval_node(*n.a, env) * eval_node(*n.b, env);
    case Op::Div: {
      const double a = eval_node(*n.a, env), b = eval_node(*n.b, env);
      if (b == 0.0) throw EvalError("division by zero", print(n));
      return a / b;
    }
    case Op::Pow: {
      const double r = std::pow(eval_node(*n.a, env), eval_node(*n.b, env));
      if (!std::isfinite(r)) throw EvalError("invalid power", print(n));
      return r;
    }
    case Op::Neg: return -eval_node(*n.a, env);
    case Op::Ln: {
      const double a = eval_node(*n.a, env);
      if (!(a > 0.0)) throw EvalError("logarithm of non-positive value", print(n));
      return std::log(a);
    }
    case Op::Sqrt: {
      const double a = eval_node(*n.a, env);
      if (a < 0.0) throw EvalError("square root of negative value", print(n));
      return std::sqrt(a);
    }
    case Op::Exp: {
      const double r = std::exp(eval_node(*n.a, env));
      if (!std::isfinite(r)) throw EvalError("exponential overflow", print(n));
      return r;
    }
    default: return detail::apply_unary(n.op, eval_node(*n.a, env));
  }
}

inline double Expr::eval(const Env& env) const {
  if (static_cast<int>(env.x.size()) != dim_)
    throw Error("environment has dimension " + std::to_string(env.x.size()) + ", expression expects " +
                std::to_string(dim_));
  return eval_node(*node_, env);
}

// ------------------------------------------------------------------ differentiation

inline Expr Expr::diff_node(const NodePtr& np, Var v, int dim) {
  const Node& n = *np;
  if (!depends(n, v)) return number(0.0, dim);
  const Expr self = wrap(np, dim);
  const Expr a = n.a ? wrap(n.a, dim) : Expr();
  const Expr b = n.b ? wrap(n.b, dim) : Expr();
  auto da = [&] { return diff_node(n.a, v, dim); };
  auto db = [&] { return diff_node(n.b, v, dim); };
  const Expr one = number(1.0, dim), two = number(2.0, dim);

  switch (n.op) {
    case Op::T:
    case Op::X: return one;
    case Op::Add: return da() + db();
    case Op::Sub: return da() - db();
    case Op::Mul: return da() * b + a * db();
    case Op::Div: return (da() * b - a * db()) / pow(b, two);
    case Op::Pow:
      if (!depends(*n.b, v)) return b * pow(a, b - one) * da();
      return self * (db() * unary(Op::Ln, a) + b * da() / a);
    case Op::Neg: return -da();
    case Op::Sin: return unary(Op::Cos, a) * da();
    case Op::Cos: return -(unary(Op::Sin, a) * da());
    case Op::Exp: return self * da();
    case Op::Ln: return da() / a;
    case Op::Sqrt: return da() / (two * self);
    case Op::Atan: return da() / (one + pow(a, two));
    case Op::Tanh: return (one - pow(self, two)) * da();
    case Op::Abs: throw NonDifferentiable(print(n));
    case Op::Num: break;
  }
  return number(0.0, dim);
}

inline Expr Expr::diff(Var v) const { return diff_node(node_, v, dim_); }

// ------------------------------------------------------------------ printing

inline int Expr::precedence(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Num: return n.value < 0 || std::signbit(n.value) ? 3 : 5;
    default: return 5;
  }
}

inline std::string Expr::print(const Node& n) {
  auto paren = [](const Node& c, bool wrap_it) {
    return wrap_it ? "(" + print(c) + ")" : print(c);
  };
  switch (n.op) {
    case Op::Num: return detail::format_number(n.value);
    case Op::T: return "t";
    case Op::X: return "x" + std::to_string(n.index);
    case Op::Neg: return "-" + paren(*n.a, precedence(*n.a) < 3);
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const int p = precedence(n);
      const char* sym = n.op == Op::Add ? "+" : n.op == Op::Sub ? "-" : n.op == Op::Mul ? "*" : "/";
      const std::string sep = p == 1 ? std::string(" ") + sym + " " : sym;
      return paren(*n.a, precedence(*n.a) < p) + sep + paren(*n.b, precedence(*n.b) <= p);
    }
    case Op::Pow:
      return paren(*n.a, precedence(*n.a) <= 4) + "^" + paren(*n.b, precedence(*n.b) < 4);
    default: return std::string(detail::func_name(n.op)) + "(" + print(*n.a) + ")";
  }
}

// ------------------------------------------------------------------ parsing

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int dim) : s_(text), dim_(dim) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ < s_.size()) fail({"operator", "end of input"});
    return e;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(std::vector<std::string> expected) {
    const std::string found = pos_ < s_.size() ? "'" + std::string(1, s_[pos_]) + "'" : "end of input";
    throw ParseError(pos_, std::move(expected), found);
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+'))
        e = e + term();
      else if (accept('-'))
        e = e - term();
      else
        return e;
    }
  }
  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*'))
        e = e * unary();
      else if (accept('/'))
        e = e / unary();
      else
        return e;
    }
  }
  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }
  Expr power() {
    Expr base = primary();
    if (accept('^')) return pow(base, unary());
    return base;
  }
  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail({"number", "identifier", "'('", "'-'"});
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) fail({"')'"});
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail({"number", "identifier", "'('", "'-'"});
  }
  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    const std::string lit(s_.substr(start, pos_ - start));
    if (lit == ".") {
      pos_ = start;
      fail({"number"});
    }
    return Expr::number(std::stod(lit), dim_);
  }
  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    if (name == "t") return Expr::time(dim_);
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int k = std::stoi(name.substr(1));
      if (k < 1 || k > dim_) throw DimensionError(start, k, dim_);
      return Expr::var(k, dim_);
    }
    static constexpr std::pair<std::string_view, Op> funcs[] = {
        {"sin", Op::Sin}, {"cos", Op::Cos},   {"exp", Op::Exp}, {"ln", Op::Ln},
        {"sqrt", Op::Sqrt}, {"atan", Op::Atan}, {"tanh", Op::Tanh}, {"abs", Op::Abs}};
    for (const auto& [fname, op] : funcs) {
      if (name == fname) {
        if (!accept('(')) fail({"'('"});
        Expr arg = expr();
        if (!accept(')')) fail({"')'"});
        return Expr::unary(op, arg);
      }
    }
    throw UnknownIdentifier(start, name);
  }

  std::string_view s_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses text over variables t, x1..xn. Throws ParseError (or one of its
/// subclasses UnknownIdentifier, DimensionError) carrying a 0-based position.
inline Expr parse_expr(std::string_view text, int n) { return detail::Parser(text, n).parse(); }

inline double eval_expr(const Expr& e, const Env& env) { return e.eval(env); }

inline Expr diff_expr(const Expr& e, Var v) { return e.diff(v); }

}  // namespace topeq::dsl
