#pragma once

// Field-definition DSL: scalar expressions in x, y, z with exact first and
// second derivatives.
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := primary ('^' unary)?          right-associative, constant exponent
//   primary  := number | 'x' | 'y' | 'z' | 'pi' | func '(' expr ')' | '(' expr ')'
//   func     := sin | cos | tan | exp | ln | sqrt | tanh | abs
//
// A vector field is three expressions separated by commas.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>

#include "bihamil/error.hpp"
#include "bihamil/vec3.hpp"

namespace bihamil {

// ---------------------------------------------------------------------------
// Jet2: value, gradient and Hessian of a scalar in three variables.
// ---------------------------------------------------------------------------

/// Second-order forward-mode jet. The Hessian is stored as its upper
/// triangle, so symmetry holds by construction.
struct Jet2 {
  double value{0.0};
  Vec3 gradient{};
  std::array<double, 6> upper{};  // (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)

  static constexpr std::size_t slot(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return i == 0 ? j : (i == 1 ? 2 + j : 5);
  }

  double hessian(std::size_t i, std::size_t j) const { return upper[slot(i, j)]; }

  Mat3 hessian() const {
    Mat3 m{};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) m[i][j] = hessian(i, j);
    return m;
  }

  static Jet2 constant(double v) {
    Jet2 j;
    j.value = v;
    return j;
  }

  static Jet2 variable(std::size_t index, double v) {
    Jet2 j;
    j.value = v;
    j.gradient[index] = 1.0;
    return j;
  }
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.value = a.value + b.value;
  r.gradient = a.gradient + b.gradient;
  for (std::size_t k = 0; k < 6; ++k) r.upper[k] = a.upper[k] + b.upper[k];
  return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.value = a.value - b.value;
  r.gradient = a.gradient - b.gradient;
  for (std::size_t k = 0; k < 6; ++k) r.upper[k] = a.upper[k] - b.upper[k];
  return r;
}

inline Jet2 operator-(const Jet2& a) {
  Jet2 r;
  r.value = -a.value;
  r.gradient = -a.gradient;
  for (std::size_t k = 0; k < 6; ++k) r.upper[k] = -a.upper[k];
  return r;
}

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.value = a.value * b.value;
  r.gradient = a.value * b.gradient + b.value * a.gradient;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i; j < 3; ++j) {
      const std::size_t k = Jet2::slot(i, j);
      r.upper[k] = a.value * b.upper[k] + b.value * a.upper[k] + a.gradient[i] * b.gradient[j] +
                   a.gradient[j] * b.gradient[i];
    }
  }
  return r;
}

/// Chain rule for a scalar function g applied to a: f0 = g(a), f1 = g'(a),
/// f2 = g''(a).
inline Jet2 chain(const Jet2& a, double f0, double f1, double f2) {
  Jet2 r;
  r.value = f0;
  r.gradient = f1 * a.gradient;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i; j < 3; ++j) {
      const std::size_t k = Jet2::slot(i, j);
      r.upper[k] = f1 * a.upper[k] + f2 * a.gradient[i] * a.gradient[j];
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

enum class NodeKind { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Call };
enum class Func { Sin, Cos, Tan, Exp, Ln, Sqrt, Tanh, Abs };

inline std::string_view func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Sqrt: return "sqrt";
    case Func::Tanh: return "tanh";
    case Func::Abs: return "abs";
  }
  return "?";
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind{NodeKind::Constant};
  double value{0.0};    // Constant
  std::size_t var{0};   // Variable: 0 = x, 1 = y, 2 = z
  Func fn{Func::Sin};   // Call
  NodePtr lhs;          // operand / left / base
  NodePtr rhs;          // right / exponent (always a Constant for Pow)
  std::size_t offset{0};
};

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Neg: return 3;
    case NodeKind::Pow: return 4;
    default: return 5;
  }
}

inline void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Constant:
      if (n.value < 0 || std::signbit(n.value)) {
        out += '(';
        out += '-';
        out += format_number(-n.value);
        out += ')';
      } else {
        out += format_number(n.value);
      }
      return;
    case NodeKind::Variable:
      out += "xyz"[n.var];
      return;
    case NodeKind::Neg:
      out += '-';
      if (precedence(n.lhs->kind) < precedence(NodeKind::Neg)) {
        out += '(';
        print(*n.lhs, out);
        out += ')';
      } else {
        print(*n.lhs, out);
      }
      return;
    case NodeKind::Call:
      out += func_name(n.fn);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::Pow: {
      const bool wrap = precedence(n.lhs->kind) <= precedence(NodeKind::Pow) ||
                        (n.lhs->kind == NodeKind::Constant && std::signbit(n.lhs->value));
      if (wrap) out += '(';
      print(*n.lhs, out);
      if (wrap) out += ')';
      out += '^';
      print(*n.rhs, out);
      return;
    }
    default: {
      const int p = precedence(n.kind);
      const char op = n.kind == NodeKind::Add ? '+' : n.kind == NodeKind::Sub ? '-' : n.kind == NodeKind::Mul ? '*' : '/';
      const bool wrap_l = precedence(n.lhs->kind) < p;
      const bool wrap_r = precedence(n.rhs->kind) <= p && n.rhs->kind != NodeKind::Neg;
      if (wrap_l) out += '(';
      print(*n.lhs, out);
      if (wrap_l) out += ')';
      out += ' ';
      out += op;
      out += ' ';
      if (wrap_r) out += '(';
      print(*n.rhs, out);
      if (wrap_r) out += ')';
      return;
    }
  }
}

inline bool equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Constant: return a.value == b.value;
    case NodeKind::Variable: return a.var == b.var;
    case NodeKind::Call: return a.fn == b.fn && equal(*a.lhs, *b.lhs);
    case NodeKind::Neg: return equal(*a.lhs, *b.lhs);
    default: return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
  }
}

inline bool has_variable(const Node& n) {
  switch (n.kind) {
    case NodeKind::Constant: return false;
    case NodeKind::Variable: return true;
    case NodeKind::Neg:
    case NodeKind::Call: return has_variable(*n.lhs);
    default: return has_variable(*n.lhs) || has_variable(*n.rhs);
  }
}

}  // namespace detail

/// Immutable parsed scalar expression in x, y, z.
class ExprAst {
 public:
  ExprAst() : root_(std::make_shared<const Node>()) {}
  explicit ExprAst(NodePtr root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }

  std::string to_string() const {
    std::string s;
    detail::print(*root_, s);
    return s;
  }

  bool is_constant() const { return !detail::has_variable(*root_); }

  friend bool operator==(const ExprAst& a, const ExprAst& b) { return detail::equal(*a.root_, *b.root_); }

 private:
  NodePtr root_;
};

/// Three Cartesian components sharing the variable set {x, y, z}.
struct VectorFieldSpec {
  std::array<ExprAst, 3> components;

  const ExprAst& operator[](std::size_t i) const { return components[i]; }

  std::string to_string() const {
    return components[0].to_string() + ", " + components[1].to_string() + ", " + components[2].to_string();
  }

  friend bool operator==(const VectorFieldSpec&, const VectorFieldSpec&) = default;
};

// ---------------------------------------------------------------------------
// AST construction helpers (used by the parser and by callers composing
// fields such as f·J).
// ---------------------------------------------------------------------------

namespace ast {

inline NodePtr constant(double v, std::size_t offset = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = v;
  n->offset = offset;
  return n;
}

inline NodePtr variable(std::size_t i, std::size_t offset = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->var = i;
  n->offset = offset;
  return n;
}

inline NodePtr binary(NodeKind k, NodePtr l, NodePtr r, std::size_t offset = 0) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  n->offset = offset;
  return n;
}

inline NodePtr negate(NodePtr operand, std::size_t offset = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Neg;
  n->lhs = std::move(operand);
  n->offset = offset;
  return n;
}

inline NodePtr call(Func f, NodePtr arg, std::size_t offset = 0) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Call;
  n->fn = f;
  n->lhs = std::move(arg);
  n->offset = offset;
  return n;
}

}  // namespace ast

inline ExprAst operator*(const ExprAst& a, const ExprAst& b) {
  return ExprAst(ast::binary(NodeKind::Mul, a.root_ptr(), b.root_ptr()));
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void domain_fail(const Node& n, const std::string& msg) {
  std::string text;
  print(n, text);
  throw DomainError(text, msg + " (node at offset " + std::to_string(n.offset) + ")");
}

template <class T>
T lift(const T& a, double f0, double f1, double f2) {
  if constexpr (std::is_same_v<T, double>) {
    (void)a;
    (void)f1;
    (void)f2;
    return f0;
  } else {
    return chain(a, f0, f1, f2);
  }
}

template <class T>
double value_of(const T& a) {
  if constexpr (std::is_same_v<T, double>) {
    return a;
  } else {
    return a.value;
  }
}

template <class T>
T eval(const Node& n, const Vec3& p) {
  switch (n.kind) {
    case NodeKind::Constant:
      if constexpr (std::is_same_v<T, double>) {
        return n.value;
      } else {
        return Jet2::constant(n.value);
      }
    case NodeKind::Variable:
      if constexpr (std::is_same_v<T, double>) {
        return p[n.var];
      } else {
        return Jet2::variable(n.var, p[n.var]);
      }
    case NodeKind::Add: return eval<T>(*n.lhs, p) + eval<T>(*n.rhs, p);
    case NodeKind::Sub: return eval<T>(*n.lhs, p) - eval<T>(*n.rhs, p);
    case NodeKind::Mul: return eval<T>(*n.lhs, p) * eval<T>(*n.rhs, p);
    case NodeKind::Neg: return -eval<T>(*n.lhs, p);
    case NodeKind::Div: {
      const T num = eval<T>(*n.lhs, p);
      const T den = eval<T>(*n.rhs, p);
      const double d = value_of(den);
      if (d == 0.0) domain_fail(n, "division by zero");
      return num * lift(den, 1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d));
    }
    case NodeKind::Pow: {
      const T base = eval<T>(*n.lhs, p);
      const double a = value_of(base);
      const double c = n.rhs->value;
      if (c == 0.0) return lift(base, 1.0, 0.0, 0.0);
      const double f0 = std::pow(a, c);
      double f1 = 0.0, f2 = 0.0;
      if constexpr (!std::is_same_v<T, double>) {
        f1 = c == 1.0 ? 1.0 : c * std::pow(a, c - 1.0);
        f2 = (c == 1.0) ? 0.0 : (c == 2.0 ? 2.0 : c * (c - 1.0) * std::pow(a, c - 2.0));
      }
      if (!std::isfinite(f0) || !std::isfinite(f1) || !std::isfinite(f2))
        domain_fail(n, "power undefined or not twice differentiable at base " + format_number(a));
      return lift(base, f0, f1, f2);
    }
    case NodeKind::Call: {
      const T arg = eval<T>(*n.lhs, p);
      const double a = value_of(arg);
      double f0 = 0.0, f1 = 0.0, f2 = 0.0;
      switch (n.fn) {
        case Func::Sin:
          f0 = std::sin(a);
          f1 = std::cos(a);
          f2 = -f0;
          break;
        case Func::Cos:
          f0 = std::cos(a);
          f1 = -std::sin(a);
          f2 = -f0;
          break;
        case Func::Tan:
          f0 = std::tan(a);
          f1 = 1.0 + f0 * f0;
          f2 = 2.0 * f0 * f1;
          break;
        case Func::Exp:
          f0 = f1 = f2 = std::exp(a);
          break;
        case Func::Ln:
          if (a <= 0.0) domain_fail(n, "ln of non-positive value " + format_number(a));
          f0 = std::log(a);
          f1 = 1.0 / a;
          f2 = -f1 * f1;
          break;
        case Func::Sqrt:
          if (a < 0.0) domain_fail(n, "sqrt of negative value " + format_number(a));
          f0 = std::sqrt(a);
          if constexpr (!std::is_same_v<T, double>) {
            if (a == 0.0) domain_fail(n, "sqrt is not differentiable at 0");
            f1 = 0.5 / f0;
            f2 = -0.25 / (f0 * a);
          }
          break;
        case Func::Tanh:
          f0 = std::tanh(a);
          f1 = 1.0 - f0 * f0;
          f2 = -2.0 * f0 * f1;
          break;
        case Func::Abs:
          f0 = std::abs(a);
          f1 = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
          f2 = 0.0;
          break;
      }
      if (!std::isfinite(f0) || !std::isfinite(f1) || !std::isfinite(f2))
        domain_fail(n, "non-finite result at argument " + format_number(a));
      return lift(arg, f0, f1, f2);
    }
  }
  return T{};
}

}  // namespace detail

inline double evaluate(const ExprAst& e, const Vec3& p) { return detail::eval<double>(e.root(), p); }

inline Jet2 eval_jet2(const ExprAst& e, const Vec3& p) { return detail::eval<Jet2>(e.root(), p); }

inline Vec3 evaluate(const VectorFieldSpec& f, const Vec3& p) {
  return {evaluate(f[0], p), evaluate(f[1], p), evaluate(f[2], p)};
}

inline std::array<Jet2, 3> eval_jet2(const VectorFieldSpec& f, const Vec3& p) {
  return {eval_jet2(f[0], p), eval_jet2(f[1], p), eval_jet2(f[2], p)};
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind{Tok::End};
  std::string_view text;
  std::size_t offset{0};
  double number{0.0};
};

inline std::string_view describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::Comma: return "','";
    case Tok::RParen: return "')'";
    default: return t.text;
  }
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  NodePtr parse_expression() {
    NodePtr lhs = parse_term();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      const NodeKind k = cur_.kind == Tok::Plus ? NodeKind::Add : NodeKind::Sub;
      const std::size_t off = cur_.offset;
      advance();
      lhs = ast::binary(k, std::move(lhs), parse_term(), off);
    }
    return lhs;
  }

  const Token& current() const { return cur_; }
  void advance() { cur_ = lex(); }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(cur_.offset, msg); }

  void expect(Tok k, std::string_view what) {
    if (cur_.kind != k)
      fail("expected " + std::string(what) + ", found " + std::string(describe(cur_)));
    advance();
  }

 private:
  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      const NodeKind k = cur_.kind == Tok::Star ? NodeKind::Mul : NodeKind::Div;
      const std::size_t off = cur_.offset;
      advance();
      lhs = ast::binary(k, std::move(lhs), parse_unary(), off);
    }
    return lhs;
  }

  NodePtr parse_unary() {
    if (cur_.kind == Tok::Minus) {
      const std::size_t off = cur_.offset;
      advance();
      return ast::negate(parse_unary(), off);
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (cur_.kind != Tok::Caret) return base;
    const std::size_t off = cur_.offset;
    advance();
    const std::size_t exp_off = cur_.offset;
    NodePtr exponent = parse_unary();
    if (has_variable(*exponent)) throw ParseError(exp_off, "exponent of '^' must be a constant expression");
    const double c = eval<double>(*exponent, Vec3{});
    if (!std::isfinite(c)) throw ParseError(exp_off, "exponent of '^' is not finite");
    return ast::binary(NodeKind::Pow, std::move(base), ast::constant(c, exp_off), off);
  }

  NodePtr parse_primary() {
    const Token t = cur_;
    switch (t.kind) {
      case Tok::Number:
        advance();
        return ast::constant(t.number, t.offset);
      case Tok::LParen: {
        advance();
        NodePtr inner = parse_expression();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident: {
        advance();
        if (t.text == "x") return ast::variable(0, t.offset);
        if (t.text == "y") return ast::variable(1, t.offset);
        if (t.text == "z") return ast::variable(2, t.offset);
        if (t.text == "pi") return ast::constant(std::numbers::pi, t.offset);
        static constexpr std::array<Func, 8> funcs{Func::Sin, Func::Cos, Func::Tan,  Func::Exp,
                                                   Func::Ln,  Func::Sqrt, Func::Tanh, Func::Abs};
        for (Func f : funcs) {
          if (t.text == func_name(f)) {
            expect(Tok::LParen, "'(' after function name");
            NodePtr arg = parse_expression();
            expect(Tok::RParen, "')'");
            return ast::call(f, std::move(arg), t.offset);
          }
        }
        throw ParseError(t.offset, "unknown identifier '" + std::string(t.text) +
                                       "' (variables: x, y, z; constant: pi; functions: sin, cos, tan, exp, "
                                       "ln, sqrt, tanh, abs)");
      }
      default:
        fail("expected expression, found " + std::string(describe(t)));
    }
  }

  Token lex() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    auto single = [&](Tok k) {
      t.kind = k;
      t.text = src_.substr(pos_, 1);
      ++pos_;
      return t;
    };
    switch (c) {
      case '+': return single(Tok::Plus);
      case '-': return single(Tok::Minus);
      case '*': return single(Tok::Star);
      case '/': return single(Tok::Slash);
      case '^': return single(Tok::Caret);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case ',': return single(Tok::Comma);
      default: break;
    }
    auto is_digit = [](char ch) { return ch >= '0' && ch <= '9'; };
    auto is_alpha = [](char ch) { return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || ch == '_'; };
    if (is_digit(c) || c == '.') {
      std::size_t end = pos_;
      while (end < src_.size() && is_digit(src_[end])) ++end;
      if (end < src_.size() && src_[end] == '.') {
        ++end;
        while (end < src_.size() && is_digit(src_[end])) ++end;
      }
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        std::size_t e = end + 1;
        if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
        if (e < src_.size() && is_digit(src_[e])) {
          while (e < src_.size() && is_digit(src_[e])) ++e;
          end = e;
        }
      }
      t.kind = Tok::Number;
      t.text = src_.substr(pos_, end - pos_);
      if (t.text == ".") throw ParseError(pos_, "malformed number");
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size())
        throw ParseError(pos_, "malformed or out-of-range number '" + std::string(t.text) + "'");
      pos_ = end;
      return t;
    }
    if (is_alpha(c)) {
      std::size_t end = pos_;
      while (end < src_.size() && (is_alpha(src_[end]) || is_digit(src_[end]))) ++end;
      t.kind = Tok::Ident;
      t.text = src_.substr(pos_, end - pos_);
      pos_ = end;
      return t;
    }
    throw ParseError(pos_, "unexpected character '" + std::string(1, c) + "'");
  }

  std::string_view src_;
  std::size_t pos_{0};
  Token cur_;
};

}  // namespace detail

enum class Arity { Scalar, Vector3 };

inline ExprAst parse_scalar(std::string_view src) {
  detail::Parser p(src);
  NodePtr root = p.parse_expression();
  if (p.current().kind != detail::Tok::End)
    p.fail("expected operator or end of input, found " + std::string(detail::describe(p.current())));
  return ExprAst(std::move(root));
}

inline VectorFieldSpec parse_vector(std::string_view src) {
  detail::Parser p(src);
  VectorFieldSpec f;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i > 0) p.expect(detail::Tok::Comma, "',' (a vector field has three components)");
    f.components[i] = ExprAst(p.parse_expression());
  }
  if (p.current().kind != detail::Tok::End)
    p.fail("expected end of input after third component, found " + std::string(detail::describe(p.current())));
  return f;
}

inline std::variant<ExprAst, VectorFieldSpec> parse_field(std::string_view src, Arity arity) {
  if (arity == Arity::Scalar) return parse_scalar(src);
  return parse_vector(src);
}

// ---------------------------------------------------------------------------
// Symbolic differentiation (for gradient fields ∇H whose curl must vanish to
// round-off)
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_const(const NodePtr& n, double v) { return n->kind == NodeKind::Constant && n->value == v; }

inline NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return ast::binary(NodeKind::Add, std::move(a), std::move(b));
}

inline NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return ast::negate(std::move(b));
  return ast::binary(NodeKind::Sub, std::move(a), std::move(b));
}

inline NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return ast::constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return ast::binary(NodeKind::Mul, std::move(a), std::move(b));
}

inline NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return ast::constant(0.0);
  return ast::binary(NodeKind::Div, std::move(a), std::move(b));
}

inline NodePtr pow_c(NodePtr base, double c) {
  if (c == 1.0) return base;
  return ast::binary(NodeKind::Pow, std::move(base), ast::constant(c));
}

inline NodePtr derivative(const NodePtr& n, std::size_t var) {
  using ast::call;
  using ast::constant;
  switch (n->kind) {
    case NodeKind::Constant: return constant(0.0);
    case NodeKind::Variable: return constant(n->var == var ? 1.0 : 0.0);
    case NodeKind::Add: return add(derivative(n->lhs, var), derivative(n->rhs, var));
    case NodeKind::Sub: return sub(derivative(n->lhs, var), derivative(n->rhs, var));
    case NodeKind::Neg: {
      NodePtr d = derivative(n->lhs, var);
      return is_const(d, 0.0) ? d : ast::negate(d);
    }
    case NodeKind::Mul:
      return add(mul(derivative(n->lhs, var), n->rhs), mul(n->lhs, derivative(n->rhs, var)));
    case NodeKind::Div:
      return sub(div(derivative(n->lhs, var), n->rhs),
                 div(mul(n->lhs, derivative(n->rhs, var)), pow_c(n->rhs, 2.0)));
    case NodeKind::Pow: {
      const double c = n->rhs->value;
      if (c == 0.0) return constant(0.0);
      return mul(mul(constant(c), pow_c(n->lhs, c - 1.0)), derivative(n->lhs, var));
    }
    case NodeKind::Call: {
      const NodePtr& u = n->lhs;
      NodePtr du = derivative(u, var);
      if (is_const(du, 0.0)) return du;
      NodePtr outer;
      switch (n->fn) {
        case Func::Sin: outer = call(Func::Cos, u); break;
        case Func::Cos: outer = ast::negate(call(Func::Sin, u)); break;
        case Func::Tan: outer = add(constant(1.0), pow_c(call(Func::Tan, u), 2.0)); break;
        case Func::Exp: outer = call(Func::Exp, u); break;
        case Func::Ln: return div(du, u);
        case Func::Sqrt: return div(du, mul(constant(2.0), call(Func::Sqrt, u)));
        case Func::Tanh: outer = sub(constant(1.0), pow_c(call(Func::Tanh, u), 2.0)); break;
        case Func::Abs: outer = div(u, call(Func::Abs, u)); break;
      }
      return mul(outer, du);
    }
  }
  return constant(0.0);
}

}  // namespace detail

/// ∂e/∂(x, y or z) as a new expression.
inline ExprAst differentiate(const ExprAst& e, std::size_t var) { return ExprAst(detail::derivative(e.root_ptr(), var)); }

/// ∇H as an analytic vector field.
inline VectorFieldSpec gradient_field(const ExprAst& h) {
  return {{differentiate(h, 0), differentiate(h, 1), differentiate(h, 2)}};
}

}  // namespace bihamil
