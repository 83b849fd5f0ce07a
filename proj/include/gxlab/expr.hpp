#pragma once

// Expression language for scalar coefficient functions over the variables
// t, x, y, z. Expressions are immutable trees shared by pointer; evaluation
// is pure and reentrant.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gxlab/errors.hpp"

namespace gxlab::expr {

enum class Var : std::uint8_t { t = 0, x = 1, y = 2, z = 3 };

inline constexpr std::array<Var, 4> kAllVars{Var::t, Var::x, Var::y, Var::z};

inline constexpr char var_name(Var v) noexcept { return "txyz"[static_cast<int>(v)]; }

inline constexpr std::uint8_t var_bit(Var v) noexcept {
  return static_cast<std::uint8_t>(1u << static_cast<unsigned>(v));
}

/// |denominator| below this raises DomainError.
inline constexpr double kDivisionGuard = 1e-12;
/// exp() argument is clamped to [-kExpClamp, kExpClamp].
inline constexpr double kExpClamp = 50.0;

enum class Op : std::uint8_t {
  constant,
  variable,
  negate,
  add,
  sub,
  mul,
  div,
  abs,
  min,
  max,
  pos_part,
  neg_part,
  sin,
  cos,
  exp,
};

struct FunctionInfo {
  std::string_view name;
  Op op;
  int arity;
};

inline constexpr std::array<FunctionInfo, 8> kFunctions{{
    {"abs", Op::abs, 1},
    {"min", Op::min, 2},
    {"max", Op::max, 2},
    {"pos", Op::pos_part, 1},
    {"neg", Op::neg_part, 1},
    {"sin", Op::sin, 1},
    {"cos", Op::cos, 1},
    {"exp", Op::exp, 1},
}};

inline const FunctionInfo* find_function(Op op) noexcept {
  for (const auto& f : kFunctions)
    if (f.op == op) return &f;
  return nullptr;
}

inline const FunctionInfo* find_function(std::string_view name) noexcept {
  for (const auto& f : kFunctions)
    if (f.name == name) return &f;
  return nullptr;
}

/// A set of variable values. Unset variables are tracked so that evaluation
/// can report a missing binding instead of reading garbage.
class Bindings {
 public:
  Bindings() = default;

  Bindings& set(Var v, double value) noexcept {
    values_[static_cast<int>(v)] = value;
    mask_ |= var_bit(v);
    return *this;
  }
  double get(Var v) const noexcept { return values_[static_cast<int>(v)]; }
  bool has(Var v) const noexcept { return (mask_ & var_bit(v)) != 0; }
  std::uint8_t mask() const noexcept { return mask_; }

  static Bindings txyz(double t, double x, double y, double z) noexcept {
    Bindings b;
    b.values_ = {t, x, y, z};
    b.mask_ = 0x0f;
    return b;
  }

 private:
  std::array<double, 4> values_{};
  std::uint8_t mask_ = 0;
};

namespace detail {

inline double apply_unary(Op op, double a) {
  switch (op) {
    case Op::negate: return -a;
    case Op::abs: return std::fabs(a);
    case Op::pos_part: return a > 0.0 ? a : 0.0;
    case Op::neg_part: return a < 0.0 ? -a : 0.0;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(std::clamp(a, -kExpClamp, kExpClamp));
    default: break;
  }
  throw Error("internal: not a unary op");
}

inline double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (!(std::fabs(b) >= kDivisionGuard))
        throw DomainError("division by value with magnitude below " + std::to_string(kDivisionGuard));
      return a / b;
    case Op::min: return std::min(a, b);
    case Op::max: return std::max(a, b);
    default: break;
  }
  throw Error("internal: not a binary op");
}

inline bool is_binary(Op op) noexcept {
  return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div || op == Op::min ||
         op == Op::max;
}

}  // namespace detail

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double c) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = c;
    return Expr(std::move(n));
  }

  static Expr variable(Var v) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->var = v;
    n->free = var_bit(v);
    return Expr(std::move(n));
  }

  static Expr make(Op op, std::vector<Expr> args) {
    const int arity = detail::is_binary(op) ? 2 : 1;
    if (op == Op::constant || op == Op::variable || static_cast<int>(args.size()) != arity)
      throw ArityMismatch("operator expects " + std::to_string(arity) + " argument(s)");
    auto n = std::make_shared<Node>();
    n->op = op;
    for (const auto& a : args) n->free |= a.free_vars();
    n->args = std::move(args);
    return Expr(std::move(n));
  }

  Op op() const noexcept { return node_->op; }
  double value() const noexcept { return node_->value; }
  Var var() const noexcept { return node_->var; }
  const std::vector<Expr>& args() const noexcept { return node_->args; }
  std::uint8_t free_vars() const noexcept { return node_->free; }
  bool depends_on(Var v) const noexcept { return (node_->free & var_bit(v)) != 0; }
  bool is_constant() const noexcept { return node_->free == 0; }

  /// Structural equality. Constants compare by value (so 0 == -0).
  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.op() != b.op()) return false;
    switch (a.op()) {
      case Op::constant: return a.value() == b.value();
      case Op::variable: return a.var() == b.var();
      default: break;
    }
    if (a.args().size() != b.args().size()) return false;
    for (std::size_t i = 0; i < a.args().size(); ++i)
      if (!(a.args()[i] == b.args()[i])) return false;
    return true;
  }

  double evaluate(const Bindings& b) const {
    if ((free_vars() & ~b.mask()) != 0) {
      std::string missing;
      for (Var v : kAllVars)
        if (depends_on(v) && !b.has(v)) missing += var_name(v);
      throw MissingBinding("no binding for variable(s): " + missing);
    }
    return eval_unchecked(*node_, b);
  }

 private:
  struct Node {
    Op op = Op::constant;
    double value = 0.0;
    Var var = Var::t;
    std::uint8_t free = 0;
    std::vector<Expr> args;
  };

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static double eval_unchecked(const Node& n, const Bindings& b) {
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::variable: return b.get(n.var);
      default: break;
    }
    if (n.args.size() == 1) return detail::apply_unary(n.op, eval_unchecked(*n.args[0].node_, b));
    return detail::apply_binary(n.op, eval_unchecked(*n.args[0].node_, b),
                                eval_unchecked(*n.args[1].node_, b));
  }

  std::shared_ptr<const Node> node_;
};

inline double evaluate(const Expr& e, const Bindings& b) { return e.evaluate(b); }

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::make(Op::add, {a, b}); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::make(Op::sub, {a, b}); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::make(Op::mul, {a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::make(Op::div, {a, b}); }
inline Expr operator-(const Expr& a) { return Expr::make(Op::negate, {a}); }
inline Expr operator+(const Expr& a, double c) { return a + Expr::constant(c); }
inline Expr operator+(double c, const Expr& a) { return Expr::constant(c) + a; }
inline Expr operator-(const Expr& a, double c) { return a - Expr::constant(c); }
inline Expr operator*(double c, const Expr& a) { return Expr::constant(c) * a; }

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "empty expression");
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < src_.size()) throw SyntaxError(pos_, std::string("unexpected '") + src_[pos_] + "'");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+'))
        lhs = lhs + parse_product();
      else if (accept('-'))
        lhs = lhs - parse_product();
      else
        return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = lhs * parse_unary();
      else if (accept('/'))
        lhs = lhs / parse_unary();
      else
        return lhs;
    }
  }

  Expr parse_unary() {
    if (accept('-')) {
      skip_ws();
      // A minus sign directly in front of a literal is part of the literal.
      if (pos_ < src_.size() && starts_number(pos_)) return Expr::constant(-parse_number());
      return -parse_unary();
    }
    if (accept('+')) return parse_unary();
    return parse_primary();
  }

  bool starts_number(std::size_t p) const {
    const char c = src_[p];
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
    return c == '.' && p + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p + 1]));
  }

  double parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) throw SyntaxError(start, "malformed number '" + text + "'");
    if (!std::isfinite(v)) throw SyntaxError(start, "number out of range '" + text + "'");
    return v;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "unexpected end of input");
    const char c = src_[pos_];
    if (starts_number(pos_)) return Expr::constant(parse_number());
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      const std::string_view name = src_.substr(start, pos_ - start);
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        ++pos_;
        const FunctionInfo* fn = find_function(name);
        if (fn == nullptr) throw UnknownIdentifier("unknown function '" + std::string(name) + "'");
        std::vector<Expr> args;
        if (!accept(')')) {
          do {
            args.push_back(parse_sum());
          } while (accept(','));
          if (!accept(')')) throw SyntaxError(pos_, "expected ')' or ','");
        }
        if (static_cast<int>(args.size()) != fn->arity)
          throw ArityMismatch(std::string(name) + " expects " + std::to_string(fn->arity) +
                              " argument(s), got " + std::to_string(args.size()));
        return Expr::make(fn->op, std::move(args));
      }
      if (name.size() == 1) {
        for (Var v : kAllVars)
          if (name[0] == var_name(v)) return Expr::variable(v);
      }
      throw UnknownIdentifier("unknown identifier '" + std::string(name) + "'");
    }
    throw SyntaxError(pos_, std::string("unexpected '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Expr parse(std::string_view source) { return detail::Parser(source).parse(); }

/// Fully parenthesised text form; parse(print(e)) == e.
inline std::string print(const Expr& e) {
  switch (e.op()) {
    case Op::constant: {
      const std::string s = detail::format_number(e.value());
      return std::signbit(e.value()) ? "(" + s + ")" : s;
    }
    case Op::variable: return std::string(1, var_name(e.var()));
    case Op::negate: return "-(" + print(e.args()[0]) + ")";
    case Op::add: return "(" + print(e.args()[0]) + " + " + print(e.args()[1]) + ")";
    case Op::sub: return "(" + print(e.args()[0]) + " - " + print(e.args()[1]) + ")";
    case Op::mul: return "(" + print(e.args()[0]) + " * " + print(e.args()[1]) + ")";
    case Op::div: return "(" + print(e.args()[0]) + " / " + print(e.args()[1]) + ")";
    default: break;
  }
  const FunctionInfo* fn = find_function(e.op());
  std::string out(fn->name);
  out += '(';
  for (std::size_t i = 0; i < e.args().size(); ++i) {
    if (i) out += ", ";
    out += print(e.args()[i]);
  }
  return out + ')';
}

// ---------------------------------------------------------------------------
// Lipschitz estimation

struct LipschitzEstimate {
  enum class Method { sampled, declared };

  /// Largest observed difference quotient (or the declared constant).
  double constant = 0.0;
  Method method = Method::sampled;
  int sample_count = 0;
  /// Multiplier applied by consumers that need an upper bound.
  double safety_factor = 1.1;

  double bound() const noexcept {
    return method == Method::declared ? constant : constant * safety_factor;
  }

  static LipschitzEstimate declared(double c) {
    if (!(c >= 0.0)) throw InputError("declared Lipschitz constant must be >= 0");
    return {c, Method::declared, 0, 1.0};
  }
};

/// Axis-aligned sampling box. Variables not listed default to 0.
struct Box {
  std::array<double, 4> lo{};
  std::array<double, 4> hi{};

  Box& set(Var v, double a, double b) {
    if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b)) throw InputError("box bounds must be finite");
    lo[static_cast<int>(v)] = a;
    hi[static_cast<int>(v)] = b;
    return *this;
  }
};

struct LipschitzOptions {
  int samples = 10000;
  std::uint64_t seed = 0;
  double cap = 1e6;
  double safety_factor = 1.1;
};

/// Sampled Lipschitz constant of `e` with respect to the variables in
/// `vars`, in the l1 metric sum_v |a_v - b_v|. Half of the pairs are drawn
/// uniformly from the box; the other half are close pairs at log-uniform
/// separations, which resolves local slopes.
inline LipschitzEstimate estimate_lipschitz(const Expr& e, std::uint8_t vars, const Box& box,
                                            const LipschitzOptions& opt = {}) {
  if (opt.samples < 2) throw InputError("estimate_lipschitz needs at least 2 samples");
  for (int k = 0; k < 4; ++k)
    if (!(box.lo[k] <= box.hi[k])) throw InputError("unbounded or inverted box");

  LipschitzEstimate out;
  out.sample_count = opt.samples;
  out.safety_factor = opt.safety_factor;
  if ((e.free_vars() & vars) == 0) return out;

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_in_box = [&](int k) { return box.lo[k] + (box.hi[k] - box.lo[k]) * unit(rng); };

  double best = 0.0;
  for (int s = 0; s < opt.samples; ++s) {
    Bindings a, b;
    double dist = 0.0;
    const bool local = (s % 2) == 1;
    // Every fourth pair starts close to the origin, where singularities live.
    const bool near_zero = (s % 4) == 3;
    const double scale = std::pow(10.0, -6.0 * unit(rng));
    for (Var v : kAllVars) {
      const int k = static_cast<int>(v);
      double va = sample_in_box(k);
      if (near_zero && (vars & var_bit(v)) && box.lo[k] < 0.0 && box.hi[k] > 0.0) {
        const double mag = std::min(-box.lo[k], box.hi[k]) * std::pow(10.0, -8.0 * unit(rng));
        va = unit(rng) < 0.5 ? -mag : mag;
      }
      double vb = va;
      if (vars & var_bit(v)) {
        if (local) {
          const double width = box.hi[k] - box.lo[k];
          vb = std::clamp(va + (2.0 * unit(rng) - 1.0) * width * scale, box.lo[k], box.hi[k]);
        } else {
          vb = sample_in_box(k);
        }
        dist += std::fabs(va - vb);
      }
      a.set(v, va);
      b.set(v, vb);
    }
    if (dist <= 0.0) continue;
    double fa, fb;
    try {
      fa = e.evaluate(a);
      fb = e.evaluate(b);
    } catch (const DomainError&) {
      continue;
    }
    const double q = std::fabs(fa - fb) / dist;
    if (!(q <= opt.cap))
      throw UnboundedDetected("difference quotient " + std::to_string(q) + " exceeds cap " +
                              std::to_string(opt.cap) + " for '" + print(e) + "'");
    best = std::max(best, q);
  }
  out.constant = best;
  return out;
}

}  // namespace gxlab::expr
