#pragma once

// Payoff expression language: parsing, evaluation and printing of continuous
// payoffs phi: R^n -> R.
//
// Grammar (whitespace-insensitive):
//   expr    := term (('+' | '-') term)*
//   term    := unary ('*' unary)*
//   unary   := '-' unary | primary
//   primary := number | variable | call | '(' expr ')'
//   variable:= 'x' digits            (x1, x2, ... positional, 1-based)
//   call    := abs(expr) | exp(expr) | min(expr, ...) | max(expr, ...)
//            | pow(expr, integer)    (integer literal >= 0)
//
// There is no division and no fractional power, so every expression is
// continuous on all of R^n.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gexp/error.hpp"

namespace gexp {

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& detail)
      : Error(ErrorClass::parse, format(offset, expected, detail)),
        offset_(offset),
        expected_(std::move(expected)) {}

  /// Byte offset into the source text where parsing failed.
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string format(std::size_t offset, const std::vector<std::string>& expected,
                            const std::string& detail) {
    std::string msg = "parse error at byte " + std::to_string(offset) + ": " + detail;
    if (!expected.empty()) {
      msg += " (expected one of:";
      for (const auto& e : expected) msg += " " + e;
      msg += ")";
    }
    return msg;
  }

  std::size_t offset_;
  std::vector<std::string> expected_;
};

enum class Op { constant, variable, negate, add, subtract, multiply, abs, min, max, pow, exp };

struct Node {
  Op op = Op::constant;
  double value = 0.0;  // constant
  int index = 0;       // variable index (1-based) or pow exponent
  std::vector<std::shared_ptr<const Node>> args;
};

using NodePtr = std::shared_ptr<const Node>;

inline bool structurally_equal(const Node& a, const Node& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  switch (a.op) {
    case Op::constant:
      if (a.value != b.value) return false;
      break;
    case Op::variable:
    case Op::pow:
      if (a.index != b.index) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

namespace detail {

inline double int_pow(double base, int exponent) {
  double result = 1.0;
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    base *= base;
    exponent >>= 1;
  }
  return result;
}

inline double eval_node(const Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::constant:
      return n.value;
    case Op::variable:
      return x[static_cast<std::size_t>(n.index - 1)];
    case Op::negate:
      return -eval_node(*n.args[0], x);
    case Op::add:
      return eval_node(*n.args[0], x) + eval_node(*n.args[1], x);
    case Op::subtract:
      return eval_node(*n.args[0], x) - eval_node(*n.args[1], x);
    case Op::multiply:
      return eval_node(*n.args[0], x) * eval_node(*n.args[1], x);
    case Op::abs:
      return std::fabs(eval_node(*n.args[0], x));
    case Op::exp:
      return std::exp(eval_node(*n.args[0], x));
    case Op::pow:
      return int_pow(eval_node(*n.args[0], x), n.index);
    case Op::min: {
      double r = eval_node(*n.args[0], x);
      for (std::size_t i = 1; i < n.args.size(); ++i) r = std::min(r, eval_node(*n.args[i], x));
      return r;
    }
    case Op::max: {
      double r = eval_node(*n.args[0], x);
      for (std::size_t i = 1; i < n.args.size(); ++i) r = std::max(r, eval_node(*n.args[i], x));
      return r;
    }
  }
  return 0.0;
}

inline int max_index(const Node& n) {
  int m = n.op == Op::variable ? n.index : 0;
  for (const auto& a : n.args) m = std::max(m, max_index(*a));
  return m;
}

inline double max_literal(const Node& n) {
  double m = n.op == Op::constant ? std::fabs(n.value) : 0.0;
  for (const auto& a : n.args) m = std::max(m, max_literal(*a));
  return m;
}

inline std::string number_text(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

inline void print_node(const Node& n, std::string& out) {
  auto print_args = [&](const char* name) {
    out += name;
    out += '(';
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      if (i) out += ", ";
      print_node(*n.args[i], out);
    }
    out += ')';
  };
  auto print_binary = [&](const char* sym) {
    out += '(';
    print_node(*n.args[0], out);
    out += sym;
    print_node(*n.args[1], out);
    out += ')';
  };
  switch (n.op) {
    case Op::constant:
      out += number_text(n.value);
      break;
    case Op::variable:
      out += "x" + std::to_string(n.index);
      break;
    case Op::negate:
      out += "-(";
      print_node(*n.args[0], out);
      out += ')';
      break;
    case Op::add: print_binary(" + "); break;
    case Op::subtract: print_binary(" - "); break;
    case Op::multiply: print_binary(" * "); break;
    case Op::abs: print_args("abs"); break;
    case Op::exp: print_args("exp"); break;
    case Op::min: print_args("min"); break;
    case Op::max: print_args("max"); break;
    case Op::pow:
      out += "pow(";
      print_node(*n.args[0], out);
      out += ", " + std::to_string(n.index) + ")";
      break;
  }
}

}  // namespace detail

/// Immutable parsed payoff. Copies share the tree; concurrent evaluation is safe.
class PayoffExpr {
 public:
  PayoffExpr() : PayoffExpr(std::make_shared<const Node>()) {}
  explicit PayoffExpr(NodePtr root)
      : root_(std::move(root)), arity_(detail::max_index(*root_)) {}

  const Node& root() const noexcept { return *root_; }
  const NodePtr& root_ptr() const noexcept { return root_; }

  /// Largest variable index referenced; 0 for constant expressions.
  int arity() const noexcept { return arity_; }

  double operator()(std::span<const double> point) const {
    if (point.size() < static_cast<std::size_t>(arity_))
      throw PreconditionError("payoff of arity " + std::to_string(arity_) +
                              " evaluated at a point of dimension " +
                              std::to_string(point.size()));
    return detail::eval_node(*root_, point);
  }

  double operator()(std::initializer_list<double> point) const {
    return (*this)(std::span<const double>(point.begin(), point.size()));
  }

  /// Evaluates without the dimension check.
  double evaluate_unchecked(std::span<const double> point) const {
    return detail::eval_node(*root_, point);
  }

  std::string to_string() const {
    std::string out;
    detail::print_node(*root_, out);
    return out;
  }

  /// Largest absolute numeric literal; a cheap proxy for where phi varies.
  double literal_radius() const { return detail::max_literal(*root_); }

  friend bool operator==(const PayoffExpr& a, const PayoffExpr& b) {
    return structurally_equal(*a.root_, *b.root_);
  }

 private:
  NodePtr root_;
  int arity_;
};

// Programmatic construction.
namespace dsl {

inline PayoffExpr make(Op op, std::vector<NodePtr> args, double value = 0.0, int index = 0) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = value;
  n->index = index;
  n->args = std::move(args);
  return PayoffExpr(std::move(n));
}

inline PayoffExpr constant(double c) { return make(Op::constant, {}, c); }
inline PayoffExpr x(int i) { return make(Op::variable, {}, 0.0, i); }
inline PayoffExpr abs(const PayoffExpr& e) { return make(Op::abs, {e.root_ptr()}); }
inline PayoffExpr exp(const PayoffExpr& e) { return make(Op::exp, {e.root_ptr()}); }
inline PayoffExpr pow(const PayoffExpr& e, int k) { return make(Op::pow, {e.root_ptr()}, 0.0, k); }

inline PayoffExpr min(std::initializer_list<PayoffExpr> es) {
  std::vector<NodePtr> args;
  for (const auto& e : es) args.push_back(e.root_ptr());
  return make(Op::min, std::move(args));
}

inline PayoffExpr max(std::initializer_list<PayoffExpr> es) {
  std::vector<NodePtr> args;
  for (const auto& e : es) args.push_back(e.root_ptr());
  return make(Op::max, std::move(args));
}

inline PayoffExpr operator-(const PayoffExpr& e) { return make(Op::negate, {e.root_ptr()}); }
inline PayoffExpr operator+(const PayoffExpr& a, const PayoffExpr& b) {
  return make(Op::add, {a.root_ptr(), b.root_ptr()});
}
inline PayoffExpr operator-(const PayoffExpr& a, const PayoffExpr& b) {
  return make(Op::subtract, {a.root_ptr(), b.root_ptr()});
}
inline PayoffExpr operator*(const PayoffExpr& a, const PayoffExpr& b) {
  return make(Op::multiply, {a.root_ptr(), b.root_ptr()});
}

}  // namespace dsl

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  PayoffExpr parse_expression() { return parse_sum(); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= src_.size();
  }

  std::size_t pos() const { return pos_; }
  std::string_view rest() const { return src_.substr(pos_); }
  void advance(std::size_t n) { pos_ += n; }

  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& detail) const {
    throw ParseError(pos_, std::move(expected), detail);
  }

 private:
  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, std::vector<std::string> expected) {
    if (!accept(c)) fail(std::move(expected), found_text());
  }

  std::string found_text() const {
    if (pos_ >= src_.size()) return "unexpected end of input";
    return std::string("unexpected '") + src_[pos_] + "'";
  }

  PayoffExpr parse_sum() {
    PayoffExpr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = dsl::operator+(lhs, parse_product());
      } else if (accept('-')) {
        lhs = dsl::operator-(lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  PayoffExpr parse_product() {
    PayoffExpr lhs = parse_unary();
    while (accept('*')) lhs = dsl::operator*(lhs, parse_unary());
    return lhs;
  }

  PayoffExpr parse_unary() {
    if (accept('-')) {
      skip_ws();
      // A minus directly in front of a literal folds into a negative constant.
      if (pos_ < src_.size() && starts_number(src_[pos_])) return dsl::constant(-scan_number());
      return dsl::operator-(parse_unary());
    }
    return parse_primary();
  }

  static bool starts_number(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }

  double scan_number() {
    const std::size_t start = pos_;
    std::size_t i = pos_;
    auto digits = [&] {
      while (i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]))) ++i;
    };
    digits();
    if (i < src_.size() && src_[i] == '.') {
      ++i;
      digits();
    }
    if (i < src_.size() && (src_[i] == 'e' || src_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      if (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) {
        i = j;
        digits();
      }
    }
    double value = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + i;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
      throw ParseError(start, {"number"}, "malformed or out-of-range number '" +
                                              std::string(first, last) + "'");
    pos_ = i;
    return value;
  }

  std::string scan_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  std::vector<NodePtr> parse_call_args() {
    std::vector<NodePtr> args;
    args.push_back(parse_sum().root_ptr());
    while (accept(',')) args.push_back(parse_sum().root_ptr());
    expect(')', {"','", "')'"});
    return args;
  }

  PayoffExpr parse_pow() {
    PayoffExpr base = parse_sum();
    expect(',', {"','"});
    skip_ws();
    const std::size_t at = pos_;
    bool negative = accept('-');
    skip_ws();
    if (pos_ >= src_.size() || !starts_number(src_[pos_]))
      fail({"integer literal"}, "pow exponent must be a non-negative integer literal");
    double k = scan_number();
    if (negative && k != 0.0)
      throw ParseError(at, {"integer literal"}, "pow exponent must be non-negative");
    if (k != std::floor(k) || k > 1e6)
      throw ParseError(at, {"integer literal"}, "pow exponent must be an integer");
    expect(')', {"')'"});
    return dsl::pow(base, static_cast<int>(k));
  }

  PayoffExpr parse_primary() {
    skip_ws();
    static const std::vector<std::string> primary_tokens = {"number", "variable", "'('",
                                                            "function"};
    if (pos_ >= src_.size()) fail(primary_tokens, "unexpected end of input");
    const char c = src_[pos_];
    if (starts_number(c)) return dsl::constant(scan_number());
    if (c == '(') {
      ++pos_;
      PayoffExpr inner = parse_sum();
      expect(')', {"')'"});
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      const std::string id = scan_identifier();
      if (id.size() > 1 && id[0] == 'x' &&
          std::all_of(id.begin() + 1, id.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
        int index = 0;
        auto [p, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), index);
        if (ec != std::errc() || index < 1)
          throw ParseError(start, {"variable"}, "variable index must be >= 1 in '" + id + "'");
        return dsl::x(index);
      }
      const bool known = id == "abs" || id == "exp" || id == "min" || id == "max" || id == "pow";
      if (!known) throw ParseError(start, {}, "unknown identifier '" + id + "'");
      expect('(', {"'('"});
      if (id == "pow") return parse_pow();
      if (id == "abs" || id == "exp") {
        NodePtr arg = parse_sum().root_ptr();
        expect(')', {"')'"});
        return dsl::make(id == "abs" ? Op::abs : Op::exp, {std::move(arg)});
      }
      return dsl::make(id == "min" ? Op::min : Op::max, parse_call_args());
    }
    fail(primary_tokens, found_text());
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline PayoffExpr parse_payoff(std::string_view src) {
  detail::Parser p(src);
  if (p.at_end()) throw ParseError(0, {"expression"}, "empty payoff source");
  PayoffExpr e = p.parse_expression();
  if (!p.at_end()) p.fail({"'+'", "'-'", "'*'", "end of input"}, "trailing input");
  return e;
}

inline double eval_payoff(const PayoffExpr& expr, std::span<const double> point) {
  return expr(point);
}

inline std::vector<double> eval_payoff_batch(const PayoffExpr& expr,
                                             std::span<const std::vector<double>> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(expr(p));
  return out;
}

enum class Relation { less, less_equal, greater_equal, greater };

/// Event {lhs REL rhs} over a point, e.g. "abs(x1) <= 1".
struct EventPredicate {
  PayoffExpr lhs;
  Relation relation = Relation::less;
  PayoffExpr rhs;

  int arity() const { return std::max(lhs.arity(), rhs.arity()); }

  bool operator()(std::span<const double> point) const {
    const double a = lhs(point);
    const double b = rhs(point);
    switch (relation) {
      case Relation::less: return a < b;
      case Relation::less_equal: return a <= b;
      case Relation::greater_equal: return a >= b;
      case Relation::greater: return a > b;
    }
    return false;
  }

  std::string to_string() const {
    static constexpr std::array<const char*, 4> sym = {" < ", " <= ", " >= ", " > "};
    return lhs.to_string() + sym[static_cast<std::size_t>(relation)] + rhs.to_string();
  }
};

inline EventPredicate parse_event(std::string_view src) {
  detail::Parser p(src);
  if (p.at_end()) throw ParseError(0, {"expression"}, "empty event source");
  EventPredicate ev;
  ev.lhs = p.parse_expression();
  p.skip_ws();
  const std::string_view r = p.rest();
  if (r.starts_with("<=")) {
    ev.relation = Relation::less_equal;
    p.advance(2);
  } else if (r.starts_with(">=")) {
    ev.relation = Relation::greater_equal;
    p.advance(2);
  } else if (r.starts_with("<")) {
    ev.relation = Relation::less;
    p.advance(1);
  } else if (r.starts_with(">")) {
    ev.relation = Relation::greater;
    p.advance(1);
  } else {
    p.fail({"'<'", "'<='", "'>='", "'>'"}, "missing relation");
  }
  ev.rhs = p.parse_expression();
  if (!p.at_end()) p.fail({"'+'", "'-'", "'*'", "end of input"}, "trailing input");
  return ev;
}

}  // namespace gexp
