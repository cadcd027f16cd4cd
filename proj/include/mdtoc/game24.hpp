#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mdtoc/errors.hpp"

namespace mdtoc {

// Exact rational over int64, normalized (gcd 1, positive denominator).
// Division by zero is surfaced via valid(), not exceptions, so arbitrary
// model-written expressions stay gradable.
class Rational {
public:
  Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) { normalize(); }

  static Rational invalid() {
    Rational r;
    r.den_ = 0;
    return r;
  }

  bool valid() const { return den_ != 0; }
  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  friend Rational operator+(Rational a, Rational b) {
    if (!a.valid() || !b.valid()) return invalid();
    return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend Rational operator-(Rational a, Rational b) {
    if (!a.valid() || !b.valid()) return invalid();
    return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
  }
  friend Rational operator*(Rational a, Rational b) {
    if (!a.valid() || !b.valid()) return invalid();
    return Rational(a.num_ * b.num_, a.den_ * b.den_);
  }
  friend Rational operator/(Rational a, Rational b) {
    if (!a.valid() || !b.valid() || b.num_ == 0) return invalid();
    return Rational(a.num_ * b.den_, a.den_ * b.num_);
  }
  friend bool operator==(Rational a, Rational b) {
    return a.valid() && b.valid() && a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(Rational a, Rational b) { return !(a == b); }

  std::string str() const {
    if (!valid()) return "undefined";
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

private:
  void normalize() {
    if (den_ == 0) return;
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct Game24Puzzle {
  std::array<int, 4> numbers;

  static Game24Puzzle of(int a, int b, int c, int d) {
    Game24Puzzle p{{a, b, c, d}};
    for (int n : p.numbers)
      if (n < 1) raise(Errc::SchemaError, "puzzle numbers must be positive");
    return p;
  }

  std::array<int, 4> sorted() const {
    std::array<int, 4> s = numbers;
    std::sort(s.begin(), s.end());
    return s;
  }
};

// Binary expression tree over + - * / with integer leaves.
struct ArithExpr {
  char op = 0;  // 0 = leaf
  std::int64_t leaf = 0;
  std::unique_ptr<ArithExpr> lhs, rhs;

  static std::unique_ptr<ArithExpr> number(std::int64_t v) {
    auto e = std::make_unique<ArithExpr>();
    e->leaf = v;
    return e;
  }
  static std::unique_ptr<ArithExpr> node(char op, std::unique_ptr<ArithExpr> l,
                                         std::unique_ptr<ArithExpr> r) {
    auto e = std::make_unique<ArithExpr>();
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
  }

  Rational eval() const {
    if (op == 0) return Rational(leaf);
    Rational a = lhs->eval(), b = rhs->eval();
    switch (op) {
      case '+': return a + b;
      case '-': return a - b;
      case '*': return a * b;
      case '/': return a / b;
    }
    return Rational::invalid();
  }

  void leaves(std::vector<std::int64_t>& out) const {
    if (op == 0) {
      out.push_back(leaf);
      return;
    }
    lhs->leaves(out);
    rhs->leaves(out);
  }

  std::string str() const {
    if (op == 0) return std::to_string(leaf);
    return "(" + lhs->str() + std::string(1, op) + rhs->str() + ")";
  }
};

namespace game24_detail {

// Recursive-descent infix parser: + - * / with parentheses, integer atoms,
// standard precedence, left associativity. The usual unicode operator
// spellings are folded to ASCII; unary minus is rejected because a solution
// uses the four numbers as written.
class ExprParser {
public:
  explicit ExprParser(const std::string& text) : text_(fold_unicode(text)) {}

  std::unique_ptr<ArithExpr> parse() {
    auto e = parse_sum();
    skip_ws();
    if (pos_ != text_.size())
      raise(Errc::ParseError, "unexpected trailing text at position " + std::to_string(pos_));
    return e;
  }

private:
  static std::string fold_unicode(const std::string& in) {
    std::string out;
    for (std::size_t i = 0; i < in.size();) {
      if (in.compare(i, 2, "\xC3\x97") == 0) {  // ×
        out += '*';
        i += 2;
      } else if (in.compare(i, 2, "\xC3\xB7") == 0) {  // ÷
        out += '/';
        i += 2;
      } else if (in.compare(i, 3, "\xE2\x88\x92") == 0) {  // −
        out += '-';
        i += 3;
      } else {
        out += in[i++];
      }
    }
    return out;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::unique_ptr<ArithExpr> parse_sum() {
    auto lhs = parse_product();
    while (true) {
      skip_ws();
      if (pos_ >= text_.size() || (text_[pos_] != '+' && text_[pos_] != '-')) return lhs;
      char op = text_[pos_++];
      lhs = ArithExpr::node(op, std::move(lhs), parse_product());
    }
  }

  std::unique_ptr<ArithExpr> parse_product() {
    auto lhs = parse_atom();
    while (true) {
      skip_ws();
      if (pos_ >= text_.size() || (text_[pos_] != '*' && text_[pos_] != '/')) return lhs;
      char op = text_[pos_++];
      lhs = ArithExpr::node(op, std::move(lhs), parse_atom());
    }
  }

  std::unique_ptr<ArithExpr> parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) raise(Errc::ParseError, "unexpected end of expression");
    if (text_[pos_] == '(') {
      ++pos_;
      auto e = parse_sum();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')')
        raise(Errc::ParseError, "missing closing parenthesis");
      ++pos_;
      return e;
    }
    if (!std::isdigit(static_cast<unsigned char>(text_[pos_])))
      raise(Errc::ParseError, std::string("unexpected character '") + text_[pos_] +
                                  "' at position " + std::to_string(pos_));
    std::int64_t v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > 1'000'000'000) raise(Errc::ParseError, "number literal too large");
      ++pos_;
    }
    return ArithExpr::number(v);
  }

  std::string text_;
  std::size_t pos_ = 0;
};

}  // namespace game24_detail

inline std::unique_ptr<ArithExpr> parse_expression(const std::string& text) {
  return game24_detail::ExprParser(text).parse();
}

struct Game24Check {
  bool ok = false;
  std::string diagnostic;  // names the first violated condition
};

// True iff the expression uses exactly the puzzle's multiset and evaluates
// to exactly 24 under rational arithmetic. Malformed expressions raise
// ParseError; everything else (wrong numbers, division by zero, wrong value)
// grades false with a diagnostic.
inline Game24Check check_game24(const Game24Puzzle& puzzle, const std::string& expression) {
  std::unique_ptr<ArithExpr> expr = parse_expression(expression);

  std::vector<std::int64_t> leaves;
  expr->leaves(leaves);
  std::vector<std::int64_t> want(puzzle.numbers.begin(), puzzle.numbers.end());
  std::sort(leaves.begin(), leaves.end());
  std::sort(want.begin(), want.end());
  if (leaves != want) {
    std::vector<std::int64_t> missing, extra;
    std::set_difference(want.begin(), want.end(), leaves.begin(), leaves.end(),
                        std::back_inserter(missing));
    std::set_difference(leaves.begin(), leaves.end(), want.begin(), want.end(),
                        std::back_inserter(extra));
    auto list = [](const std::vector<std::int64_t>& v) {
      std::string s = "{";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s + "}";
    };
    std::string diag;
    if (!missing.empty()) diag = "unused numbers " + list(missing);
    if (!extra.empty()) diag += (diag.empty() ? "" : "; ") + ("extra numbers " + list(extra));
    return {false, diag};
  }

  Rational value = expr->eval();
  if (!value.valid()) return {false, "division by zero"};
  if (value != Rational(24)) return {false, "value is " + value.str() + ", not 24"};
  return {true, "ok"};
}

// Exhaustive search over the 5 parenthesization shapes, all leaf
// permutations, and all operator assignments, in exact rational arithmetic.
// Returns the first witness in that fixed enumeration order (deterministic),
// or nullopt when the puzzle is unsolvable.
inline std::optional<std::string> solve_game24_bruteforce(const Game24Puzzle& puzzle) {
  std::array<int, 4> nums = puzzle.sorted();
  static constexpr std::array<char, 4> kOps{'+', '-', '*', '/'};

  auto build = [](int shape, const std::array<int, 4>& n,
                  const std::array<char, 3>& ops) -> std::unique_ptr<ArithExpr> {
    auto L = [&](int i) { return ArithExpr::number(n[i]); };
    auto N = [&](char op, std::unique_ptr<ArithExpr> a, std::unique_ptr<ArithExpr> b) {
      return ArithExpr::node(op, std::move(a), std::move(b));
    };
    switch (shape) {
      case 0: return N(ops[2], N(ops[1], N(ops[0], L(0), L(1)), L(2)), L(3));  // ((ab)c)d
      case 1: return N(ops[2], N(ops[1], L(0), N(ops[0], L(1), L(2))), L(3));  // (a(bc))d
      case 2: return N(ops[2], N(ops[0], L(0), L(1)), N(ops[1], L(2), L(3)));  // (ab)(cd)
      case 3: return N(ops[2], L(0), N(ops[1], N(ops[0], L(1), L(2)), L(3)));  // a((bc)d)
      case 4: return N(ops[2], L(0), N(ops[1], L(1), N(ops[0], L(2), L(3))));  // a(b(cd))
    }
    return nullptr;
  };

  do {
    for (int shape = 0; shape < 5; ++shape) {
      for (char o0 : kOps)
        for (char o1 : kOps)
          for (char o2 : kOps) {
            auto expr = build(shape, nums, {o0, o1, o2});
            if (expr->eval() == Rational(24)) return expr->str();
          }
    }
  } while (std::next_permutation(nums.begin(), nums.end()));
  return std::nullopt;
}

}  // namespace mdtoc
