#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdtoc/game24.hpp"

namespace mdtoc {

enum class DatasetKind { G24, MATH, CHAMP };

inline const char* dataset_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::G24: return "g24";
    case DatasetKind::MATH: return "math";
    case DatasetKind::CHAMP: return "champ";
  }
  return "?";
}

inline DatasetKind dataset_from_name(const std::string& s) {
  if (s == "g24") return DatasetKind::G24;
  if (s == "math") return DatasetKind::MATH;
  if (s == "champ") return DatasetKind::CHAMP;
  raise(Errc::ConfigError, "unknown dataset kind '" + s + "'");
}

namespace answer_detail {

inline std::string strip_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Peels LaTeX math wrappers and \boxed{} repeatedly.
inline std::string strip_markup(std::string s) {
  bool changed = true;
  while (changed) {
    changed = false;
    s = strip_ws(s);
    auto wrapped = [&](const std::string& open, const std::string& close) {
      return s.size() > open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
             s.compare(s.size() - close.size(), close.size(), close) == 0;
    };
    if (wrapped("$$", "$$")) {
      s = s.substr(2, s.size() - 4);
      changed = true;
    } else if (wrapped("$", "$")) {
      s = s.substr(1, s.size() - 2);
      changed = true;
    } else if (wrapped("\\(", "\\)") || wrapped("\\[", "\\]")) {
      s = s.substr(2, s.size() - 4);
      changed = true;
    } else if (s.rfind("\\boxed{", 0) == 0 && s.back() == '}') {
      s = s.substr(7, s.size() - 8);
      changed = true;
    }
  }
  if (s.size() > 1 && s.back() == '.') s.pop_back();  // sentence period
  return strip_ws(s);
}

// Collapses internal whitespace runs to single spaces.
inline std::string collapse_ws(const std::string& s) {
  std::string out;
  bool in_ws = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out += ' ';
    in_ws = false;
    out += c;
  }
  return out;
}

// Integer, fraction a/b, or plain decimal -> exact rational.
inline std::optional<Rational> parse_rational(const std::string& text) {
  std::string s = collapse_ws(text);
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[i] == '+' || s[i] == '-') neg = s[i++] == '-';
  std::int64_t whole = 0;
  bool any = false;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    if (whole > 1'000'000'000'000'000) return std::nullopt;
    whole = whole * 10 + (s[i++] - '0');
    any = true;
  }
  if (i < s.size() && s[i] == '/') {
    ++i;
    bool dneg = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) dneg = s[i++] == '-';
    std::int64_t den = 0;
    bool dany = false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      if (den > 1'000'000'000'000'000) return std::nullopt;
      den = den * 10 + (s[i++] - '0');
      dany = true;
    }
    if (!any || !dany || den == 0 || i != s.size()) return std::nullopt;
    Rational r(whole, den);
    return (neg != dneg) ? Rational(0) - r : r;
  }
  if (i < s.size() && s[i] == '.') {
    ++i;
    std::int64_t frac = 0, scale = 1;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      if (scale > 100'000'000'000'000) return std::nullopt;
      frac = frac * 10 + (s[i++] - '0');
      scale *= 10;
      any = true;
    }
    if (!any || i != s.size()) return std::nullopt;
    Rational r = Rational(whole) + Rational(frac, scale);
    return neg ? Rational(0) - r : r;
  }
  if (!any || i != s.size()) return std::nullopt;
  Rational r(whole);
  return neg ? Rational(0) - r : r;
}

}  // namespace answer_detail

// Canonical answer text: markup stripped, whitespace collapsed, exact
// rationals rendered in lowest terms. "1/2" and "0.5" meet here.
inline std::string normalize_answer(const std::string& text) {
  std::string s = answer_detail::collapse_ws(answer_detail::strip_markup(text));
  if (auto r = answer_detail::parse_rational(s)) return r->str();
  return s;
}

struct AnswerMatch {
  bool equal = false;
  // Set when the comparison fell through to plain string inequality on
  // non-numeric content; symbolic equivalence is out of scope and these
  // cases deserve a human look.
  bool needs_manual_review = false;
};

// Dataset-aware answer equivalence. For Game-of-24 the "gold" side is the
// puzzle's four numbers and the predicted side must be a checkable winning
// expression.
inline AnswerMatch answers_equal(const std::string& predicted, const std::string& gold,
                                 DatasetKind dataset) {
  if (dataset == DatasetKind::G24) {
    std::istringstream in(gold);
    std::vector<int> nums;
    std::string tok;
    while (in >> tok) {
      try {
        nums.push_back(std::stoi(tok));
      } catch (...) {
        return {false, true};
      }
    }
    if (nums.size() != 4) return {false, true};
    try {
      Game24Puzzle puzzle = Game24Puzzle::of(nums[0], nums[1], nums[2], nums[3]);
      std::string expr = answer_detail::strip_markup(predicted);
      return {check_game24(puzzle, expr).ok, false};
    } catch (const Error&) {
      return {false, false};  // unparseable expression grades wrong, not fatal
    }
  }

  std::string a = answer_detail::strip_markup(predicted);
  std::string b = answer_detail::strip_markup(gold);
  auto ra = answer_detail::parse_rational(a);
  auto rb = answer_detail::parse_rational(b);
  if (ra && rb) return {*ra == *rb, false};
  std::string na = answer_detail::collapse_ws(a);
  std::string nb = answer_detail::collapse_ws(b);
  if (na == nb) return {true, false};
  return {false, !(ra && rb)};
}

}  // namespace mdtoc
