#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>

#include "mdtoc/errors.hpp"

namespace mdtoc {

// Exact decimal dollars, stored as an integer count of 1e-12 dollars.
// Per-token costs such as $0.00015 per 1K tokens do not exist in binary
// floating point; everything here stays in scaled integers.
class Usd {
public:
  static constexpr std::int64_t kScale = 1'000'000'000'000;  // pico-dollars per dollar
  static constexpr int kMaxFractionDigits = 12;

  Usd() = default;
  static Usd from_pico(std::int64_t pico) {
    Usd u;
    u.pico_ = pico;
    return u;
  }

  // Accepts [+-]digits[.digits], up to 12 fractional digits.
  static Usd parse(const std::string& text) {
    auto v = try_parse(text);
    if (!v) raise(Errc::ConfigError, "not a decimal amount: '" + text + "'");
    return *v;
  }

  static std::optional<Usd> try_parse(const std::string& text) {
    std::size_t i = 0;
    bool neg = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      neg = text[i] == '-';
      ++i;
    }
    if (i >= text.size()) return std::nullopt;
    std::int64_t whole = 0;
    bool any_digit = false;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      any_digit = true;
      if (whole > 9'000'000) return std::nullopt;  // keep whole*kScale in range
      whole = whole * 10 + (text[i] - '0');
    }
    std::int64_t frac = 0;
    int frac_digits = 0;
    if (i < text.size() && text[i] == '.') {
      ++i;
      for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
        any_digit = true;
        if (++frac_digits > kMaxFractionDigits) return std::nullopt;
        frac = frac * 10 + (text[i] - '0');
      }
    }
    if (!any_digit || i != text.size()) return std::nullopt;
    for (int d = frac_digits; d < kMaxFractionDigits; ++d) frac *= 10;
    std::int64_t pico = whole * kScale + frac;
    return from_pico(neg ? -pico : pico);
  }

  std::int64_t pico() const { return pico_; }

  Usd& operator+=(Usd o) {
    pico_ += o.pico_;
    return *this;
  }
  friend Usd operator+(Usd a, Usd b) { return from_pico(a.pico_ + b.pico_); }
  friend bool operator==(Usd a, Usd b) { return a.pico_ == b.pico_; }
  friend bool operator!=(Usd a, Usd b) { return a.pico_ != b.pico_; }
  friend bool operator<(Usd a, Usd b) { return a.pico_ < b.pico_; }

  // tokens * (price per 1K tokens) / 1000, exact. Requires the price to carry
  // at most 9 fractional digits so the division leaves no remainder.
  static Usd per_token_cost(std::int64_t tokens, Usd price_per_1k) {
    __int128 p = static_cast<__int128>(tokens) * price_per_1k.pico_;
    if (p % 1000 != 0)
      raise(Errc::ConfigError, "price has more than 9 fractional digits; per-token cost inexact");
    p /= 1000;
    if (p > INT64_MAX || p < INT64_MIN) raise(Errc::ConfigError, "cost out of range");
    return from_pico(static_cast<std::int64_t>(p));
  }

  // Canonical text: no exponent, trailing zeros trimmed, at least "0".
  std::string str() const {
    std::int64_t v = pico_;
    std::string sign;
    if (v < 0) {
      sign = "-";
      v = -v;
    }
    std::int64_t whole = v / kScale;
    std::int64_t frac = v % kScale;
    std::string out = sign + std::to_string(whole);
    if (frac != 0) {
      std::string f = std::to_string(frac);
      f.insert(f.begin(), kMaxFractionDigits - static_cast<int>(f.size()), '0');
      while (!f.empty() && f.back() == '0') f.pop_back();
      out += "." + f;
    }
    return out;
  }

private:
  std::int64_t pico_ = 0;
};

}  // namespace mdtoc
