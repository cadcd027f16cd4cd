#include <random>
#include <set>

#include "doctest.h"
#include "g24_oracle.hpp"
#include "mdtoc/game24.hpp"

using namespace mdtoc;
using mdtoc_test::solvable_by_reduction;

TEST_CASE("rational arithmetic is exact") {
  Rational r = Rational(8) / (Rational(3) - Rational(8) / Rational(3));
  CHECK(r == Rational(24));
  CHECK((Rational(1) / Rational(3)).str() == "1/3");
  CHECK((Rational(2, 4)).str() == "1/2");
  CHECK_FALSE((Rational(1) / Rational(0)).valid());
  CHECK((Rational(5) - Rational(5)).str() == "0");
}

TEST_CASE("checker accepts exact solutions") {
  CHECK(check_game24(Game24Puzzle::of(4, 6, 1, 1), "6*4*1*1").ok);
  // needs exact rationals: 8/(3-8/3) = 8/(1/3) = 24; floats cannot certify it
  CHECK(check_game24(Game24Puzzle::of(3, 3, 8, 8), "8/(3-8/3)").ok);
  CHECK(check_game24(Game24Puzzle::of(2, 3, 5, 12), "12/(3-5/2)").ok);
  CHECK(check_game24(Game24Puzzle::of(4, 6, 1, 1), " ( 6 * 4 ) * ( 1 * 1 ) ").ok);
}

TEST_CASE("checker diagnostics name the first violated condition") {
  Game24Check miss = check_game24(Game24Puzzle::of(4, 6, 1, 1), "6*4");
  CHECK_FALSE(miss.ok);
  CHECK(miss.diagnostic == "unused numbers {1,1}");

  Game24Check extra = check_game24(Game24Puzzle::of(4, 6, 1, 1), "6*4*1*1*2");
  CHECK_FALSE(extra.ok);
  CHECK(extra.diagnostic.find("extra numbers {2}") != std::string::npos);

  Game24Check wrong = check_game24(Game24Puzzle::of(4, 6, 1, 1), "6+4+1+1");
  CHECK_FALSE(wrong.ok);
  CHECK(wrong.diagnostic == "value is 12, not 24");

  Game24Check div0 = check_game24(Game24Puzzle::of(4, 6, 1, 1), "6/(4-4)*1*1");
  CHECK_FALSE(div0.ok);  // wrong multiset reported first
  CHECK(div0.diagnostic.find("numbers") != std::string::npos);
  Game24Check div0b = check_game24(Game24Puzzle::of(4, 6, 1, 1), "6/(1-1)+4");
  CHECK_FALSE(div0b.ok);
  CHECK(div0b.diagnostic == "division by zero");
}

TEST_CASE("malformed expressions raise ParseError") {
  Game24Puzzle p = Game24Puzzle::of(4, 6, 1, 1);
  CHECK_THROWS_AS(check_game24(p, "6**4"), Error);
  CHECK_THROWS_AS(check_game24(p, "(6*4"), Error);
  CHECK_THROWS_AS(check_game24(p, "6*4)"), Error);
  CHECK_THROWS_AS(check_game24(p, "-6*4"), Error);  // unary minus is not in the grammar
  CHECK_THROWS_AS(check_game24(p, "x*4"), Error);
  CHECK_THROWS_AS(check_game24(p, ""), Error);
  try {
    check_game24(p, "6**4");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
  }
}

TEST_CASE("checker is invariant to whitespace and redundant parentheses") {
  Game24Puzzle p = Game24Puzzle::of(3, 3, 8, 8);
  const char* variants[] = {"8/(3-8/3)", " 8 / ( 3 - 8 / 3 ) ", "((8))/((3)-((8)/(3)))",
                            "8/((3-8/3))"};
  for (const char* v : variants) CHECK(check_game24(p, v).ok);
  // unicode operator spellings fold to ASCII
  CHECK(check_game24(Game24Puzzle::of(4, 6, 1, 1), "6\xC3\x97"
                                                   "4\xC3\x97"
                                                   "1\xC3\x97"
                                                   "1")
            .ok);
}

TEST_CASE("brute force finds witnesses that the checker certifies") {
  auto w = solve_game24_bruteforce(Game24Puzzle::of(4, 6, 1, 1));
  REQUIRE(w.has_value());
  CHECK(check_game24(Game24Puzzle::of(4, 6, 1, 1), *w).ok);

  auto hard = solve_game24_bruteforce(Game24Puzzle::of(3, 3, 8, 8));
  REQUIRE(hard.has_value());
  CHECK(check_game24(Game24Puzzle::of(3, 3, 8, 8), *hard).ok);

  CHECK_FALSE(solve_game24_bruteforce(Game24Puzzle::of(1, 1, 1, 1)).has_value());
}

TEST_CASE("brute force is deterministic") {
  auto a = solve_game24_bruteforce(Game24Puzzle::of(2, 3, 5, 12));
  auto b = solve_game24_bruteforce(Game24Puzzle::of(12, 5, 3, 2));  // order-insensitive
  REQUIRE(a.has_value());
  CHECK(*a == *b);
}

TEST_CASE("solver and the independent reduction oracle agree on random puzzles") {
  std::mt19937 rng(4242);
  int solvable_seen = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Game24Puzzle p = Game24Puzzle::of(1 + rng() % 9, 1 + rng() % 9, 1 + rng() % 9, 1 + rng() % 9);
    auto witness = solve_game24_bruteforce(p);
    CHECK(witness.has_value() == solvable_by_reduction(p));
    if (witness) {
      ++solvable_seen;
      CHECK(check_game24(p, *witness).ok);
    }
  }
  CHECK(solvable_seen > 0);  // the sample is not degenerate
}
