#include <doctest.h>

#include <cstdint>
#include <limits>

#include "veriflow/rational.hpp"
#include "veriflow/rng.hpp"

using veriflow::OverflowError;
using veriflow::Rational;

TEST_CASE("rational normalizes sign and lowest terms") {
  Rational r(6, -4);
  CHECK(r.num() == -3);
  CHECK(r.den() == 2);
  CHECK(Rational(0, -7) == Rational(0));
  CHECK(Rational(0, -7).den() == 1);
  CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
}

TEST_CASE("rational arithmetic") {
  Rational a(1, 2), b(1, 3);
  CHECK(a + b == Rational(5, 6));
  CHECK(a - b == Rational(1, 6));
  CHECK(a * b == Rational(1, 6));
  CHECK(a / b == Rational(3, 2));
  CHECK(-a == Rational(-1, 2));
  CHECK(Rational(-3, 4).reciprocal() == Rational(-4, 3));
  CHECK(a > b);
  CHECK(Rational(-1, 2) < Rational(-1, 3));
}

TEST_CASE("rational parse and str round-trip") {
  CHECK(Rational::parse("-3/6") == Rational(-1, 2));
  CHECK(Rational::parse("+7") == Rational(7));
  CHECK(Rational(5, 1).str() == "5");
  CHECK(Rational(-5, 3).str() == "-5/3");
  CHECK_THROWS_AS(Rational::parse("1/"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("x"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse(""), std::invalid_argument);

  veriflow::Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    auto n = static_cast<std::int64_t>(rng.below(2001)) - 1000;
    auto d = static_cast<std::int64_t>(rng.below(1000)) + 1;
    Rational r(n, d);
    CHECK(Rational::parse(r.str()) == r);
  }
}

TEST_CASE("rational overflow throws instead of wrapping") {
  const std::int64_t big = std::numeric_limits<std::int64_t>::max();
  CHECK_THROWS_AS(Rational(big) + Rational(1), OverflowError);
  CHECK_THROWS_AS(Rational(big) * Rational(2), OverflowError);
  CHECK_THROWS_AS(-Rational(std::numeric_limits<std::int64_t>::min()), OverflowError);
  CHECK(Rational(big) * Rational(1, big) == Rational(1));
}
