#include "cm4fq/rational.hpp"

#include <doctest.h>

using namespace cm4fq;

TEST_CASE("rational parsing") {
  CHECK(parse_rational("7") == Rat(7));
  CHECK(parse_rational("-3/4") == Rat(-3, 4));
  CHECK(parse_rational("0.0096") == Rat(96, 10000));
  CHECK(parse_rational("2.5") == Rat(5, 2));
  CHECK(parse_rational(" 1 / 8 ") == Rat(1, 8));
  CHECK(parse_rational("-0.25") == Rat(-1, 4));
  CHECK_THROWS(parse_rational(""));
  CHECK_THROWS(parse_rational("1/0"));
}

TEST_CASE("decimal rendering is deterministic long division") {
  CHECK(to_decimal_string(Rat(1, 3)) == "0.333333333333");
  CHECK(to_decimal_string(Rat(5, 2)) == "2.5");
  CHECK(to_decimal_string(Rat(0)) == "0");
  CHECK(to_decimal_string(Rat(-7, 8)) == "-0.875");
  CHECK(to_decimal_string(Rat(1250000)) == "1250000");
  CHECK(to_decimal_string(Rat(96, 10000)) == "0.0096");
  CHECK(to_fraction_string(Rat(7, 3)) == "7/3");
  CHECK(to_fraction_string(Rat(4)) == "4");
}

TEST_CASE("work level ordering treats infinity as top") {
  WorkLevel inf = WorkLevel::infinity();
  WorkLevel five{Rat(5)};
  WorkLevel three{Rat(3)};
  CHECK(three < five);
  CHECK(five < inf);
  CHECK(inf == WorkLevel::infinity());
  CHECK(inf > five);
  CHECK_FALSE(inf < inf);
  CHECK(five >= Rat(5));
  CHECK_THROWS(inf.value());
}
