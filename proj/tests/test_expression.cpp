#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "uctl/expression.hpp"

using uctl::Expression;
using Catch::Matchers::WithinRel;

TEST_CASE("expression precedence and associativity", "[expression]") {
  CHECK(Expression::compile("1+2*3", {})({}) == 7.0);
  CHECK(Expression::compile("(1+2)*3", {})({}) == 9.0);
  CHECK(Expression::compile("2^3^2", {})({}) == 512.0);
  CHECK(Expression::compile("-2^2", {})({}) == -4.0);
  CHECK(Expression::compile("8/4/2", {})({}) == 1.0);
  CHECK(Expression::compile("1 - 2 - 3", {})({}) == -4.0);
  CHECK(Expression::compile("2e-1 * 10", {})({}) == 2.0);
}

TEST_CASE("expression variables, constants and functions", "[expression]") {
  const auto k = Expression::compile("2/x^2", {"x"});
  CHECK(k({0.5}) == 8.0);
  const auto n = Expression::compile("r^2/(2+r^2)", {"r"});
  CHECK_THAT(n({1.0}), WithinRel(1.0 / 3.0, 1e-15));
  const auto beta = Expression::compile("R*exp(-t/2)", {"R", "t"});
  CHECK_THAT(beta({2.0, 2.0}), WithinRel(2.0 * std::exp(-1.0), 1e-15));
  CHECK(Expression::compile("log(phi)", {})({}) == std::log(std::numbers::phi));
  CHECK(Expression::compile("pi", {})({}) == std::numbers::pi);
  CHECK(Expression::compile("sign(x)", {"x"})({-3.0}) == -1.0);
  CHECK(Expression::compile("sign(x)", {"x"})({0.0}) == 0.0);
  CHECK(Expression::compile("max(abs(x), min(1, 2))", {"x"})({-5.0}) == 5.0);
  CHECK(Expression::compile("pow(x, 3)", {"x"})({2.0}) == 8.0);
  CHECK(Expression::compile("sqrt(x)+tanh(0)+atan(0)+sin(0)+cos(0)+tan(0)", {"x"})({4.0}) == 3.0);
}

TEST_CASE("expression errors", "[expression]") {
  CHECK_THROWS_AS(Expression::compile("", {}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("1+", {}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("(1", {}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("y", {"x"}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("foo(1)", {}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("max(1)", {}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("1 2", {}), uctl::ConfigError);
  CHECK_THROWS_AS(Expression::compile("x", {"x"})({}), uctl::DomainError);
}
