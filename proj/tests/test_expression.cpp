#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <thread>

#include "ctrw/expression.hpp"

using Catch::Matchers::WithinRel;
using ctrw::Expression;

TEST_CASE("arithmetic precedence and associativity", "[expression]") {
  CHECK(Expression("1 + 2 * 3", {})(0.0) == 7.0);
  CHECK(Expression("(1 + 2) * 3", {})(0.0) == 9.0);
  CHECK(Expression("2 ^ 3 ^ 2", {})(0.0) == 512.0);
  CHECK(Expression("-2 ^ 2", {})(0.0) == -4.0);
  CHECK(Expression("8 / 4 / 2", {})(0.0) == 1.0);
  CHECK(Expression("10 - 4 - 3", {})(0.0) == 3.0);
  CHECK(Expression("1e-3 * 2", {})(0.0) == 0.002);
}

TEST_CASE("variables and functions", "[expression]") {
  const Expression p("0.5 + 0.2 / (i + 1)", {"i"});
  CHECK(p(0.0) == 0.7);
  CHECK_THAT(p(4.0), WithinRel(0.54, 1e-15));

  const Expression f("max(min(x, 2), -1) + exp(log(3)) + sqrt(16) + abs(-1) + log1p(0) + expm1(0)", {"x"});
  CHECK_THAT(f(5.0), WithinRel(2.0 + 3.0 + 4.0 + 1.0, 1e-15));
  CHECK_THAT(Expression("sin(pi / 2) + cos(0) + pow(2, 10)", {})(0.0), WithinRel(1026.0, 1e-15));
  CHECK_THAT(Expression("erfc(0)", {})(0.0), WithinRel(1.0, 1e-15));

  const Expression two("x * y - 1", {"x", "y"});
  const std::array<double, 2> xy{3.0, 4.0};
  CHECK(two.evaluate(xy) == 11.0);
}

TEST_CASE("malformed expressions are rejected at compile time", "[expression]") {
  CHECK_THROWS_AS(Expression("1 +", {}), ctrw::ValidationError);
  CHECK_THROWS_AS(Expression("(1 + 2", {}), ctrw::ValidationError);
  CHECK_THROWS_AS(Expression("j + 1", {"i"}), ctrw::ValidationError);
  CHECK_THROWS_AS(Expression("nosuch(1)", {}), ctrw::ValidationError);
  CHECK_THROWS_AS(Expression("min(1)", {}), ctrw::ValidationError);
  CHECK_THROWS_AS(Expression("1 2", {}), ctrw::ValidationError);
  CHECK_THROWS_AS(Expression{}(1.0), ctrw::ArgumentError);
}

TEST_CASE("concurrent evaluation gives identical results", "[expression]") {
  const Expression e("(i + 1) ^ -1.5 * exp(-i / 100)", {"i"});
  std::array<double, 4> sums{};
  std::array<std::thread, 4> pool;
  for (std::size_t t = 0; t < pool.size(); ++t) {
    pool[t] = std::thread([&, t] {
      double s = 0.0;
      for (int i = 0; i < 20000; ++i) s += e(i);
      sums[t] = s;
    });
  }
  for (auto& th : pool) th.join();
  for (double s : sums) CHECK(s == sums[0]);
}
