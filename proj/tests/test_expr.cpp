#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mfjp/error.hpp"
#include "mfjp/expr.hpp"

using namespace mfjp;

namespace {
const std::vector<std::string> kUpDown{"down", "up"};

double eval(const char* text, std::vector<double> xi) {
  return RateExpr::parse(text, kUpDown)(xi);
}
}  // namespace

TEST_CASE("constants and arithmetic") {
  CHECK(eval("1.0", {0.3, 0.7}) == 1.0);
  CHECK(eval("1.0", {1.0, 0.0}) == 1.0);
  CHECK(eval("2+3*4", {0.5, 0.5}) == 14.0);
  CHECK(eval("(2+3)*4", {0.5, 0.5}) == 20.0);
  CHECK(eval("8/4/2", {0.5, 0.5}) == 1.0);
  CHECK(eval("10-4-3", {0.5, 0.5}) == 3.0);
  CHECK(eval("-2*-3", {0.5, 0.5}) == 6.0);
  CHECK(eval("1.5e2", {0.5, 0.5}) == 150.0);
  CHECK(eval(".25E-1", {0.5, 0.5}) == 0.025);
  CHECK(eval("min(3, 2) + max(1, 4)", {0.5, 0.5}) == 6.0);
}

TEST_CASE("simplex variables") {
  CHECK(eval("exp(1.5*(2*xi[up]-1))", {0.5, 0.5}) == 1.0);
  CHECK(eval("exp(1.5*(2*xi[up]-1))", {0.0, 1.0}) == doctest::Approx(std::exp(1.5)));
  CHECK(eval("xi[down] - xi[up]", {0.25, 0.75}) == -0.5);
  CHECK(eval("log(xi[down])", {0.5, 0.5}) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("syntax errors carry a position") {
  try {
    (void)RateExpr::parse("1 + * 2", kUpDown);
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Syntax);
    CHECK(std::string(e.what()).find("position") != std::string::npos);
  }
  CHECK_THROWS_AS((void)RateExpr::parse("exp(1", kUpDown), Error);
  CHECK_THROWS_AS((void)RateExpr::parse("", kUpDown), Error);
  CHECK_THROWS_AS((void)RateExpr::parse("2 3", kUpDown), Error);
  CHECK_THROWS_AS((void)RateExpr::parse("min(1)", kUpDown), Error);
  CHECK_THROWS_AS((void)RateExpr::parse("sin(1)", kUpDown), Error);
}

TEST_CASE("unknown labels are rejected") {
  try {
    (void)RateExpr::parse("xi[left]", kUpDown);
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownLabel);
  }
}

TEST_CASE("parameter substitution") {
  const std::map<std::string, double> params{{"beta", 1.5}, {"h", 0.1}};
  const std::string text = substitute_params("exp(beta*(2*xi[up]-1)+h)", params);
  CHECK(text.find("beta") == std::string::npos);
  CHECK(eval(text.c_str(), {0.5, 0.5}) == doctest::Approx(std::exp(0.1)));
  // labels inside brackets are untouched even when they collide with a parameter
  const std::vector<std::string> labels{"h", "t"};
  const auto e = RateExpr::parse(substitute_params("h*xi[h]", params), labels);
  CHECK(e(std::vector<double>{0.4, 0.6}) == doctest::Approx(0.04));
}

TEST_CASE("print and reparse round trip at random points") {
  const std::vector<std::string> labels{"a", "b", "c"};
  const char* sources[] = {
      "exp(1.5*(2*xi[b]-1)+0.1)",
      "1 + 2*xi[a] - xi[c]/3",
      "min(xi[a], 0.2) + max(-xi[b], 1e-3) * 7.25",
      "-(-xi[a]) - -2.5 + log(1 + xi[c])",
      "0.1/(1+xi[a]*xi[b]) - (xi[c] - 0.3) * (xi[c] - 0.3)",
  };
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> expo(1.0);
  for (const char* src : sources) {
    const auto e1 = RateExpr::parse(src, labels);
    const auto e2 = RateExpr::parse(e1.to_string(), labels);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> xi{expo(rng), expo(rng), expo(rng)};
      const double s = xi[0] + xi[1] + xi[2];
      for (double& v : xi) v /= s;
      const double a = e1(xi);
      const double b = e2(xi);
      CHECK(std::abs(a - b) <= 1e-15 * std::max(1.0, std::abs(a)));
    }
  }
}
