#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "sweepkit/errors.hpp"
#include "sweepkit/expr.hpp"

using sweepkit::ParseError;
using sweepkit::expr::Expression;
using sweepkit::expr::Symbols;

namespace
{

Expression compile(const char* text, int dim = 2, std::map<std::string, double> constants = {})
{
  return Expression::compile(text, Symbols{dim, std::move(constants)});
}

}  // namespace

TEST(Expression, EvaluatesArithmeticWithPrecedence)
{
  const auto e = compile("1 + 2*3 - 4/2 + 2^3^2 - -1");
  const std::array<double, 2> x{0.0, 0.0};
  EXPECT_DOUBLE_EQ(e(x, 0.0), 1 + 6 - 2 + 512 + 1);
}

TEST(Expression, CoordinatesTimeAndConstants)
{
  const auto e = compile("x1*x2 + omega*t + pi", 2, {{"omega", 0.3}});
  const std::array<double, 2> x{2.0, 5.0};
  EXPECT_NEAR(e(x, 10.0), 10.0 + 3.0 + std::numbers::pi, 1e-14);
  EXPECT_TRUE(e.depends_on_time());
  EXPECT_FALSE(compile("x1").depends_on_time());
}

TEST(Expression, GradientMatchesHandDerivative)
{
  const auto e = compile("x1^2*sin(x2) + exp(x1)/x2 + sqrt(x1)");
  const std::array<double, 2> x{1.3, 0.7};
  std::array<double, 2> g{};
  e.gradient(x, 0.0, g);
  const double a = x[0], b = x[1];
  EXPECT_NEAR(g[0], 2 * a * std::sin(b) + std::exp(a) / b + 0.5 / std::sqrt(a), 1e-12);
  EXPECT_NEAR(g[1], a * a * std::cos(b) - std::exp(a) / (b * b), 1e-12);
}

TEST(Expression, HessianFormByPolarization)
{
  // H = [[2 x2, 2 x1], [2 x1, 0]] for x1^2 x2
  const auto e = compile("x1^2*x2");
  const std::array<double, 2> x{0.5, 3.0};
  const std::array<double, 2> a{1.0, 2.0};
  const std::array<double, 2> b{-1.0, 0.5};
  const double expected = a[0] * (2 * x[1] * b[0] + 2 * x[0] * b[1]) + a[1] * (2 * x[0] * b[0]);
  EXPECT_NEAR(e.hessian_form(x, 0.0, a, b), expected, 1e-12);
}

TEST(Expression, DirectionalJetSecondDerivative)
{
  const auto e = compile("cos(x1) * log(x2) + tan(x1)");
  const std::array<double, 2> x{0.4, 2.0};
  const std::array<double, 2> d{0.3, -0.2};
  const auto f = [&](double s) {
    const std::array<double, 2> p{x[0] + s * d[0], x[1] + s * d[1]};
    return e(p, 0.0);
  };
  const auto j = e.jet(x, 0.0, d);
  const double h = 1e-4;
  EXPECT_NEAR(j.value, f(0.0), 1e-15);
  EXPECT_NEAR(j.d1, (f(h) - f(-h)) / (2 * h), 1e-8);
  EXPECT_NEAR(j.d2, (f(h) - 2 * f(0.0) + f(-h)) / (h * h), 1e-5);
}

TEST(Expression, TimeDerivative)
{
  const auto e = compile("x1*sin(2*t)");
  const std::array<double, 2> x{3.0, 0.0};
  EXPECT_NEAR(e.time_derivative(x, 0.25), 3.0 * 2.0 * std::cos(0.5), 1e-13);
}

TEST(Expression, PowerWithVariableExponent)
{
  const auto e = compile("x1^x2");
  const std::array<double, 2> x{2.0, 3.0};
  std::array<double, 2> g{};
  e.gradient(x, 0.0, g);
  EXPECT_NEAR(e(x, 0.0), 8.0, 1e-14);
  EXPECT_NEAR(g[0], 3.0 * 4.0, 1e-12);
  EXPECT_NEAR(g[1], 8.0 * std::log(2.0), 1e-12);
}

TEST(Expression, ErrorsCarryColumn)
{
  try
  {
    compile("x1 + y");
    FAIL() << "expected a parse error";
  }
  catch (const ParseError& e)
  {
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 6);
  }
  EXPECT_THROW(compile("x3"), ParseError);
  EXPECT_THROW(compile("(x1 + 1"), ParseError);
  EXPECT_THROW(compile("x1 +"), ParseError);
  EXPECT_THROW(compile("sin x1"), ParseError);
  EXPECT_THROW(compile(""), ParseError);
}
