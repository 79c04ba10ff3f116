#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sweepkit::expr
{

/// Second-order Taylor jet of a scalar along a line x + s*d:
/// value, first and second derivative with respect to s at s = 0.
struct Jet
{
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Names an expression may reference. Coordinates are x1..x<dimension>;
/// `t` is time; every entry of `constants` is substituted at compile time.
struct Symbols
{
  int dimension = 0;
  std::map<std::string, double> constants;
};

/// An arithmetic expression compiled to a postfix tape.
///
/// Grammar: sums, products, quotients, unary minus, right-associative `^`,
/// numeric literals, the functions sin cos tan exp log sqrt, the constant
/// `pi`, coordinates x1..xn and time t. Derivatives are taken in forward
/// mode by evaluating the tape over `Jet` values.
class Expression
{
public:
  Expression() = default;

  /// Throws ParseError (line 1, column of the offending character).
  static Expression compile(std::string_view text, const Symbols& symbols);

  const std::string& source() const { return source_; }
  int dimension() const { return dimension_; }
  bool depends_on_time() const { return uses_time_; }

  double operator()(std::span<const double> x, double t) const;

  /// Value plus first and second directional derivatives along `direction`
  /// (a vector over the coordinates; time is held fixed).
  Jet jet(std::span<const double> x, double t, std::span<const double> direction) const;

  /// Ambient gradient with respect to x1..xn, one forward pass per coordinate.
  void gradient(std::span<const double> x, double t, std::span<double> out) const;

  /// a^T H b for the coordinate Hessian H, by polarization of two jets.
  double hessian_form(std::span<const double> x, double t, std::span<const double> a,
                      std::span<const double> b) const;

  /// Partial derivative with respect to t.
  double time_derivative(std::span<const double> x, double t) const;

  enum class Op : unsigned char
  {
    constant,
    variable,
    time,
    add,
    sub,
    mul,
    div,
    neg,
    pow_const,
    pow,
    sin,
    cos,
    tan,
    exp,
    log,
    sqrt
  };

  struct Instruction
  {
    Op op;
    int slot = 0;
    double value = 0.0;
  };

private:
  template <class Scalar, class Load>
  Scalar run(Load&& load) const;

  std::string source_;
  std::vector<Instruction> tape_;
  int dimension_ = 0;
  int max_stack_ = 0;
  bool uses_time_ = false;
};

}  // namespace sweepkit::expr
