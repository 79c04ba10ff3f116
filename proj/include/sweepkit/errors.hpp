#pragma once

#include <stdexcept>
#include <string>

namespace sweepkit
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Inputs that are inconsistent with each other: mixing backends, a tangent
/// vector used at the wrong base point, an empty constraint set.
class StructuralError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "structural"; }
};

/// A value lies outside the region where an operation is defined.
class DomainError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

/// An iterative method failed to reach its tolerance.
class NumericError : public Error
{
public:
  NumericError(const std::string& what, double residual)
    : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual)
  {
  }
  const char* kind() const noexcept override { return "numeric"; }
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// Malformed text: expressions or scenario files. Positions are 1-based.
class ParseError : public Error
{
public:
  ParseError(const std::string& what, int line, int column)
    : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
      line_(line),
      column_(column)
  {
  }
  const char* kind() const noexcept override { return "parse"; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

private:
  int line_;
  int column_;
};

/// A scenario that parses but violates one of its invariants.
class ValidationError : public Error
{
public:
  ValidationError(std::string invariant, const std::string& what)
    : Error(invariant + ": " + what), invariant_(std::move(invariant))
  {
  }
  const char* kind() const noexcept override { return "validation"; }
  const std::string& invariant() const noexcept { return invariant_; }

private:
  std::string invariant_;
};

}  // namespace sweepkit
