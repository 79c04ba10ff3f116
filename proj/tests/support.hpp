#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sweepkit/expr.hpp"
#include "sweepkit/geometry.hpp"
#include "sweepkit/implicit_manifold.hpp"

namespace testing_support
{

using namespace sweepkit::geometry;

inline Vector vec(std::initializer_list<double> values)
{
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values)
    v[i++] = x;
  return v;
}

inline std::shared_ptr<ImplicitSubmanifold> implicit_curve(const std::string& equality)
{
  sweepkit::expr::Symbols symbols{2, {}};
  std::vector<sweepkit::expr::Expression> eqs{sweepkit::expr::Expression::compile(equality, symbols)};
  return std::make_shared<ImplicitSubmanifold>(2, std::move(eqs));
}

inline std::shared_ptr<ImplicitSubmanifold> unit_circle() { return implicit_curve("x1^2 + x2^2 - 1"); }

/// A base point for each backend that is away from any special locus.
inline Point base_point(const Manifold& m)
{
  switch (m.kind())
  {
    case ManifoldKind::euclidean: return m.point(Vector::Constant(m.ambient_dimension(), 0.2));
    case ManifoldKind::sphere: return m.point(vec({0.0, 0.6, 0.8}));
    case ManifoldKind::hyperbolic: return m.snap(vec({0.0, 0.3, -0.4}));
    case ManifoldKind::implicit: return m.snap(vec({1.0, 0.0}));
  }
  return m.snap(Vector::Zero(m.ambient_dimension()));
}

}  // namespace testing_support
