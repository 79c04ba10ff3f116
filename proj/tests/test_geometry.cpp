#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sweepkit/errors.hpp"
#include "support.hpp"

using namespace testing_support;
using sweepkit::DomainError;
using sweepkit::StructuralError;

namespace
{

constexpr double pi = std::numbers::pi;

// Rodrigues rotation: transport along a great circle is the rotation about
// the circle's axis that carries p to q.
Vector rotate(const Vector& v, const Vector& axis, double angle)
{
  const Eigen::Vector3d k = axis.normalized();
  const Eigen::Vector3d w = v;
  return w * std::cos(angle) + k.cross(w) * std::sin(angle) + k * k.dot(w) * (1 - std::cos(angle));
}

Vector great_circle_transport(const Vector& p, const Vector& q, const Vector& v)
{
  const Eigen::Vector3d a = p, b = q;
  return rotate(v, a.cross(b), std::acos(std::clamp(a.dot(b), -1.0, 1.0)));
}

// Geodesic of the unit circle by fixed-step RK4 on x'' = -|x'|^2 x / |x|^2.
Vector circle_geodesic_rk4(Vector x, Vector v, int steps)
{
  const auto accel = [](const Vector& p, const Vector& u) -> Vector {
    return -u.squaredNorm() * p / p.squaredNorm();
  };
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i)
  {
    const Vector k1x = v, k1v = accel(x, v);
    const Vector k2x = v + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v);
    const Vector k3x = v + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v);
    const Vector k4x = v + h * k3v, k4v = accel(x + h * k3x, v + h * k3v);
    x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return x;
}

double ellipse_curvature(const Vector& p)
{
  // x = 2 cos s, y = sin s: kappa = ab / (a^2 sin^2 s + b^2 cos^2 s)^{3/2}
  const double s = std::atan2(p[1], p[0] / 2.0);
  return 2.0 / std::pow(4.0 * std::sin(s) * std::sin(s) + std::cos(s) * std::cos(s), 1.5);
}

}  // namespace

TEST(Euclidean, DistanceExpLogTransport)
{
  const Euclidean r2(2);
  const Point o = r2.point(vec({0, 0}));
  const Point p = r2.point(vec({3, 4}));
  EXPECT_DOUBLE_EQ(r2.distance(o, p), 5.0);
  EXPECT_TRUE(r2.log(o, p).components.isApprox(vec({3, 4})));
  const Tangent v = r2.tangent(o, vec({0.5, -1}));
  EXPECT_EQ(r2.transport(o, p, v).components, v.components);
  EXPECT_TRUE(r2.exp(o, v).coords.isApprox(vec({0.5, -1})));
  EXPECT_TRUE(r2.grad_sq_distance(o, r2.point(vec({1, 1}))).components.isApprox(vec({-2, -2})));
}

TEST(Euclidean, BudgetUsesCeiling)
{
  const Euclidean r3(3);
  const auto b = r3.budget(Ball{r3.point(Vector::Zero(3)), 1.0});
  EXPECT_EQ(b.curvature_bound, 0.0);
  EXPECT_EQ(b.rho, 1e6);
  EXPECT_FALSE(b.estimated);
}

TEST(Sphere, QuarterArc)
{
  const Sphere s2(2);
  const Point north = s2.point(vec({0, 0, 1}));
  const Point east = s2.point(vec({1, 0, 0}));
  EXPECT_NEAR(s2.distance(north, east), pi / 2, 1e-15);
  const Tangent v = s2.tangent(north, vec({pi / 2, 0, 0}));
  EXPECT_LT((s2.exp(north, v).coords - east.coords).norm(), 1e-15);
  EXPECT_LT((s2.log(north, east).components - v.components).norm(), 1e-15);
}

TEST(Sphere, TransportOfLogIsMinusReverseLog)
{
  const Sphere s2(2);
  const Point x = s2.point(vec({0, 0, 1}));
  const Point y = s2.point(vec({1, 0, 0}));
  const Tangent moved = s2.transport(x, y, s2.log(x, y));
  EXPECT_LT((moved.components - vec({0, 0, -pi / 2})).norm(), 1e-14);
  EXPECT_LT((moved.components + s2.log(y, x).components).norm(), 1e-14);
}

TEST(Sphere, OctantHolonomyRotatesByQuarterTurn)
{
  const Sphere s2(2);
  const Point a = s2.point(vec({0, 0, 1}));
  const Point b = s2.point(vec({1, 0, 0}));
  const Point c = s2.point(vec({0, 1, 0}));
  const Tangent start = s2.tangent(a, vec({1, 0, 0}));

  // Oracle: compose the three great-circle rotations.
  Vector oracle = great_circle_transport(a.coords, b.coords, start.components);
  oracle = great_circle_transport(b.coords, c.coords, oracle);
  oracle = great_circle_transport(c.coords, a.coords, oracle);

  const Tangent end = s2.transport(c, a, s2.transport(b, c, s2.transport(a, b, start)));
  EXPECT_LT((end.components - oracle).norm(), 1e-14);
  EXPECT_LT((end.components - vec({0, 1, 0})).norm(), 1e-14);
  EXPECT_NEAR(std::acos(start.components.dot(end.components)), pi / 2, 1e-14);
}

TEST(Sphere, BudgetIsHalfPi)
{
  const Sphere s2(2);
  const auto b = s2.budget(Ball{s2.point(vec({0, 0, 1})), 0.5});
  EXPECT_DOUBLE_EQ(b.rho, pi / 2);
  EXPECT_DOUBLE_EQ(b.curvature_bound, 1.0);
  EXPECT_GE(b.log_lipschitz, 1.0);
}

TEST(Sphere, RejectsOffSurfaceAndAntipodes)
{
  const Sphere s2(2);
  EXPECT_THROW(s2.point(vec({0, 0, 1.1})), DomainError);
  EXPECT_THROW(s2.point(vec({0, 1})), StructuralError);
  const Point n = s2.point(vec({0, 0, 1}));
  EXPECT_THROW(s2.log(n, s2.point(vec({0, 0, -1}))), DomainError);
  EXPECT_THROW(s2.tangent(n, vec({0, 0, 1})), DomainError);
}

TEST(Hyperbolic, DistanceMatchesAcoshFormula)
{
  const Hyperbolic h2(2);
  const Point x = h2.snap(vec({0, 0.3, -0.2}));
  const Point y = h2.snap(vec({0, -1.1, 0.7}));
  const double expected = std::acosh(-Hyperbolic::minkowski(x.coords, y.coords));
  EXPECT_NEAR(h2.distance(x, y), expected, 1e-12);
  const Tangent g = h2.log(x, y);
  EXPECT_NEAR(h2.norm(g), expected, 1e-12);
  EXPECT_LT((h2.exp(x, g).coords - y.coords).norm(), 1e-11);
}

TEST(Hyperbolic, GradientIsMinkowskiCorrected)
{
  // f(x) = x0 on the hyperboloid; the Riemannian gradient at the apex is zero
  // and elsewhere equals the projection of J grad.
  const Hyperbolic h2(2);
  const Point apex = h2.point(vec({1, 0, 0}));
  EXPECT_LT(h2.riemannian_gradient(apex, vec({1, 0, 0})).components.norm(), 1e-15);
  const Point x = h2.snap(vec({0, 0.5, 0}));
  const Tangent g = h2.riemannian_gradient(x, vec({1, 0, 0}));
  // directional derivative of x0 along a unit tangent u equals <g, u>
  const Tangent u = h2.tangent(x, h2.tangent_basis(x).col(0));
  EXPECT_NEAR(h2.inner(g, u), u.components[0], 1e-14);
}

TEST(Geometry, BackendAndBaseMismatchAreStructural)
{
  const Sphere a(2), b(2);
  const Point pa = a.point(vec({0, 0, 1}));
  const Point pb = b.point(vec({0, 0, 1}));
  EXPECT_THROW(a.distance(pa, pb), StructuralError);
  const Point qa = a.point(vec({1, 0, 0}));
  const Tangent v = a.tangent(pa, vec({1, 0, 0}));
  EXPECT_THROW(a.exp(qa, v), StructuralError);
  EXPECT_THROW(a.inner(v, a.zero(qa)), StructuralError);
  EXPECT_THROW(v + a.zero(qa), StructuralError);
}

TEST(Geometry, ExpBeyondRadiusIsDomainError)
{
  const Sphere s2(2);
  const Point n = s2.point(vec({0, 0, 1}));
  const Tangent v = s2.tangent(n, vec({1.0, 0, 0}));
  EXPECT_NO_THROW(s2.exp(n, v));
  const auto budget = s2.budget(Ball{n, 0.1});
  EXPECT_NO_THROW(s2.exp(n, v, budget));
  EXPECT_THROW(s2.exp(n, 2.0 * v, budget), DomainError);
  EXPECT_THROW(s2.log(n, s2.point(vec({0, 0.6, -0.8})), budget), DomainError);
}

TEST(Geometry, ZeroVectorIsIdentity)
{
  const Sphere s2(2);
  const auto circle = unit_circle();
  for (const Manifold* m : {static_cast<const Manifold*>(&s2), static_cast<const Manifold*>(circle.get())})
  {
    const Point x = base_point(*m);
    EXPECT_EQ(m->exp(x, m->zero(x)).coords, x.coords);
    EXPECT_EQ(m->log(x, x).components.norm(), 0.0);
    EXPECT_EQ(m->grad_sq_distance(x, x).components.norm(), 0.0);
  }
}

TEST(ImplicitCircle, QuarterArcDistance)
{
  const auto circle = unit_circle();
  const Point a = circle->point(vec({1, 0}));
  const Point b = circle->point(vec({0, 1}));
  // oracle: arc length of the independently integrated geodesic
  const Vector end = circle_geodesic_rk4(a.coords, vec({0, pi / 2}), 4000);
  ASSERT_LT((end - b.coords).norm(), 1e-12);
  EXPECT_NEAR(circle->distance(a, b), pi / 2, 1e-9);
}

TEST(ImplicitCircle, ExpMatchesIntegratedGeodesic)
{
  const auto circle = unit_circle();
  const Point x = circle->point(vec({1, 0}));
  const Tangent v = circle->tangent(x, vec({0, pi / 4}));
  const Vector oracle = circle_geodesic_rk4(x.coords, v.components, 4000);
  const Point y = circle->exp(x, v);
  EXPECT_LT((y.coords - oracle).norm(), 1e-11);
  EXPECT_LT((y.coords - vec({std::sqrt(0.5), std::sqrt(0.5)})).norm(), 1e-11);
  EXPECT_LE(circle->constraint_residual(y.coords), 1e-12);
}

TEST(ImplicitCircle, TransportRotatesWithTheCurve)
{
  const auto circle = unit_circle();
  const Point x = circle->point(vec({1, 0}));
  const Point y = circle->point(vec({0, 1}));
  const Tangent v = circle->tangent(x, vec({0, 0.3}));
  EXPECT_LT((circle->transport(x, y, v).components - vec({-0.3, 0})).norm(), 1e-10);
}

TEST(ImplicitEllipse, BudgetCurvatureMatchesAnalyticEllipse)
{
  const auto ellipse = implicit_curve("x1^2/4 + x2^2 - 1");
  const Point vertex = ellipse->point(vec({2, 0}));
  const auto b = ellipse->budget(Ball{vertex, 0.5});
  EXPECT_TRUE(b.estimated);
  // analytic maximum over the region is at the vertex itself
  EXPECT_NEAR(b.normal_curvature, 2.0, 1e-9);
  EXPECT_NEAR(b.curvature_bound, 4.0, 1e-8);
  EXPECT_NEAR(b.rho, pi / 4, 1e-9);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i)
  {
    const Point p = random_point_in_ball(*ellipse, Ball{vertex, 0.5}, rng);
    const Tangent u = random_unit_tangent(*ellipse, p, rng);
    EXPECT_NEAR(ellipse->normal_curvature(p, u), ellipse_curvature(p.coords), 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Property sweeps over all backends
// ---------------------------------------------------------------------------

struct BackendCase
{
  std::string name;
  std::shared_ptr<const Manifold> manifold;
  double inverse_tol;
  double norm_tol;
  double radius;
};

class GeometryProperties : public ::testing::TestWithParam<int>
{
protected:
  static BackendCase make(int which)
  {
    switch (which)
    {
      case 0: return {"euclidean", std::make_shared<Euclidean>(3), 1e-8, 1e-9, 2.0};
      case 1: return {"sphere", std::make_shared<Sphere>(2), 1e-8, 1e-9, 0.9 * pi / 2};
      case 2: return {"hyperbolic", std::make_shared<Hyperbolic>(2), 1e-8, 1e-9, 0.9 * pi / 2};
      default: return {"implicit", unit_circle(), 1e-5, 1e-5, 0.9 * pi / 2};
    }
  }
};

TEST_P(GeometryProperties, ExpLogTransportIdentities)
{
  const BackendCase c = make(GetParam());
  const Manifold& m = *c.manifold;
  std::mt19937_64 rng(1234 + GetParam());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Point centre = base_point(m);
  const int samples = m.kind() == ManifoldKind::implicit ? 40 : 200;
  for (int i = 0; i < samples; ++i)
  {
    const Point x = random_point_in_ball(m, Ball{centre, 0.5}, rng);
    const Tangent v = (0.9 * c.radius * unit(rng)) * random_unit_tangent(m, x, rng);
    const Point y = m.exp(x, v);
    const Tangent g = m.log(x, y);
    EXPECT_LT(m.norm(g - v), c.inverse_tol) << c.name;
    EXPECT_NEAR(m.norm(g), m.distance(x, y), c.norm_tol) << c.name;
    EXPECT_NEAR(m.distance(x, y), m.norm(v), c.norm_tol) << c.name;

    const Tangent w = unit(rng) * random_unit_tangent(m, x, rng);
    const Tangent moved = m.transport(x, y, w);
    EXPECT_NEAR(m.norm(moved), m.norm(w), 1e-10 * std::max(1.0, m.norm(w))) << c.name;
    EXPECT_LT(m.norm(m.transport(x, y, g) + m.log(y, x)), 1e-8) << c.name;
  }
}

TEST_P(GeometryProperties, TransportIsLinear)
{
  const BackendCase c = make(GetParam());
  const Manifold& m = *c.manifold;
  std::mt19937_64 rng(99);
  const Point x = base_point(m);
  const Point y = m.exp(x, 0.7 * random_unit_tangent(m, x, rng));
  const Tangent a = random_unit_tangent(m, x, rng);
  const Tangent b = 0.3 * random_unit_tangent(m, x, rng);
  const Tangent lhs = m.transport(x, y, 2.0 * a + b);
  const Tangent rhs = 2.0 * m.transport(x, y, a) + m.transport(x, y, b);
  EXPECT_LT((lhs.components - rhs.components).norm(), 1e-9);
}

TEST_P(GeometryProperties, GradientOfSquaredDistanceMatchesFiniteDifferences)
{
  const BackendCase c = make(GetParam());
  const Manifold& m = *c.manifold;
  std::mt19937_64 rng(4321 + GetParam());
  const Point centre = base_point(m);
  const int samples = m.kind() == ManifoldKind::implicit ? 20 : 100;
  const double eps = 1e-5;
  for (int i = 0; i < samples; ++i)
  {
    const Point x = random_point_in_ball(m, Ball{centre, 0.4}, rng);
    const Point y = random_point_in_ball(m, Ball{centre, 0.4}, rng);
    const Tangent grad = m.grad_sq_distance(x, y);
    const Matrix basis = m.tangent_basis(x);
    for (Eigen::Index j = 0; j < basis.cols(); ++j)
    {
      const Tangent e{x, basis.col(j)};
      const double fp = std::pow(m.distance(m.exp(x, eps * e), y), 2);
      const double fm = std::pow(m.distance(m.exp(x, -eps * e), y), 2);
      const double fd = (fp - fm) / (2 * eps);
      const double exact = m.inner(grad, e);
      EXPECT_LE(std::abs(fd - exact), 1e-5 * std::max(1.0, m.norm(grad))) << c.name;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Backends, GeometryProperties, ::testing::Values(0, 1, 2, 3));
