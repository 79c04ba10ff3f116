#include "sweepkit/geometry.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "sweepkit/errors.hpp"

namespace sweepkit::geometry
{

namespace
{

std::uint64_t next_manifold_id()
{
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

bool same_coords(const Vector& a, const Vector& b)
{
  if (a.size() != b.size())
    return false;
  const double scale = 1.0 + a.lpNorm<Eigen::Infinity>();
  return (a - b).lpNorm<Eigen::Infinity>() <= 1e-12 * scale;
}

}  // namespace

std::string_view to_string(ManifoldKind kind)
{
  switch (kind)
  {
    case ManifoldKind::euclidean: return "euclidean";
    case ManifoldKind::sphere: return "sphere";
    case ManifoldKind::hyperbolic: return "hyperbolic";
    case ManifoldKind::implicit: return "implicit";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Manifold
// ---------------------------------------------------------------------------

Manifold::Manifold(double feasibility_tol, double domain_radius)
  : id_(next_manifold_id()), feasibility_tol_(feasibility_tol), domain_radius_(domain_radius)
{
}

void Manifold::require_same(const Point& x) const
{
  if (x.manifold != id_)
    throw StructuralError("point belongs to a different manifold backend");
}

void Manifold::require_base(const Tangent& v, const Point& x) const
{
  require_same(x);
  require_same(v.base);
  if (!same_coords(v.base.coords, x.coords))
    throw StructuralError("tangent vector is based at a different point than the one it is used at");
}

Point Manifold::point(Vector coords) const
{
  if (coords.size() != ambient_dimension())
    throw StructuralError("expected " + std::to_string(ambient_dimension()) + " coordinates, got " +
                          std::to_string(coords.size()));
  if (!coords.allFinite())
    throw DomainError("point has non-finite coordinates");
  const double r = do_residual(coords);
  if (!(r <= feasibility_tol_))
    throw DomainError("point is off the manifold by " + std::to_string(r));
  return wrap(std::move(coords));
}

Point Manifold::snap(const Vector& coords) const
{
  if (coords.size() != ambient_dimension())
    throw StructuralError("coordinate count does not match the manifold");
  return wrap(do_snap(coords));
}

Tangent Manifold::tangent(const Point& x, Vector components) const
{
  require_same(x);
  if (components.size() != ambient_dimension())
    throw StructuralError("tangent components have the wrong size");
  const Vector projected = do_project_tangent(x, components);
  const double err = (projected - components).norm();
  if (!(err <= tangency_tolerance() * (1.0 + components.norm())))
    throw DomainError("vector is not tangent at the base point (normal part " + std::to_string(err) + ")");
  return Tangent{x, std::move(components)};
}

Tangent Manifold::project_tangent(const Point& x, const Vector& ambient) const
{
  require_same(x);
  return Tangent{x, do_project_tangent(x, ambient)};
}

Tangent Manifold::riemannian_gradient(const Point& x, const Vector& euclidean_gradient) const
{
  require_same(x);
  return Tangent{x, do_riemannian_gradient(x, euclidean_gradient)};
}

Tangent Manifold::zero(const Point& x) const
{
  require_same(x);
  return Tangent{x, Vector::Zero(ambient_dimension())};
}

Matrix Manifold::tangent_basis(const Point& x) const
{
  require_same(x);
  return do_tangent_basis(x);
}

double Manifold::inner(const Tangent& a, const Tangent& b) const
{
  require_base(b, a.base);
  return do_inner(a.base, a.components, b.components);
}

double Manifold::norm(const Tangent& v) const
{
  require_same(v.base);
  return std::sqrt(std::max(0.0, do_inner(v.base, v.components, v.components)));
}

double Manifold::distance(const Point& x, const Point& y) const
{
  require_same(x);
  require_same(y);
  if (x.coords == y.coords)
    return 0.0;
  return do_distance(x, y);
}

Point Manifold::exp(const Point& x, const Tangent& v, double radius) const
{
  require_base(v, x);
  const double len = norm(v);
  if (!(len < radius))
    throw DomainError("exp: |v| = " + std::to_string(len) + " is not below the radius " +
                      std::to_string(radius));
  if (len == 0.0)
    return x;
  return wrap(do_exp(x, v.components));
}

Tangent Manifold::log(const Point& x, const Point& y, double radius) const
{
  require_same(x);
  require_same(y);
  if (x.coords == y.coords)
    return zero(x);
  Tangent g{x, do_log(x, y)};
  const double len = norm(g);
  if (!(len < radius))
    throw DomainError("log: d(x,y) = " + std::to_string(len) + " is not below the radius " +
                      std::to_string(radius));
  return g;
}

Tangent Manifold::transport(const Point& x, const Point& y, const Tangent& v, double radius) const
{
  require_base(v, x);
  require_same(y);
  if (x.coords == y.coords)
    return Tangent{y, v.components};
  const Tangent g = log(x, y, radius);
  return Tangent{y, do_transport(x, y, g.components, v.components)};
}

Tangent Manifold::grad_sq_distance(const Point& x, const Point& y) const
{
  Tangent g = log(x, y);
  g.components *= -2.0;
  return g;
}

GeometryBudget Manifold::budget(const Ball& region) const
{
  require_same(region.center);
  if (!(region.radius > 0.0) || !std::isfinite(region.radius))
    throw DomainError("budget region radius must be finite and positive");
  return do_budget(region);
}

double Manifold::do_inner(const Point&, const Vector& a, const Vector& b) const { return a.dot(b); }

Vector Manifold::do_riemannian_gradient(const Point& x, const Vector& grad) const
{
  return do_project_tangent(x, grad);
}

// ---------------------------------------------------------------------------
// Tangent arithmetic and sampling
// ---------------------------------------------------------------------------

Tangent operator+(const Tangent& a, const Tangent& b)
{
  if (a.base.manifold != b.base.manifold || !same_coords(a.base.coords, b.base.coords))
    throw StructuralError("cannot add tangent vectors from different tangent spaces");
  return Tangent{a.base, a.components + b.components};
}

Tangent operator-(const Tangent& a, const Tangent& b)
{
  if (a.base.manifold != b.base.manifold || !same_coords(a.base.coords, b.base.coords))
    throw StructuralError("cannot subtract tangent vectors from different tangent spaces");
  return Tangent{a.base, a.components - b.components};
}

Tangent operator*(double s, const Tangent& v) { return Tangent{v.base, s * v.components}; }

Tangent operator-(const Tangent& v) { return Tangent{v.base, -v.components}; }

Tangent random_unit_tangent(const Manifold& m, const Point& x, std::mt19937_64& rng)
{
  const Matrix basis = m.tangent_basis(x);
  std::normal_distribution<double> normal;
  Vector g(basis.cols());
  do
  {
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g[i] = normal(rng);
  } while (g.norm() < 1e-12);
  g.normalize();
  return Tangent{x, basis * g};
}

Point random_point_in_ball(const Manifold& m, const Ball& ball, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Tangent u = random_unit_tangent(m, ball.center, rng);
  const double cap = 0.999 * m.domain_radius();
  const double r = std::min(ball.radius, cap) * std::pow(unit(rng), 1.0 / m.dimension());
  return m.exp(ball.center, r * u);
}

double sample_log_lipschitz(const Manifold& m, const Ball& region, double rho, int samples)
{
  std::mt19937_64 rng(0x5eed1e);
  const Ball inner{region.center, std::min(region.radius, 0.45 * rho)};
  double worst = 1.0;
  for (int i = 0; i < samples; ++i)
  {
    const Point x = random_point_in_ball(m, inner, rng);
    const Point y = random_point_in_ball(m, inner, rng);
    const Point z = random_point_in_ball(m, inner, rng);
    const double dyz = m.distance(y, z);
    if (dyz < 1e-9)
      continue;
    const Tangent diff = m.log(x, y) - m.log(x, z);
    worst = std::max(worst, m.norm(diff) / dyz);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Euclidean
// ---------------------------------------------------------------------------

Euclidean::Euclidean(int dim, double radius_ceiling)
  : Manifold(1e-10, radius_ceiling), dim_(dim), ceiling_(radius_ceiling)
{
  if (dim < 1)
    throw StructuralError("Euclidean dimension must be positive");
}

double Euclidean::do_residual(const Vector&) const { return 0.0; }

Matrix Euclidean::do_tangent_basis(const Point&) const { return Matrix::Identity(dim_, dim_); }

double Euclidean::do_distance(const Point& x, const Point& y) const { return (y.coords - x.coords).norm(); }

Vector Euclidean::do_exp(const Point& x, const Vector& v) const { return x.coords + v; }

Vector Euclidean::do_log(const Point& x, const Point& y) const { return y.coords - x.coords; }

GeometryBudget Euclidean::do_budget(const Ball& region) const
{
  GeometryBudget b;
  b.region = region;
  b.rho = ceiling_;
  b.curvature_bound = 0.0;
  b.hessian_bound = 2.0;
  b.exp_smoothness = 1.0;
  b.log_lipschitz = 1.0;
  return b;
}

// ---------------------------------------------------------------------------
// Sphere
// ---------------------------------------------------------------------------

Sphere::Sphere(int dim) : Manifold(1e-10, std::numbers::pi), dim_(dim)
{
  if (dim < 1)
    throw StructuralError("sphere dimension must be positive");
}

double Sphere::do_residual(const Vector& coords) const { return std::abs(coords.norm() - 1.0); }

Vector Sphere::do_snap(const Vector& coords) const
{
  const double n = coords.norm();
  if (n == 0.0)
    throw DomainError("cannot project the origin onto the sphere");
  return coords / n;
}

Vector Sphere::do_project_tangent(const Point& x, const Vector& ambient) const
{
  return ambient - x.coords.dot(ambient) * x.coords;
}

Matrix Sphere::do_tangent_basis(const Point& x) const
{
  const Eigen::HouseholderQR<Matrix> qr(x.coords);
  const Matrix q = qr.householderQ();
  return q.rightCols(dim_);
}

double Sphere::do_distance(const Point& x, const Point& y) const
{
  const double c = x.coords.dot(y.coords);
  const Vector u = y.coords - c * x.coords;
  return std::atan2(u.norm(), c);
}

Vector Sphere::do_exp(const Point& x, const Vector& v) const
{
  const double theta = v.norm();
  const Vector p = std::cos(theta) * x.coords + (std::sin(theta) / theta) * v;
  return p / p.norm();
}

Vector Sphere::do_log(const Point& x, const Point& y) const
{
  const double c = x.coords.dot(y.coords);
  Vector u = y.coords - c * x.coords;
  u -= x.coords.dot(u) * x.coords;
  const double nu = u.norm();
  if (nu == 0.0)
  {
    if (c < 0.0)
      throw DomainError("log is undefined between antipodal points");
    return Vector::Zero(x.coords.size());
  }
  return (std::atan2(nu, c) / nu) * u;
}

Vector Sphere::do_transport(const Point& x, const Point& y, const Vector& log_xy, const Vector& v) const
{
  const double theta = log_xy.norm();
  const Vector e = log_xy / theta;
  const double ev = e.dot(v);
  Vector w = v + (std::cos(theta) - 1.0) * ev * e - std::sin(theta) * ev * x.coords;
  w -= y.coords.dot(w) * y.coords;
  return w;
}

GeometryBudget Sphere::do_budget(const Ball& region) const
{
  GeometryBudget b;
  b.region = region;
  // injectivity pi, convexity pi/2, pi / (2 sqrt K) = pi/2
  b.rho = std::numbers::pi / 2.0;
  b.curvature_bound = 1.0;
  b.hessian_bound = 2.0;
  b.exp_smoothness = b.rho * b.rho;
  b.log_lipschitz = sample_log_lipschitz(*this, region, b.rho, 64);
  return b;
}

// ---------------------------------------------------------------------------
// Hyperbolic (hyperboloid model)
// ---------------------------------------------------------------------------

Hyperbolic::Hyperbolic(int dim, double domain_radius) : Manifold(1e-10, domain_radius), dim_(dim)
{
  if (dim < 1)
    throw StructuralError("hyperbolic dimension must be positive");
}

double Hyperbolic::minkowski(const Vector& a, const Vector& b)
{
  return -a[0] * b[0] + a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
}

double Hyperbolic::do_residual(const Vector& coords) const
{
  if (coords[0] <= 0.0)
    return std::numeric_limits<double>::infinity();
  // relative to the size of the coordinates, which grow like cosh(d)
  return std::abs(minkowski(coords, coords) + 1.0) / std::max(1.0, coords.squaredNorm());
}

Vector Hyperbolic::do_snap(const Vector& coords) const
{
  Vector p = coords;
  p[0] = std::sqrt(1.0 + coords.tail(dim_).squaredNorm());
  return p;
}

double Hyperbolic::do_inner(const Point&, const Vector& a, const Vector& b) const { return minkowski(a, b); }

Vector Hyperbolic::do_project_tangent(const Point& x, const Vector& ambient) const
{
  return ambient + minkowski(x.coords, ambient) * x.coords;
}

Vector Hyperbolic::do_riemannian_gradient(const Point& x, const Vector& grad) const
{
  Vector g = grad;
  g[0] = -g[0];
  return do_project_tangent(x, g);
}

Matrix Hyperbolic::do_tangent_basis(const Point& x) const
{
  Matrix basis(dim_ + 1, dim_);
  for (int k = 0; k < dim_; ++k)
  {
    Vector e = Vector::Zero(dim_ + 1);
    e[k + 1] = 1.0;
    Vector v = do_project_tangent(x, e);
    for (int j = 0; j < k; ++j)
      v -= minkowski(basis.col(j), v) * basis.col(j);
    basis.col(k) = v / std::sqrt(minkowski(v, v));
  }
  return basis;
}

double Hyperbolic::do_distance(const Point& x, const Point& y) const
{
  const Vector diff = x.coords - y.coords;
  const double q = std::max(0.0, minkowski(diff, diff));
  return 2.0 * std::asinh(0.5 * std::sqrt(q));
}

Vector Hyperbolic::do_exp(const Point& x, const Vector& v) const
{
  const double theta = std::sqrt(std::max(0.0, minkowski(v, v)));
  const Vector p = std::cosh(theta) * x.coords + (std::sinh(theta) / theta) * v;
  return do_snap(p);
}

Vector Hyperbolic::do_log(const Point& x, const Point& y) const
{
  const double c = minkowski(x.coords, y.coords);
  Vector u = y.coords + c * x.coords;
  u = do_project_tangent(x, u);
  const double nu = std::sqrt(std::max(0.0, minkowski(u, u)));
  if (nu == 0.0)
    return Vector::Zero(x.coords.size());
  return (do_distance(x, y) / nu) * u;
}

Vector Hyperbolic::do_transport(const Point& x, const Point& y, const Vector& log_xy, const Vector& v) const
{
  const double d2 = minkowski(log_xy, log_xy);
  const Vector log_yx = do_log(y, x);
  Vector w = v - (minkowski(log_xy, v) / d2) * (log_xy + log_yx);
  return do_project_tangent(y, w);
}

GeometryBudget Hyperbolic::do_budget(const Ball& region) const
{
  GeometryBudget b;
  b.region = region;
  // infinite injectivity and convexity radii; pi / (2 sqrt|K|) binds
  b.rho = std::numbers::pi / 2.0;
  b.curvature_bound = 1.0;
  b.hessian_bound = 2.0 * b.rho / std::tanh(b.rho);
  const double from_origin = std::acosh(std::max(1.0, region.center.coords[0]));
  b.exp_smoothness = b.rho * b.rho * std::sqrt(2.0) * std::cosh(from_origin + region.radius + b.rho);
  b.log_lipschitz = sample_log_lipschitz(*this, region, b.rho, 64);
  return b;
}

}  // namespace sweepkit::geometry
