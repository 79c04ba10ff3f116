#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <string_view>

namespace sweepkit::geometry
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point of a specific manifold instance. `coords` are ambient coordinates
/// (R^n for the Euclidean backend, R^{n+1} for the sphere and hyperboloid,
/// R^n for an implicit submanifold of R^n).
struct Point
{
  std::uint64_t manifold = 0;
  Vector coords;
};

/// A tangent vector tagged with its base point. Operations that receive a
/// tangent whose base differs from the point they act on throw.
struct Tangent
{
  Point base;
  Vector components;
};

struct Ball
{
  Point center;
  double radius = 0.0;
};

enum class ManifoldKind
{
  euclidean,
  sphere,
  hyperbolic,
  implicit
};

std::string_view to_string(ManifoldKind kind);

/// Local geometry constants of a region. Analytic backends fill exact values;
/// the implicit backend samples and sets `estimated`.
struct GeometryBudget
{
  Ball region;
  double rho = 0.0;              // safe working radius
  double curvature_bound = 0.0;  // |K| over the region
  double hessian_bound = 0.0;    // bound on the Hessian of d^2(., q)
  double exp_smoothness = 0.0;   // bound on geodesic acceleration
  double log_lipschitz = 0.0;    // Lipschitz constant of y -> log_x(y)
  double normal_curvature = 0.0; // max |II(u,u)|, implicit backend only
  bool estimated = false;
};

/// A finite-dimensional Riemannian manifold.
///
/// The public operations validate their inputs (same backend, tangent base
/// matches, radius inside the budget) and delegate to the backend hooks.
/// Instances are immutable; every method is safe to call concurrently.
class Manifold
{
public:
  virtual ~Manifold() = default;
  Manifold(const Manifold&) = delete;
  Manifold& operator=(const Manifold&) = delete;

  std::uint64_t id() const { return id_; }
  virtual ManifoldKind kind() const = 0;
  virtual int dimension() const = 0;
  virtual int ambient_dimension() const = 0;

  double feasibility_tolerance() const { return feasibility_tol_; }
  /// Default radius for exp/log/transport pre-conditions when the caller
  /// does not pass a budget.
  double domain_radius() const { return domain_radius_; }

  /// Wraps ambient coordinates; throws DomainError if they are off the manifold.
  Point point(Vector coords) const;
  /// Nearest point on the manifold to ambient coordinates.
  Point snap(const Vector& coords) const;
  double constraint_residual(const Vector& coords) const { return do_residual(coords); }

  /// Wraps components; throws DomainError if they are not tangent at x.
  Tangent tangent(const Point& x, Vector components) const;
  Tangent project_tangent(const Point& x, const Vector& ambient) const;
  /// Riemannian gradient of a function from its ambient Euclidean gradient.
  Tangent riemannian_gradient(const Point& x, const Vector& euclidean_gradient) const;
  Tangent zero(const Point& x) const;
  /// Columns form an orthonormal basis of T_xM under the metric.
  Matrix tangent_basis(const Point& x) const;

  double inner(const Tangent& a, const Tangent& b) const;
  double norm(const Tangent& v) const;

  double distance(const Point& x, const Point& y) const;

  Point exp(const Point& x, const Tangent& v) const { return exp(x, v, domain_radius_); }
  Point exp(const Point& x, const Tangent& v, const GeometryBudget& budget) const
  {
    return exp(x, v, budget.rho);
  }

  /// Gamma_{x,y}: the tangent at x whose unit-time geodesic reaches y.
  Tangent log(const Point& x, const Point& y) const { return log(x, y, domain_radius_); }
  Tangent log(const Point& x, const Point& y, const GeometryBudget& budget) const
  {
    return log(x, y, budget.rho);
  }

  /// Parallel transport along the short geodesic from x to y.
  Tangent transport(const Point& x, const Point& y, const Tangent& v) const
  {
    return transport(x, y, v, domain_radius_);
  }
  Tangent transport(const Point& x, const Point& y, const Tangent& v, const GeometryBudget& budget) const
  {
    return transport(x, y, v, budget.rho);
  }

  /// Gradient in x of d(x,y)^2, equal to -2 log_x(y).
  Tangent grad_sq_distance(const Point& x, const Point& y) const;

  /// Local constants for a region; analytic for analytic backends.
  GeometryBudget budget(const Ball& region) const;

  /// Variants with an explicit validity radius.
  Point exp(const Point& x, const Tangent& v, double radius) const;
  Tangent log(const Point& x, const Point& y, double radius) const;
  Tangent transport(const Point& x, const Point& y, const Tangent& v, double radius) const;

  void require_same(const Point& x) const;
  void require_base(const Tangent& v, const Point& x) const;

protected:
  Manifold(double feasibility_tol, double domain_radius);

  Point wrap(Vector coords) const { return Point{id_, std::move(coords)}; }

  virtual double do_residual(const Vector& coords) const = 0;
  virtual Vector do_snap(const Vector& coords) const = 0;
  virtual double do_inner(const Point& x, const Vector& a, const Vector& b) const;
  virtual Vector do_project_tangent(const Point& x, const Vector& ambient) const = 0;
  virtual Vector do_riemannian_gradient(const Point& x, const Vector& grad) const;
  virtual Matrix do_tangent_basis(const Point& x) const = 0;
  virtual double do_distance(const Point& x, const Point& y) const = 0;
  virtual Vector do_exp(const Point& x, const Vector& v) const = 0;
  virtual Vector do_log(const Point& x, const Point& y) const = 0;
  /// `log_xy` is the already validated Gamma_{x,y}.
  virtual Vector do_transport(const Point& x, const Point& y, const Vector& log_xy,
                              const Vector& v) const = 0;
  virtual GeometryBudget do_budget(const Ball& region) const = 0;

  /// Tangent-space tolerance scaled to the magnitude of the vector.
  double tangency_tolerance() const { return 1e3 * feasibility_tol_; }

private:
  std::uint64_t id_;
  double feasibility_tol_;
  double domain_radius_;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

/// R^n with the flat metric. `radius_ceiling` stands in for the infinite
/// injectivity radius.
class Euclidean final : public Manifold
{
public:
  explicit Euclidean(int dim, double radius_ceiling = 1e6);
  ManifoldKind kind() const override { return ManifoldKind::euclidean; }
  int dimension() const override { return dim_; }
  int ambient_dimension() const override { return dim_; }

private:
  double do_residual(const Vector& coords) const override;
  Vector do_snap(const Vector& coords) const override { return coords; }
  Vector do_project_tangent(const Point&, const Vector& ambient) const override { return ambient; }
  Matrix do_tangent_basis(const Point&) const override;
  double do_distance(const Point& x, const Point& y) const override;
  Vector do_exp(const Point& x, const Vector& v) const override;
  Vector do_log(const Point& x, const Point& y) const override;
  Vector do_transport(const Point&, const Point&, const Vector&, const Vector& v) const override
  {
    return v;
  }
  GeometryBudget do_budget(const Ball& region) const override;

  int dim_;
  double ceiling_;
};

/// The unit sphere S^n embedded in R^{n+1}.
class Sphere final : public Manifold
{
public:
  explicit Sphere(int dim);
  ManifoldKind kind() const override { return ManifoldKind::sphere; }
  int dimension() const override { return dim_; }
  int ambient_dimension() const override { return dim_ + 1; }

private:
  double do_residual(const Vector& coords) const override;
  Vector do_snap(const Vector& coords) const override;
  Vector do_project_tangent(const Point& x, const Vector& ambient) const override;
  Matrix do_tangent_basis(const Point& x) const override;
  double do_distance(const Point& x, const Point& y) const override;
  Vector do_exp(const Point& x, const Vector& v) const override;
  Vector do_log(const Point& x, const Point& y) const override;
  Vector do_transport(const Point& x, const Point& y, const Vector& log_xy,
                      const Vector& v) const override;
  GeometryBudget do_budget(const Ball& region) const override;

  int dim_;
};

/// Hyperbolic space H^n in the hyperboloid model
/// {x in R^{n+1} : -x0^2 + x1^2 + ... = -1, x0 > 0} with the Minkowski metric.
class Hyperbolic final : public Manifold
{
public:
  explicit Hyperbolic(int dim, double domain_radius = 20.0);
  ManifoldKind kind() const override { return ManifoldKind::hyperbolic; }
  int dimension() const override { return dim_; }
  int ambient_dimension() const override { return dim_ + 1; }

  static double minkowski(const Vector& a, const Vector& b);

private:
  double do_residual(const Vector& coords) const override;
  Vector do_snap(const Vector& coords) const override;
  double do_inner(const Point& x, const Vector& a, const Vector& b) const override;
  Vector do_project_tangent(const Point& x, const Vector& ambient) const override;
  Vector do_riemannian_gradient(const Point& x, const Vector& grad) const override;
  Matrix do_tangent_basis(const Point& x) const override;
  double do_distance(const Point& x, const Point& y) const override;
  Vector do_exp(const Point& x, const Vector& v) const override;
  Vector do_log(const Point& x, const Point& y) const override;
  Vector do_transport(const Point& x, const Point& y, const Vector& log_xy,
                      const Vector& v) const override;
  GeometryBudget do_budget(const Ball& region) const override;

  int dim_;
};

// Tangent arithmetic. Binary operations require a common base point.
Tangent operator+(const Tangent& a, const Tangent& b);
Tangent operator-(const Tangent& a, const Tangent& b);
Tangent operator*(double s, const Tangent& v);
Tangent operator-(const Tangent& v);

/// Uniformly distributed unit tangent direction at x.
Tangent random_unit_tangent(const Manifold& m, const Point& x, std::mt19937_64& rng);

/// Point sampled in the geodesic ball: exp_center(r u) with u uniform on the
/// unit sphere of T_center M and r distributed so that samples fill the ball.
Point random_point_in_ball(const Manifold& m, const Ball& ball, std::mt19937_64& rng);

/// Shared budget sampling for C_e: max |log_x y - log_x z| / d(y,z) over
/// sampled triples in the region, with pairwise distances below `rho`.
double sample_log_lipschitz(const Manifold& m, const Ball& region, double rho, int samples);

}  // namespace sweepkit::geometry
