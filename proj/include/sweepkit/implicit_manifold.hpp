#pragma once

#include <vector>

#include "sweepkit/expr.hpp"
#include "sweepkit/geometry.hpp"

namespace sweepkit::geometry
{

/// The level set {x in R^n : g_1(x) = ... = g_m(x) = 0} with the induced
/// metric. Geodesics and parallel transport are integrated numerically;
/// log is found by shooting.
class ImplicitSubmanifold final : public Manifold
{
public:
  struct Options
  {
    double domain_radius = 2.0;
    double integrator_tol = 1e-12;
    double shooting_tol = 1e-10;
    int shooting_max_iter = 100;
    int budget_samples = 24;
  };

  ImplicitSubmanifold(int ambient_dim, std::vector<expr::Expression> equalities);
  ImplicitSubmanifold(int ambient_dim, std::vector<expr::Expression> equalities, Options options);

  ManifoldKind kind() const override { return ManifoldKind::implicit; }
  int dimension() const override { return ambient_dim_ - static_cast<int>(equalities_.size()); }
  int ambient_dimension() const override { return ambient_dim_; }

  const std::vector<expr::Expression>& equalities() const { return equalities_; }
  const Options& options() const { return options_; }

  /// Constraint Jacobian at ambient coordinates, one row per equality.
  Matrix jacobian(const Vector& coords) const;

  /// |II(u, u)| for a unit tangent u: the ambient acceleration of the
  /// geodesic through x with velocity u.
  double normal_curvature(const Point& x, const Tangent& u) const;

  // Integration entry points shared with the ODE right-hand side.
  Vector acceleration(const Vector& x, const Vector& v) const;
  Vector transport_rate(const Vector& x, const Vector& v, const Vector& w) const;

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

  Vector project_at(const Vector& x, const Vector& ambient) const;
  /// Integrates the geodesic x(0) = x, x'(0) = v to unit time, optionally
  /// carrying w along. Returns the endpoint; `w` is replaced by its transport.
  Vector flow(const Vector& x, const Vector& v, Vector* w) const;

  int ambient_dim_;
  std::vector<expr::Expression> equalities_;
  Options options_;
};

}  // namespace sweepkit::geometry
