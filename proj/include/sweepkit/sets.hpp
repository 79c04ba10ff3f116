#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sweepkit/errors.hpp"
#include "sweepkit/expr.hpp"
#include "sweepkit/geometry.hpp"

namespace sweepkit::sets
{

using geometry::Manifold;
using geometry::ManifoldPtr;
using geometry::Matrix;
using geometry::Point;
using geometry::Tangent;
using geometry::Vector;

struct ProjectionResult
{
  Point point;
  double dist = 0.0;
  std::vector<int> active_set;
  int iterations = 0;
  bool converged = false;
  /// The query sits on a locus where the projection is not single-valued
  /// (e.g. the centre of a ball complement); `point` is one of the minimizers.
  bool degenerate = false;
};

/// Raised when the iterative projector runs out of iterations.
class ProjectionFailure : public NumericError
{
public:
  ProjectionFailure(const std::string& what, double residual, ProjectionResult best)
    : NumericError(what, residual), best_(std::move(best))
  {
  }
  const ProjectionResult& best() const { return best_; }

private:
  ProjectionResult best_;
};

struct ProjectorOptions
{
  double feasibility_tol = 1e-9;  // membership slack on every g_i
  double step_tol = 1e-10;        // stop when the projected direction is this short
  double activity_tol = 1e-7;     // |g_i| below this counts as active
  int max_iterations = 2000;
};

/// C(t) = {x : g_i(t, x) >= 0 for all i}.
///
/// Catalog sets override `closed_form` with exact projections; every set can
/// be projected by the generic iterative solver through `project_from`.
class MovingSet
{
public:
  explicit MovingSet(ManifoldPtr manifold);
  virtual ~MovingSet() = default;

  const Manifold& manifold() const { return *manifold_; }
  const ManifoldPtr& manifold_ptr() const { return manifold_; }

  virtual std::string kind() const = 0;
  virtual int constraint_count() const = 0;
  virtual Vector constraint_values(double t, const Point& x) const = 0;
  /// Riemannian gradient of g_i at x.
  virtual Tangent constraint_gradient(double t, const Point& x, int i) const = 0;

  bool member(double t, const Point& x) const;
  /// Most negative g_i, clipped at zero.
  double violation(double t, const Point& x) const;
  double dist_to_set(double t, const Point& y) const;

  /// Members are returned unchanged. Otherwise the closed form when the set
  /// has one, else the iterative solver started at y.
  ProjectionResult project(double t, const Point& y) const;
  /// Iterative solver from an explicit starting point (any point; it is
  /// first pulled into C(t)).
  ProjectionResult project_from(double t, const Point& y, const Point& init) const;

  /// -grad g_i over the active constraints at a member x. Empty in the interior.
  std::vector<Tangent> normal_generators(double t, const Point& x) const;

  /// Minimal-norm Gauss-Newton correction onto C(t). Throws StructuralError
  /// when no feasible point is found nearby.
  Point restore(double t, const Point& x) const;

  std::vector<int> active_set(double t, const Point& x) const;

  double lipschitz_constant() const { return lipschitz_; }
  double prox_radius_hint() const { return prox_hint_; }
  void declare_constants(double lipschitz, double prox_radius_hint);

  const ProjectorOptions& options() const { return options_; }
  void set_options(const ProjectorOptions& options) { options_ = options; }

protected:
  virtual std::optional<ProjectionResult> closed_form(double t, const Point& y) const;
  ProjectionResult finish(double t, const Point& y, Point c, int iterations, bool degenerate) const;

  double lipschitz_ = 0.0;
  double prox_hint_ = 1.0;

private:
  ManifoldPtr manifold_;
  ProjectorOptions options_;
};

using MovingSetPtr = std::shared_ptr<const MovingSet>;

/// {x : <n, x> >= offset + speed t} on R^n, with n normalized so that g is a
/// signed distance.
class HalfSpace final : public MovingSet
{
public:
  HalfSpace(ManifoldPtr manifold, Vector normal, double offset, double speed);
  std::string kind() const override { return "half_space"; }
  int constraint_count() const override { return 1; }
  Vector constraint_values(double t, const Point& x) const override;
  Tangent constraint_gradient(double t, const Point& x, int i) const override;

  const Vector& normal() const { return normal_; }
  double offset() const { return offset_; }
  double speed() const { return speed_; }

protected:
  std::optional<ProjectionResult> closed_form(double t, const Point& y) const override;

private:
  Vector normal_;
  double offset_;
  double speed_;
};

/// Closed geodesic ball whose centre moves along the geodesic t -> exp_{c0}(t w).
/// With `complement` set, the closure of the outside instead.
class GeodesicBall final : public MovingSet
{
public:
  GeodesicBall(ManifoldPtr manifold, Point center, double radius, Vector velocity, bool complement);
  std::string kind() const override { return complement_ ? "ball_complement" : "ball"; }
  int constraint_count() const override { return 1; }
  Vector constraint_values(double t, const Point& x) const override;
  Tangent constraint_gradient(double t, const Point& x, int i) const override;

  Point center(double t) const;
  double radius() const { return radius_; }
  bool complement() const { return complement_; }

protected:
  std::optional<ProjectionResult> closed_form(double t, const Point& y) const override;

private:
  Point center0_;
  Tangent velocity_;
  double radius_;
  bool complement_;
};

/// Spherical cap {x : <x, a(t)> >= h} with a(t) = cos(wt) a0 + sin(wt) p.
class SphereCap final : public MovingSet
{
public:
  /// `plane` is orthonormalized against `axis`; by default the first
  /// coordinate vector not parallel to the axis is used.
  SphereCap(ManifoldPtr manifold, Vector axis, double height, double omega,
            std::optional<Vector> plane = std::nullopt);
  std::string kind() const override { return "sphere_cap"; }
  int constraint_count() const override { return 1; }
  Vector constraint_values(double t, const Point& x) const override;
  Tangent constraint_gradient(double t, const Point& x, int i) const override;

  Vector axis(double t) const;
  double height() const { return height_; }

protected:
  std::optional<ProjectionResult> closed_form(double t, const Point& y) const override;

private:
  Vector axis0_;
  Vector plane_;
  double height_;
  double omega_;
};

/// Sets given by expression inequalities g_i(t, x1..xn) >= 0 over the ambient
/// coordinates. Gradients come from forward-mode differentiation.
class InequalitySet final : public MovingSet
{
public:
  InequalitySet(ManifoldPtr manifold, std::vector<expr::Expression> constraints);
  std::string kind() const override { return "inequalities"; }
  int constraint_count() const override { return static_cast<int>(constraints_.size()); }
  Vector constraint_values(double t, const Point& x) const override;
  Tangent constraint_gradient(double t, const Point& x, int i) const override;

private:
  std::vector<expr::Expression> constraints_;
};

}  // namespace sweepkit::sets
