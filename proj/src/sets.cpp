#include "sweepkit/sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sweepkit::sets
{

namespace
{

using geometry::ManifoldKind;

// Coordinates of a tangent in an orthonormal basis of the tangent space.
Vector coordinates(const Manifold& m, const Matrix& basis, const Vector& v)
{
  if (m.kind() == ManifoldKind::hyperbolic)
  {
    Vector jv = v;
    jv[0] = -jv[0];
    return basis.transpose() * jv;
  }
  return basis.transpose() * v;
}

Tangent cap_length(const Tangent& u, double cap, double length)
{
  if (length <= cap)
    return u;
  return (cap / length) * u;
}

// min |u - z|^2 subject to a_i . u + g_i >= 0, by enumerating active sets.
// Returns false when no KKT point exists among the candidates.
bool solve_linearized(const Matrix& a, const Vector& g, const Vector& z, Vector& best)
{
  const int k = static_cast<int>(a.rows());
  double best_gap = std::numeric_limits<double>::infinity();
  bool found = false;
  for (unsigned mask = 0; mask < (1u << k); ++mask)
  {
    std::vector<int> active;
    for (int i = 0; i < k; ++i)
      if (mask & (1u << i))
        active.push_back(i);
    Vector u = z;
    if (!active.empty())
    {
      Matrix as(static_cast<Eigen::Index>(active.size()), a.cols());
      Vector gs(as.rows());
      for (std::size_t r = 0; r < active.size(); ++r)
      {
        as.row(static_cast<Eigen::Index>(r)) = a.row(active[r]);
        gs[static_cast<Eigen::Index>(r)] = g[active[r]];
      }
      const Matrix gram = as * as.transpose();
      Eigen::FullPivLU<Matrix> lu(gram);
      if (lu.rank() < gram.rows())
        continue;
      const Vector mu = lu.solve(-gs - as * z);
      if (mu.minCoeff() < -1e-14)
        continue;
      u = z + as.transpose() * mu;
    }
    bool feasible = true;
    for (int i = 0; i < k && feasible; ++i)
      feasible = a.row(i).dot(u) + g[i] >= -1e-12 * (1.0 + std::abs(g[i]));
    if (!feasible)
      continue;
    const double gap = (u - z).squaredNorm();
    if (gap < best_gap)
    {
      best_gap = gap;
      best = u;
      found = true;
    }
  }
  return found;
}

}  // namespace

// ---------------------------------------------------------------------------
// MovingSet
// ---------------------------------------------------------------------------

MovingSet::MovingSet(ManifoldPtr manifold) : manifold_(std::move(manifold))
{
  if (!manifold_)
    throw StructuralError("moving set needs a manifold");
  prox_hint_ = manifold_->domain_radius();
}

void MovingSet::declare_constants(double lipschitz, double prox_radius_hint)
{
  if (!(lipschitz >= 0.0) || !(prox_radius_hint > 0.0))
    throw DomainError("K_L must be nonnegative and the prox radius hint positive");
  lipschitz_ = lipschitz;
  prox_hint_ = prox_radius_hint;
}

bool MovingSet::member(double t, const Point& x) const
{
  return violation(t, x) <= options_.feasibility_tol;
}

double MovingSet::violation(double t, const Point& x) const
{
  const Vector g = constraint_values(t, x);
  return g.size() == 0 ? 0.0 : std::max(0.0, -g.minCoeff());
}

std::vector<int> MovingSet::active_set(double t, const Point& x) const
{
  const Vector g = constraint_values(t, x);
  std::vector<int> active;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (std::abs(g[i]) <= options_.activity_tol)
      active.push_back(static_cast<int>(i));
  return active;
}

double MovingSet::dist_to_set(double t, const Point& y) const
{
  if (member(t, y))
    return 0.0;
  return project(t, y).dist;
}

ProjectionResult MovingSet::finish(double t, const Point& y, Point c, int iterations, bool degenerate) const
{
  ProjectionResult r;
  r.dist = manifold().distance(y, c);
  r.active_set = active_set(t, c);
  r.point = std::move(c);
  r.iterations = iterations;
  r.converged = true;
  r.degenerate = degenerate;
  return r;
}

ProjectionResult MovingSet::project(double t, const Point& y) const
{
  manifold().require_same(y);
  if (member(t, y))
    return finish(t, y, y, 0, false);
  if (auto exact = closed_form(t, y))
    return *exact;
  return project_from(t, y, y);
}

std::optional<ProjectionResult> MovingSet::closed_form(double, const Point&) const { return std::nullopt; }

Point MovingSet::restore(double t, const Point& x) const
{
  const Manifold& m = manifold();
  const double cap = 0.5 * m.domain_radius();
  Point c = x;
  int nudges = 0;
  for (int iter = 0; iter < 80; ++iter)
  {
    const Vector g = constraint_values(t, c);
    std::vector<int> violated;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (g[i] < -1e-14)
        violated.push_back(static_cast<int>(i));
    if (violated.empty())
      return c;

    const Matrix basis = m.tangent_basis(c);
    Matrix a(static_cast<Eigen::Index>(violated.size()), basis.cols());
    Vector rhs(a.rows());
    for (std::size_t r = 0; r < violated.size(); ++r)
    {
      const Tangent grad = constraint_gradient(t, c, violated[r]);
      a.row(static_cast<Eigen::Index>(r)) = coordinates(m, basis, grad.components).transpose();
      rhs[static_cast<Eigen::Index>(r)] = -g[violated[r]];
    }
    const Vector lambda = (a * a.transpose()).completeOrthogonalDecomposition().solve(rhs);
    const Vector u = a.transpose() * lambda;
    const double len = u.norm();
    if (!std::isfinite(len))
      break;
    if (len <= 1e-14)
    {
      // critical point of the violated constraints; slide off it
      if (++nudges > 3)
        break;
      c = m.exp(c, Tangent{c, std::min(cap, 1e-3 + (-g.minCoeff())) * basis.col(0)});
      continue;
    }
    const Tangent step = cap_length(Tangent{c, basis * u}, cap, len);
    c = m.exp(c, step);
  }
  throw StructuralError("could not find a point of C(t) near the query at t = " + std::to_string(t) +
                        " (the set may be empty there)");
}

ProjectionResult MovingSet::project_from(double t, const Point& y, const Point& init) const
{
  const Manifold& m = manifold();
  m.require_same(y);
  const double cap = 0.5 * m.domain_radius();
  const int count = constraint_count();

  // Projection of log_c(y) onto the linearized constraints at c, in basis
  // coordinates; zero exactly at KKT points.
  struct Direction
  {
    Matrix basis;
    Vector u;
    double len = 0.0;
  };
  const auto direction = [&](const Point& c) {
    Direction d;
    d.basis = m.tangent_basis(c);
    const Vector z = coordinates(m, d.basis, m.log(c, y).components);
    const Vector g = constraint_values(t, c);

    // constraints that a step of length |z| could reach, most binding first
    std::vector<std::pair<double, Vector>> near;
    for (int i = 0; i < count; ++i)
    {
      Vector ai = coordinates(m, d.basis, constraint_gradient(t, c, i).components);
      if (g[i] <= 1.5 * ai.norm() * z.norm() + options_.activity_tol)
        near.emplace_back(std::max(0.0, g[i]), std::move(ai));
    }
    std::stable_sort(near.begin(), near.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
    if (near.size() > 12)
      near.resize(12);
    Matrix a(static_cast<Eigen::Index>(near.size()), d.basis.cols());
    Vector gn(a.rows());
    for (std::size_t r = 0; r < near.size(); ++r)
    {
      a.row(static_cast<Eigen::Index>(r)) = near[r].second.transpose();
      gn[static_cast<Eigen::Index>(r)] = near[r].first;
    }
    if (!solve_linearized(a, gn, z, d.u))
      d.u = Vector::Zero(z.size());
    d.len = d.u.norm();
    return d;
  };

  struct Iterate
  {
    Point c;
    double phi = 0.0;
  };
  const auto trial = [&](const Point& c, const Direction& d, double s) -> std::optional<Iterate> {
    if (s * d.len >= cap)
      return std::nullopt;
    try
    {
      Point next = restore(t, m.exp(c, Tangent{c, s * (d.basis * d.u)}));
      const double phi = std::pow(m.distance(y, next), 2);
      return Iterate{std::move(next), phi};
    }
    catch (const Error&)
    {
      return std::nullopt;
    }
  };

  Point c = restore(t, init);
  double phi = std::pow(m.distance(y, c), 2);
  Direction dir = direction(c);
  double prev_len = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= options_.max_iterations; ++iter)
  {
    if (dir.len <= options_.step_tol)
      return finish(t, y, c, iter, false);

    std::optional<Iterate> accepted;
    std::optional<Direction> accepted_dir;
    if (dir.len < 1e-6 * (1.0 + std::sqrt(phi)))
    {
      // Decreases of phi are below its resolution here; use the length of
      // the projected direction as the merit instead.
      const auto shorter = [&](double s) -> std::optional<std::pair<Iterate, Direction>> {
        auto cand = trial(c, dir, s);
        if (!cand)
          return std::nullopt;
        Direction next = direction(cand->c);
        if (!(next.len < dir.len * (1.0 - 1e-4 * std::min(s, 1.0))))
          return std::nullopt;
        return std::make_pair(std::move(*cand), std::move(next));
      };
      double s = 1.0;
      auto best = shorter(s);
      for (; !best && s > 1e-6;)
      {
        s *= 0.5;
        best = shorter(s);
      }
      if (best && s == 1.0)
      {
        for (double grow = 2.0; grow <= 64.0; grow *= 2.0)
        {
          auto cand = shorter(grow);
          if (!cand || !(cand->second.len < best->second.len))
            break;
          best = std::move(cand);
        }
      }
      if (best)
      {
        accepted = std::move(best->first);
        accepted_dir = std::move(best->second);
      }
    }
    else
    {
      // Armijo backtracking on phi, then extrapolation while it keeps falling.
      double s = 1.0;
      for (; s > 1e-12; s *= 0.5)
      {
        auto cand = trial(c, dir, s);
        if (cand && cand->phi <= phi - 1e-4 * s * dir.len * dir.len)
        {
          accepted = std::move(cand);
          break;
        }
      }
      if (accepted && s == 1.0)
      {
        bool grew = false;
        for (double grow = 2.0; grow <= 64.0; grow *= 2.0)
        {
          auto cand = trial(c, dir, grow);
          if (!cand || !(cand->phi < accepted->phi))
            break;
          accepted = std::move(cand);
          grew = true;
        }
        // Curved constraints can make the unit step overshoot to the mirror
        // image of the iterate; a half step then lands near the optimum.
        if (!grew && dir.len > 0.5 * prev_len)
        {
          auto half = trial(c, dir, 0.5);
          if (half && half->phi < accepted->phi)
            accepted = std::move(half);
        }
      }
    }

    if (!accepted)
    {
      ProjectionResult best = finish(t, y, c, iter, false);
      if (dir.len <= 1e2 * options_.step_tol)
        return best;
      best.converged = false;
      throw ProjectionFailure("projection line search stalled", dir.len, best);
    }
    prev_len = dir.len;
    c = std::move(accepted->c);
    phi = accepted->phi;
    dir = accepted_dir ? std::move(*accepted_dir) : direction(c);
  }
  ProjectionResult best = finish(t, y, c, options_.max_iterations, false);
  best.converged = false;
  throw ProjectionFailure("projection did not converge", dir.len, best);
}

std::vector<Tangent> MovingSet::normal_generators(double t, const Point& x) const
{
  if (!member(t, x))
    throw DomainError("normal cone requested at a point outside C(t)");
  std::vector<Tangent> out;
  for (int i : active_set(t, x))
  {
    Tangent grad = constraint_gradient(t, x, i);
    const double len = manifold().norm(grad);
    if (!(len > 1e-12))
      throw NumericError("constraint " + std::to_string(i) + " has a degenerate gradient at an active point", len);
    out.push_back(-grad);
  }
  return out;
}

// ---------------------------------------------------------------------------
// HalfSpace
// ---------------------------------------------------------------------------

HalfSpace::HalfSpace(ManifoldPtr manifold, Vector normal, double offset, double speed)
  : MovingSet(std::move(manifold)), normal_(std::move(normal)), offset_(offset), speed_(speed)
{
  if (this->manifold().kind() != ManifoldKind::euclidean)
    throw StructuralError("half_space sets are defined on the Euclidean backend");
  if (normal_.size() != this->manifold().ambient_dimension())
    throw StructuralError("half_space normal has the wrong dimension");
  const double len = normal_.norm();
  if (!(len > 0.0))
    throw DomainError("half_space normal must be nonzero");
  normal_ /= len;
  offset_ /= len;
  speed_ /= len;
  lipschitz_ = std::abs(speed_);
}

Vector HalfSpace::constraint_values(double t, const Point& x) const
{
  Vector g(1);
  g[0] = normal_.dot(x.coords) - offset_ - speed_ * t;
  return g;
}

Tangent HalfSpace::constraint_gradient(double, const Point& x, int) const { return Tangent{x, normal_}; }

std::optional<ProjectionResult> HalfSpace::closed_form(double t, const Point& y) const
{
  const double g = constraint_values(t, y)[0];
  Vector c = y.coords - g * normal_;
  // land on the closed side despite rounding
  while (normal_.dot(c) - offset_ - speed_ * t < 0.0)
    c += 1e-16 * (1.0 + c.norm()) * normal_;
  return finish(t, y, manifold().point(std::move(c)), 0, false);
}

// ---------------------------------------------------------------------------
// GeodesicBall
// ---------------------------------------------------------------------------

GeodesicBall::GeodesicBall(ManifoldPtr manifold, Point center, double radius, Vector velocity, bool complement)
  : MovingSet(std::move(manifold)),
    center0_(center),
    velocity_(this->manifold().tangent(center, std::move(velocity))),
    radius_(radius),
    complement_(complement)
{
  this->manifold().require_same(center0_);
  if (!(radius_ > 0.0) || !(radius_ < this->manifold().domain_radius()))
    throw DomainError("ball radius must be positive and inside the domain radius of the manifold");
  lipschitz_ = this->manifold().norm(velocity_);
  if (complement_)
    prox_hint_ = radius_;
}

Point GeodesicBall::center(double t) const
{
  if (t == 0.0)
    return center0_;
  return manifold().exp(center0_, t * velocity_);
}

Vector GeodesicBall::constraint_values(double t, const Point& x) const
{
  const double d = manifold().distance(x, center(t));
  Vector g(1);
  g[0] = complement_ ? d - radius_ : radius_ - d;
  return g;
}

Tangent GeodesicBall::constraint_gradient(double t, const Point& x, int) const
{
  const Tangent toward = manifold().log(x, center(t));
  const double d = manifold().norm(toward);
  if (d == 0.0)
    return manifold().zero(x);
  // grad d(., c) = -log_x(c) / d
  return (complement_ ? -1.0 / d : 1.0 / d) * toward;
}

std::optional<ProjectionResult> GeodesicBall::closed_form(double t, const Point& y) const
{
  const Manifold& m = manifold();
  const Point c = center(t);
  const Tangent out = m.log(c, y);
  const double d = m.norm(out);
  if (d == 0.0)
  {
    // every boundary point is nearest; pick the first basis direction
    const Tangent e{c, m.tangent_basis(c).col(0)};
    return finish(t, y, m.exp(c, radius_ * e), 0, true);
  }
  Point p = m.exp(c, (radius_ / d) * out);
  return finish(t, y, std::move(p), 0, false);
}

// ---------------------------------------------------------------------------
// SphereCap
// ---------------------------------------------------------------------------

SphereCap::SphereCap(ManifoldPtr manifold, Vector axis, double height, double omega, std::optional<Vector> plane)
  : MovingSet(std::move(manifold)), axis0_(std::move(axis)), height_(height), omega_(omega)
{
  if (this->manifold().kind() != ManifoldKind::sphere)
    throw StructuralError("sphere_cap sets are defined on the sphere backend");
  const int n = this->manifold().ambient_dimension();
  if (axis0_.size() != n)
    throw StructuralError("sphere_cap axis has the wrong dimension");
  if (!(axis0_.norm() > 0.0))
    throw DomainError("sphere_cap axis must be nonzero");
  axis0_.normalize();
  if (!(height_ > -1.0 && height_ < 1.0))
    throw DomainError("sphere_cap height must lie in (-1, 1)");

  Vector p;
  if (plane)
  {
    if (plane->size() != n)
      throw StructuralError("sphere_cap plane vector has the wrong dimension");
    p = *plane - plane->dot(axis0_) * axis0_;
  }
  else
  {
    for (int k = 0; k < n; ++k)
    {
      p = -axis0_[k] * axis0_;
      p[k] += 1.0;
      if (p.norm() > 1e-6)
        break;
    }
  }
  if (!(p.norm() > 1e-12))
    throw DomainError("sphere_cap plane vector is parallel to the axis");
  plane_ = p.normalized();
  lipschitz_ = std::abs(omega_);
  prox_hint_ = height_ >= 0.0 ? std::numbers::pi / 2 : std::acos(-height_);
}

Vector SphereCap::axis(double t) const
{
  return std::cos(omega_ * t) * axis0_ + std::sin(omega_ * t) * plane_;
}

Vector SphereCap::constraint_values(double t, const Point& x) const
{
  Vector g(1);
  g[0] = x.coords.dot(axis(t)) - height_;
  return g;
}

Tangent SphereCap::constraint_gradient(double t, const Point& x, int) const
{
  return manifold().riemannian_gradient(x, axis(t));
}

std::optional<ProjectionResult> SphereCap::closed_form(double t, const Point& y) const
{
  const Vector a = axis(t);
  Vector u = y.coords - y.coords.dot(a) * a;
  const double len = u.norm();
  bool degenerate = false;
  if (len < 1e-14)
  {
    // antipode of the axis: every boundary point is nearest
    u = plane_;
    degenerate = true;
  }
  else
    u /= len;
  Vector c = height_ * a + std::sqrt(1.0 - height_ * height_) * u;
  c /= c.norm();
  return finish(t, y, manifold().point(std::move(c)), 0, degenerate);
}

// ---------------------------------------------------------------------------
// InequalitySet
// ---------------------------------------------------------------------------

InequalitySet::InequalitySet(ManifoldPtr manifold, std::vector<expr::Expression> constraints)
  : MovingSet(std::move(manifold)), constraints_(std::move(constraints))
{
  if (constraints_.empty())
    throw StructuralError("an inequality set needs at least one constraint");
  for (const auto& g : constraints_)
    if (g.dimension() != this->manifold().ambient_dimension())
      throw StructuralError("constraint '" + g.source() + "' is compiled for a different dimension");
}

Vector InequalitySet::constraint_values(double t, const Point& x) const
{
  Vector g(static_cast<Eigen::Index>(constraints_.size()));
  const std::span<const double> xs{x.coords.data(), static_cast<std::size_t>(x.coords.size())};
  for (std::size_t i = 0; i < constraints_.size(); ++i)
    g[static_cast<Eigen::Index>(i)] = constraints_[i](xs, t);
  return g;
}

Tangent InequalitySet::constraint_gradient(double t, const Point& x, int i) const
{
  Vector grad(x.coords.size());
  constraints_.at(static_cast<std::size_t>(i))
    .gradient({x.coords.data(), static_cast<std::size_t>(x.coords.size())}, t,
              {grad.data(), static_cast<std::size_t>(grad.size())});
  return manifold().riemannian_gradient(x, grad);
}

}  // namespace sweepkit::sets
