#include "sweepkit/implicit_manifold.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <numbers>

#include "sweepkit/errors.hpp"

namespace sweepkit::geometry
{

namespace
{

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

std::span<const double> view(const Vector& v)
{
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Right-hand side of the projected geodesic (and optional transport) system.
// State layout: [x, v] or [x, v, w], each block of ambient size n.
struct GeodesicSystem
{
  const ImplicitSubmanifold* m;
  int n;
  bool transport;
  Vector x, v, w;

  void operator()(const State& s, State& ds, double /*t*/)
  {
    x = Eigen::Map<const Vector>(s.data(), n);
    v = Eigen::Map<const Vector>(s.data() + n, n);
    Eigen::Map<Vector>(ds.data(), n) = v;
    Eigen::Map<Vector>(ds.data() + n, n) = m->acceleration(x, v);
    if (transport)
    {
      w = Eigen::Map<const Vector>(s.data() + 2 * n, n);
      Eigen::Map<Vector>(ds.data() + 2 * n, n) = m->transport_rate(x, v, w);
    }
  }
};

}  // namespace

ImplicitSubmanifold::ImplicitSubmanifold(int ambient_dim, std::vector<expr::Expression> equalities)
  : ImplicitSubmanifold(ambient_dim, std::move(equalities), Options{})
{
}

ImplicitSubmanifold::ImplicitSubmanifold(int ambient_dim, std::vector<expr::Expression> equalities,
                                         Options options)
  : Manifold(1e-8, options.domain_radius),
    ambient_dim_(ambient_dim),
    equalities_(std::move(equalities)),
    options_(options)
{
  if (ambient_dim < 2)
    throw StructuralError("implicit submanifold needs an ambient dimension of at least 2");
  if (equalities_.empty() || static_cast<int>(equalities_.size()) >= ambient_dim)
    throw StructuralError("implicit submanifold needs between 1 and n-1 equality constraints");
  for (const auto& g : equalities_)
  {
    if (g.dimension() != ambient_dim)
      throw StructuralError("equality '" + g.source() + "' is compiled for a different dimension");
    if (g.depends_on_time())
      throw StructuralError("equality '" + g.source() + "' depends on time");
  }
}

Matrix ImplicitSubmanifold::jacobian(const Vector& coords) const
{
  Matrix jac(static_cast<Eigen::Index>(equalities_.size()), ambient_dim_);
  Vector row(ambient_dim_);
  for (std::size_t k = 0; k < equalities_.size(); ++k)
  {
    equalities_[k].gradient(view(coords), 0.0, {row.data(), static_cast<std::size_t>(row.size())});
    jac.row(static_cast<Eigen::Index>(k)) = row.transpose();
  }
  return jac;
}

Vector ImplicitSubmanifold::acceleration(const Vector& x, const Vector& v) const
{
  const Matrix jac = jacobian(x);
  Vector q(jac.rows());
  for (std::size_t k = 0; k < equalities_.size(); ++k)
    q[static_cast<Eigen::Index>(k)] = equalities_[k].jet(view(x), 0.0, view(v)).d2;
  const Matrix gram = jac * jac.transpose();
  return -jac.transpose() * gram.ldlt().solve(q);
}

Vector ImplicitSubmanifold::transport_rate(const Vector& x, const Vector& v, const Vector& w) const
{
  const Matrix jac = jacobian(x);
  Vector p(jac.rows());
  for (std::size_t k = 0; k < equalities_.size(); ++k)
    p[static_cast<Eigen::Index>(k)] = equalities_[k].hessian_form(view(x), 0.0, view(v), view(w));
  const Matrix gram = jac * jac.transpose();
  return -jac.transpose() * gram.ldlt().solve(p);
}

double ImplicitSubmanifold::normal_curvature(const Point& x, const Tangent& u) const
{
  require_base(u, x);
  const double len = u.components.norm();
  if (len == 0.0)
    throw DomainError("normal curvature needs a nonzero direction");
  const Vector e = u.components / len;
  return acceleration(x.coords, e).norm();
}

double ImplicitSubmanifold::do_residual(const Vector& coords) const
{
  double worst = 0.0;
  for (const auto& g : equalities_)
    worst = std::max(worst, std::abs(g(view(coords), 0.0)));
  return worst;
}

Vector ImplicitSubmanifold::do_snap(const Vector& coords) const
{
  Vector x = coords;
  Vector g(static_cast<Eigen::Index>(equalities_.size()));
  for (int iter = 0; iter < 50; ++iter)
  {
    for (std::size_t k = 0; k < equalities_.size(); ++k)
      g[static_cast<Eigen::Index>(k)] = equalities_[k](view(x), 0.0);
    if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.norm()))
      return x;
    const Matrix jac = jacobian(x);
    const Vector step = jac.transpose() * (jac * jac.transpose()).ldlt().solve(g);
    x -= step;
    if (step.norm() <= 1e-16 * (1.0 + x.norm()))
      break;
  }
  const double r = do_residual(x);
  if (!(r <= feasibility_tolerance()))
    throw NumericError("Newton projection onto the constraint surface failed", r);
  return x;
}

Vector ImplicitSubmanifold::project_at(const Vector& x, const Vector& ambient) const
{
  const Matrix jac = jacobian(x);
  return ambient - jac.transpose() * (jac * jac.transpose()).ldlt().solve(jac * ambient);
}

Vector ImplicitSubmanifold::do_project_tangent(const Point& x, const Vector& ambient) const
{
  return project_at(x.coords, ambient);
}

Matrix ImplicitSubmanifold::do_tangent_basis(const Point& x) const
{
  const Matrix jt = jacobian(x.coords).transpose();
  const Eigen::HouseholderQR<Matrix> qr(jt);
  const Matrix q = qr.householderQ();
  return q.rightCols(dimension());
}

Vector ImplicitSubmanifold::flow(const Vector& x0, const Vector& v0, Vector* w0) const
{
  const int n = ambient_dim_;
  const bool transport = w0 != nullptr;
  State s(static_cast<std::size_t>((transport ? 3 : 2) * n));
  Eigen::Map<Vector>(s.data(), n) = x0;
  Eigen::Map<Vector>(s.data() + n, n) = v0;
  const double speed = v0.norm();
  double w_norm = 0.0;
  if (transport)
  {
    Eigen::Map<Vector>(s.data() + 2 * n, n) = *w0;
    w_norm = w0->norm();
  }

  GeodesicSystem system{this, n, transport, Vector(n), Vector(n), Vector(n)};
  auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(options_.integrator_tol,
                                                                                 options_.integrator_tol);
  double t = 0.0;
  double dt = 0.1;
  int attempts = 0;
  while (t < 1.0)
  {
    if (++attempts > 100000)
      throw NumericError("geodesic integration did not reach unit time", 1.0 - t);
    if (t + dt > 1.0)
      dt = 1.0 - t;
    if (stepper.try_step(std::ref(system), s, t, dt) != odeint::success)
      continue;

    // drift control: back onto the surface, velocities back into the tangent space
    Eigen::Map<Vector> xs(s.data(), n);
    Eigen::Map<Vector> vs(s.data() + n, n);
    xs = do_snap(xs);
    Vector pv = project_at(xs, vs);
    if (pv.norm() > 0.0)
      pv *= speed / pv.norm();
    vs = pv;
    if (transport)
    {
      Eigen::Map<Vector> ws(s.data() + 2 * n, n);
      Vector pw = project_at(xs, ws);
      if (pw.norm() > 0.0)
        pw *= w_norm / pw.norm();
      ws = pw;
    }
    if (1.0 - t < 1e-14)
      t = 1.0;
  }
  if (transport)
    *w0 = Eigen::Map<const Vector>(s.data() + 2 * n, n);
  return Eigen::Map<const Vector>(s.data(), n);
}

Vector ImplicitSubmanifold::do_exp(const Point& x, const Vector& v) const
{
  return flow(x.coords, v, nullptr);
}

Vector ImplicitSubmanifold::do_log(const Point& x, const Point& y) const
{
  const Matrix basis = do_tangent_basis(x);
  const auto shoot = [&](const Vector& a) -> Vector {
    if (a.norm() == 0.0)
      return x.coords - y.coords;
    return flow(x.coords, basis * a, nullptr) - y.coords;
  };
  const double limit = 4.0 * domain_radius();

  Vector a = basis.transpose() * (y.coords - x.coords);
  Vector residual = shoot(a);
  double r = residual.norm();
  Matrix jac(ambient_dim_, basis.cols());
  for (int iter = 0; iter < options_.shooting_max_iter; ++iter)
  {
    if (r <= options_.shooting_tol)
      return basis * a;
    const double h = 1e-7 * std::max(1.0, a.norm());
    for (Eigen::Index j = 0; j < a.size(); ++j)
    {
      Vector probe = a;
      probe[j] += h;
      jac.col(j) = (shoot(probe) - residual) / h;
    }
    const Vector delta = jac.colPivHouseholderQr().solve(-residual);

    bool accepted = false;
    for (double s = 1.0; s > 1e-6; s *= 0.5)
    {
      const Vector trial = a + s * delta;
      if (trial.norm() > limit)
        continue;
      Vector trial_residual = shoot(trial);
      const double tr = trial_residual.norm();
      if (tr < r)
      {
        a = trial;
        residual = std::move(trial_residual);
        r = tr;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      break;
  }
  if (r <= options_.shooting_tol)
    return basis * a;
  throw NumericError("shooting for the logarithm did not converge", r);
}

double ImplicitSubmanifold::do_distance(const Point& x, const Point& y) const
{
  return do_log(x, y).norm();
}

Vector ImplicitSubmanifold::do_transport(const Point& x, const Point&, const Vector& log_xy,
                                         const Vector& v) const
{
  Vector w = v;
  flow(x.coords, log_xy, &w);
  return w;
}

GeometryBudget ImplicitSubmanifold::do_budget(const Ball& region) const
{
  std::mt19937_64 rng(0xb0d9e7);
  double kappa = 0.0;
  const auto visit = [&](const Point& p) {
    const Matrix basis = do_tangent_basis(p);
    for (Eigen::Index j = 0; j < basis.cols(); ++j)
      kappa = std::max(kappa, acceleration(p.coords, basis.col(j)).norm());
    for (int k = 0; k < 4 && basis.cols() > 1; ++k)
    {
      const Tangent u = random_unit_tangent(*this, p, rng);
      kappa = std::max(kappa, acceleration(p.coords, u.components).norm());
    }
  };
  visit(region.center);
  for (int i = 0; i < options_.budget_samples; ++i)
    visit(random_point_in_ball(*this, region, rng));

  GeometryBudget b;
  b.region = region;
  b.normal_curvature = kappa;
  b.curvature_bound = kappa * kappa;
  b.rho = kappa > 0.0 ? std::min(domain_radius(), std::numbers::pi / (2.0 * kappa)) : domain_radius();
  const double s = b.rho * kappa;
  b.hessian_bound = s > 0.0 ? 2.0 * s / std::tanh(s) : 2.0;
  b.exp_smoothness = std::max(kappa, 1e-12) * b.rho * b.rho;
  b.log_lipschitz = sample_log_lipschitz(*this, region, b.rho, 16);
  b.estimated = true;
  return b;
}

}  // namespace sweepkit::geometry
