#include "sweepkit/sweep.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <random>

#include "sweepkit/proxreg.hpp"

namespace sweepkit::sweep
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json finite_or_null(double x)
{
  if (std::isfinite(x))
    return x;
  return nullptr;
}

// Index of the step containing t; the last step owns t = T.
std::size_t step_index(const Trajectory& traj, double t)
{
  if (traj.times.size() < 2)
    throw DomainError("trajectory has no steps");
  const double slack = 1e-12 * std::max(1.0, traj.horizon());
  if (!(t >= traj.times.front() - slack && t <= traj.times.back() + slack))
    throw DomainError("time " + format_double(t) + " outside [0, " + format_double(traj.horizon()) + "]");
  const auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  const std::size_t i = it == traj.times.begin() ? 0 : static_cast<std::size_t>(it - traj.times.begin()) - 1;
  return std::min(i, traj.times.size() - 2);
}

double step_fraction(const Trajectory& traj, std::size_t i, double t)
{
  const double s = (t - traj.times[i]) / (traj.times[i + 1] - traj.times[i]);
  return std::clamp(s, 0.0, 1.0);
}

std::uint64_t mix(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  const double n = static_cast<double>(x.size());
  if (x.size() < 2)
    return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

Tangent Perturbation::operator()(const Manifold& m, double t, const Point& x) const
{
  if (!field)
    return m.zero(x);
  const Vector raw = field(t, x.coords);
  if (raw.size() != x.coords.size())
    throw StructuralError("perturbation returned " + std::to_string(raw.size()) + " components, expected " +
                          std::to_string(x.coords.size()));
  return m.project_tangent(x, raw);
}

StepBudget admissible_step(const Scenario& s, std::optional<double> eta, std::optional<double> ell)
{
  const Manifold& m = *s.manifold;
  const double fsup = s.f.sup_norm;
  const double kl = s.lipschitz();
  const double speed = 2.0 * fsup + kl;

  const double radius = std::clamp(s.horizon * speed, 1e-3, 0.9 * m.domain_radius());
  const geometry::GeometryBudget budget = m.budget(Ball{s.x0, radius});

  StepBudget out;
  out.rho = budget.rho;
  if (speed == 0.0)
  {
    out.h_budget = kInf;
    out.sub_horizon = kInf;
    out.h_max = s.horizon;
    out.ceiling = true;
    return out;
  }
  const double e = eta.value_or(s.set->prox_radius_hint());
  const double l = ell.value_or(s.set->prox_radius_hint());
  out.h_budget = fsup > 0.0 ? budget.rho / (2.0 * fsup) : kInf;
  out.sub_horizon = std::min(e / 2.0, l) / speed;
  out.h_max = std::min({out.h_budget, out.sub_horizon, s.horizon});
  return out;
}

Trajectory catching_up(const Scenario& s, double h, const CatchingUpOptions& options)
{
  return catching_up_from(s, s.x0, h, options);
}

Trajectory catching_up_from(const Scenario& s, const Point& x0, double h, const CatchingUpOptions& options)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw DomainError("step must be finite and positive");
  if (!(s.horizon > 0.0) || !std::isfinite(s.horizon))
    throw DomainError("horizon must be finite and positive");
  const Manifold& m = *s.manifold;
  const MovingSet& set = *s.set;
  m.require_same(x0);
  if (!set.member(0.0, x0))
    throw StructuralError("initial point is not in C(0) (violation " + format_double(set.violation(0.0, x0)) +
                          ")");

  const long long n = std::max(1LL, std::llround(s.horizon / h));
  const double step = s.horizon / static_cast<double>(n);

  Trajectory traj;
  traj.manifold = s.manifold;
  traj.h = step;
  traj.scenario_hash = s.hash;
  traj.seed = s.seed;
  traj.times.reserve(n + 1);
  traj.nodes.reserve(n + 1);
  traj.times.push_back(0.0);
  traj.nodes.push_back(x0);
  traj.predictor_distance.push_back(0.0);
  traj.active.push_back(set.active_set(0.0, x0));

  SolverStats& st = traj.stats;
  const StepBudget budget = admissible_step(s, options.eta, options.ell);
  st.admissible_h = budget.h_max;
  st.sub_horizon = budget.sub_horizon;
  st.sub_horizons = std::isfinite(budget.sub_horizon)
                      ? std::max(1, static_cast<int>(std::ceil(s.horizon / budget.sub_horizon - 1e-12)))
                      : 1;
  if (!budget.ceiling && step > budget.h_max * (1.0 + 1e-12))
    st.warnings.push_back("step " + format_double(step) + " exceeds the admissible step " +
                          format_double(budget.h_max));
  const double ell = options.ell.value_or(set.prox_radius_hint());
  st.velocity_bound = 2.0 * s.f.sup_norm + s.lipschitz() + s.tolerances.velocity_margin;
  st.max_violation = set.violation(0.0, x0);

  const double f_slack = 1e-9 * std::max(1.0, s.f.sup_norm);
  for (long long i = 0; i < n; ++i)
  {
    const double ti = traj.times.back();
    const double tn = s.horizon * static_cast<double>(i + 1) / static_cast<double>(n);
    const Point& xi = traj.nodes.back();
    sets::ProjectionResult proj;
    try
    {
      const Tangent fi = s.f(m, ti, xi);
      const double fnorm = m.norm(fi);
      if (fnorm > s.f.sup_norm + f_slack)
      {
        if (st.perturbation_bound_violations == 0)
          st.warnings.push_back("|f| = " + format_double(fnorm) + " exceeds the declared sup norm at t = " +
                                format_double(ti));
        ++st.perturbation_bound_violations;
      }
      const Point predictor = m.exp(xi, step * fi);
      proj = set.project(tn, predictor);
    }
    catch (const Error& e)
    {
      st.certified = false;
      throw SweepFailure(std::string("step ") + std::to_string(i) + ": " + e.what(), static_cast<int>(i),
                         traj);
    }

    st.projection_iterations += proj.iterations;
    st.max_projection_iterations = std::max(st.max_projection_iterations, proj.iterations);
    if (proj.dist > 0.0)
      ++st.active_projections;
    if (proj.degenerate)
    {
      ++st.degenerate_projections;
      st.certified = false;
    }
    if (proj.dist > ell)
    {
      ++st.beyond_ell;
      st.certified = false;
    }

    const double v = m.distance(xi, proj.point) / step;
    traj.velocities.push_back(v);
    st.max_velocity = std::max(st.max_velocity, v);
    st.max_violation = std::max(st.max_violation, set.violation(tn, proj.point));
    traj.times.push_back(tn);
    traj.predictor_distance.push_back(proj.dist);
    traj.active.push_back(std::move(proj.active_set));
    traj.nodes.push_back(std::move(proj.point));
    ++st.steps;
  }

  st.velocity_ok = st.max_velocity <= st.velocity_bound;
  if (!st.velocity_ok)
    st.warnings.push_back("discrete velocity " + format_double(st.max_velocity) + " exceeds the bound " +
                          format_double(st.velocity_bound));
  if (st.degenerate_projections > 0)
    st.warnings.push_back(std::to_string(st.degenerate_projections) + " projection(s) hit a non-unique locus");
  if (st.beyond_ell > 0)
    st.warnings.push_back(std::to_string(st.beyond_ell) + " projection(s) farther than ell = " +
                          format_double(ell));
  return traj;
}

Point interpolate(const Trajectory& traj, double t)
{
  const std::size_t i = step_index(traj, t);
  const double s = step_fraction(traj, i, t);
  const Point& a = traj.nodes[i];
  const Point& b = traj.nodes[i + 1];
  if (s == 0.0)
    return a;
  if (s == 1.0)
    return b;
  const Manifold& m = *traj.manifold;
  return m.exp(a, s * m.log(a, b));
}

Tangent interpolant_velocity(const Trajectory& traj, double t)
{
  const std::size_t i = step_index(traj, t);
  const double s = step_fraction(traj, i, t);
  const Manifold& m = *traj.manifold;
  const Point& a = traj.nodes[i];
  const Tangent step = m.log(a, traj.nodes[i + 1]);
  const Tangent v = (1.0 / (traj.times[i + 1] - traj.times[i])) * step;
  if (s == 0.0)
    return v;
  const Point x = m.exp(a, s * step);
  return m.transport(a, x, v);
}

ResidualSample inclusion_residual(const Scenario& s, const Trajectory& traj, double t, double E_hat,
                                  int n_samples, std::uint64_t seed, double radius)
{
  const Manifold& m = *s.manifold;
  const MovingSet& set = *s.set;
  const Point x = interpolate(traj, t);
  const Tangent w = s.f(m, t, x) - interpolant_velocity(traj, t);
  const double wn = m.norm(w);

  std::mt19937_64 rng(mix(seed ^ mix(std::bit_cast<std::uint64_t>(t))));
  const Ball ball{x, radius};
  ResidualSample out;
  out.w_norm = wn;
  double sup = -kInf;
  const auto visit = [&](const Point& c) {
    const double d = m.distance(x, c);
    if (d <= 1e-12)
      return;
    ++out.members;
    sup = std::max(sup, m.inner(w, m.log(x, c)) - E_hat * wn * d * d);
  };
  for (int k = 0; k < n_samples; ++k)
  {
    if (k % 2 == 0)
    {
      if (auto c = proxreg::sample_member(set, t, ball, rng, 20))
        visit(*c);
    }
    else
    {
      const Point y = geometry::random_point_in_ball(m, ball, rng);
      try
      {
        const sets::ProjectionResult p = set.project(t, y);
        if (!p.degenerate)
          visit(p.point);
      }
      catch (const NumericError&)
      {
        // skipped; the sample budget absorbs the occasional failure
      }
    }
  }
  if (out.members == 0)
  {
    out.inconclusive = true;
    return out;
  }
  out.residual = std::max(0.0, sup);
  return out;
}

SeparationCurve gronwall_separation(const Scenario& s, const Point& x0a, const Point& x0b, double h, double E_hat)
{
  auto run_b = std::async(std::launch::async, [&] { return catching_up_from(s, x0b, h); });
  const Trajectory a = catching_up_from(s, x0a, h);
  const Trajectory b = run_b.get();

  const Manifold& m = *s.manifold;
  SeparationCurve out;
  out.times = a.times;
  out.separation.reserve(a.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i)
    out.separation.push_back(m.distance(a.nodes[i], b.nodes[i]));

  std::vector<double> ts, logs;
  for (std::size_t i = 0; i < out.separation.size(); ++i)
  {
    const double d = out.separation[i];
    if (d <= 1e-13)
    {
      out.merged = i > 0 || out.separation.size() == 1 || d == 0.0;
      break;
    }
    ts.push_back(out.times[i]);
    logs.push_back(std::log(d * d));
  }
  out.fitted_rate = least_squares_slope(ts, logs);
  out.E_hat = E_hat;
  out.L_f = s.f.lipschitz;
  out.F = 2.0 * s.f.sup_norm + a.stats.max_velocity + b.stats.max_velocity;
  out.bound = 2.0 * (E_hat * out.F + out.L_f);
  return out;
}

std::string format_double(double x)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

void write_csv(const Trajectory& traj, std::ostream& out)
{
  const std::size_t dim = traj.nodes.empty() ? 0 : static_cast<std::size_t>(traj.nodes.front().coords.size());
  out << 't';
  for (std::size_t k = 0; k < dim; ++k)
    out << ",x" << k + 1;
  out << ",v_discrete,dist_to_set,active_set\n";
  for (std::size_t i = 0; i < traj.nodes.size(); ++i)
  {
    out << format_double(traj.times[i]);
    for (std::size_t k = 0; k < dim; ++k)
      out << ',' << format_double(traj.nodes[i].coords[static_cast<Eigen::Index>(k)]);
    out << ',' << format_double(i == 0 ? 0.0 : traj.velocities[i - 1]);
    out << ',' << format_double(traj.predictor_distance[i]) << ',';
    for (std::size_t j = 0; j < traj.active[i].size(); ++j)
      out << (j ? ";" : "") << traj.active[i][j];
    out << '\n';
  }
}

nlohmann::json metadata(const Scenario& s, const Trajectory& traj)
{
  const SolverStats& st = traj.stats;
  nlohmann::json j;
  j["scenario"] = s.name;
  j["scenario_hash"] = traj.scenario_hash;
  j["seed"] = traj.seed;
  j["manifold"] = {{"kind", std::string(geometry::to_string(s.manifold->kind()))},
                   {"dim", s.manifold->dimension()}};
  j["set"] = s.set->kind();
  j["h"] = traj.h;
  j["requested_h"] = s.h;
  j["horizon"] = traj.horizon();
  j["steps"] = traj.steps();
  j["tolerances"] = {{"feasibility", s.tolerances.feasibility},
                     {"projector", s.tolerances.projector},
                     {"uniqueness", s.tolerances.uniqueness},
                     {"velocity_margin", s.tolerances.velocity_margin},
                     {"activity", s.tolerances.activity}};
  j["stats"] = {{"projection_iterations", st.projection_iterations},
                {"max_projection_iterations", st.max_projection_iterations},
                {"active_projections", st.active_projections},
                {"degenerate_projections", st.degenerate_projections},
                {"beyond_ell", st.beyond_ell},
                {"perturbation_bound_violations", st.perturbation_bound_violations},
                {"max_violation", st.max_violation},
                {"max_velocity", st.max_velocity},
                {"velocity_bound", st.velocity_bound},
                {"admissible_h", finite_or_null(st.admissible_h)},
                {"sub_horizon", finite_or_null(st.sub_horizon)},
                {"sub_horizons", st.sub_horizons}};
  j["certified"] = st.certified;
  j["velocity_ok"] = st.velocity_ok;
  j["warnings"] = st.warnings;
  return j;
}

}  // namespace sweepkit::sweep
