#include "sweepkit/proxreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sweepkit::proxreg
{

using geometry::Matrix;
using geometry::random_point_in_ball;
using geometry::random_unit_tangent;
using geometry::Vector;

namespace
{

nlohmann::json vector_json(const Vector& v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json ball_json(const Ball& b)
{
  return {{"center", vector_json(b.center.coords)}, {"radius", b.radius}};
}

// Finite numbers only; JSON has no infinity.
nlohmann::json number_or_null(double x)
{
  if (std::isfinite(x))
    return x;
  return nullptr;
}

double working_radius(const Manifold& m, const Ball& region)
{
  const double rho = m.budget(region).rho;
  return std::min({0.9 * rho, 0.9 * m.domain_radius(), 2.0 * region.radius});
}

}  // namespace

std::optional<Point> sample_member(const MovingSet& set, double t, const Ball& ball, std::mt19937_64& rng,
                                   int attempts)
{
  for (int i = 0; i < attempts; ++i)
  {
    Point p = random_point_in_ball(set.manifold(), ball, rng);
    if (set.member(t, p))
      return p;
  }
  return std::nullopt;
}

BoundarySample sample_boundary(const MovingSet& set, double t, const Ball& region, std::mt19937_64& rng)
{
  const Manifold& m = set.manifold();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double limit = std::min(4.0 * region.radius, 0.9 * m.domain_radius());
  for (int attempt = 0; attempt < 200; ++attempt)
  {
    const Point p = random_point_in_ball(m, region, rng);
    Point outside = p;
    if (set.member(t, p))
    {
      // push the member outward until it leaves C(t), then bisect the crossing
      const Tangent u = random_unit_tangent(m, p, rng);
      double lo = 0.0;
      double hi = std::min(0.25 * region.radius, limit);
      bool left = false;
      while (hi <= limit)
      {
        if (!set.member(t, m.exp(p, hi * u)))
        {
          left = true;
          break;
        }
        lo = hi;
        hi *= 2.0;
      }
      if (!left)
        continue;
      while (hi - lo > 1e-9)
      {
        const double mid = 0.5 * (lo + hi);
        (set.member(t, m.exp(p, mid * u)) ? lo : hi) = mid;
      }
      outside = m.exp(p, hi * u);
    }
    try
    {
      const auto proj = set.project(t, outside);
      if (proj.degenerate)
        continue;
      const auto gens = set.normal_generators(t, proj.point);
      if (gens.empty())
        continue;
      Vector v = Vector::Zero(gens.front().components.size());
      for (const auto& g : gens)
        v += (0.1 + unit(rng)) * g.components / m.norm(g);
      Tangent n{proj.point, v};
      const double len = m.norm(n);
      if (!(len > 1e-12))
        continue;
      return BoundarySample{proj.point, (1.0 / len) * n};
    }
    catch (const Error&)
    {
      continue;
    }
  }
  throw StructuralError("no boundary point of C(t) found near the region of radius " +
                        std::to_string(region.radius));
}

HypomonotonicityReport sample_hypomonotonicity(const MovingSet& set, double t, const Ball& region, int n_samples,
                                               std::optional<double> declared_E, std::uint64_t seed)
{
  if (n_samples < 1)
    throw DomainError("hypomonotonicity sampling needs at least one sample");
  const Manifold& m = set.manifold();
  std::mt19937_64 rng(seed);
  const double reach = working_radius(m, region);

  HypomonotonicityReport r;
  r.region = region;
  r.t = t;
  r.declared_E = declared_E;
  r.seed = seed;
  r.max_ratio = -std::numeric_limits<double>::infinity();

  int misses = 0;
  long draws = 0;
  while (r.samples < n_samples)
  {
    if (misses > 50 * n_samples + 200)
      throw StructuralError("could not pair boundary points with members in the region of radius " +
                            std::to_string(region.radius));
    const BoundarySample b = sample_boundary(set, t, region, rng);
    std::optional<Point> y;
    if (draws++ % 2 == 0)
    {
      const BoundarySample other = sample_boundary(set, t, region, rng);
      y = other.x;
    }
    else
      y = sample_member(set, t, Ball{b.x, reach}, rng);
    if (!y)
    {
      ++misses;
      continue;
    }
    const double d = m.distance(b.x, *y);
    if (d < 1e-9 || d > reach)
    {
      ++misses;
      continue;
    }
    const double ratio = m.inner(b.normal, m.log(b.x, *y)) / (m.norm(b.normal) * d * d);
    if (declared_E && ratio > *declared_E)
      ++r.violations;
    if (ratio > r.max_ratio)
    {
      r.max_ratio = ratio;
      r.worst_x = b.x;
      r.worst_y = *y;
      r.worst_v = b.normal;
    }
    ++r.samples;
  }
  r.fitted_E = std::max(0.0, r.max_ratio);
  return r;
}

ConeMembershipReport test_cone_membership(const MovingSet& set, double t, const Point& x, const Tangent& v,
                                          int n_samples, std::uint64_t seed, double r0)
{
  const Manifold& m = set.manifold();
  m.require_base(v, x);
  if (!set.member(t, x))
    throw DomainError("cone membership is only defined at members of C(t)");

  ConeMembershipReport r;
  r.seed = seed;
  const double vnorm = m.norm(v);
  r0 = std::min(r0, 0.45 * m.domain_radius());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> fraction(0.5, 1.0);
  std::vector<Tangent> dirs;
  std::vector<double> fracs;
  for (int j = 0; j < n_samples; ++j)
  {
    dirs.push_back(random_unit_tangent(m, x, rng));
    fracs.push_back(fraction(rng));
  }

  constexpr int kLevels = 11;
  for (int k = 0; k < kLevels; ++k)
  {
    const double radius = std::ldexp(r0, -k);
    double best = -std::numeric_limits<double>::infinity();
    int found = 0;
    for (int j = 0; j < n_samples; ++j)
    {
      const Point y = m.exp(x, (radius * fracs[static_cast<std::size_t>(j)]) * dirs[static_cast<std::size_t>(j)]);
      if (!set.member(t, y))
        continue;
      const double d = m.distance(x, y);
      if (d <= 0.0)
        continue;
      ++found;
      best = std::max(best, m.inner(v, m.log(x, y)) / (d * d));
    }
    r.radii.push_back(radius);
    r.max_ratios.push_back(best);
    r.members_found.push_back(found);
  }

  if (vnorm == 0.0)
  {
    r.verdict = ConeVerdict::member;
    r.fitted_lambda = 0.0;
    return r;
  }
  if (std::any_of(r.members_found.begin(), r.members_found.end(), [](int c) { return c == 0; }))
  {
    r.verdict = ConeVerdict::inconclusive;
    r.fitted_lambda = *std::max_element(r.max_ratios.begin(), r.max_ratios.end());
    return r;
  }
  for (int k = 0; k + 2 < kLevels; ++k)
  {
    const double a = r.max_ratios[static_cast<std::size_t>(k)];
    const double b = r.max_ratios[static_cast<std::size_t>(k + 2)];
    // 4x over two halvings is the 1/d growth of a non-normal direction
    if (a > 0.0 && b >= 4.0 * a * (1.0 - 1e-9))
    {
      r.verdict = ConeVerdict::not_member;
      r.fitted_lambda = std::numeric_limits<double>::infinity();
      return r;
    }
  }
  r.verdict = ConeVerdict::member;
  r.fitted_lambda = std::max(0.0, *std::max_element(r.max_ratios.begin(), r.max_ratios.end()));
  return r;
}

UniquenessReport probe_projection_uniqueness(const MovingSet& set, double t, const Ball& region, int n_points,
                                             std::uint64_t seed, UniquenessOptions options)
{
  const Manifold& m = set.manifold();
  std::mt19937_64 rng(seed);
  UniquenessReport r;
  r.region = region;
  r.t = t;
  r.n_points = n_points;
  r.options = options;
  r.seed = seed;

  std::vector<BoundarySample> anchors;
  for (int i = 0; i < n_points; ++i)
    anchors.push_back(sample_boundary(set, t, region, rng));

  const double ceiling = 0.9 * m.domain_radius();
  bool failed = false;
  for (int level = 1; level <= options.levels; ++level)
  {
    const double s = region.radius * level / options.levels;
    if (s >= ceiling)
      break;
    int failures = 0;
    for (const auto& a : anchors)
    {
      const Point y = m.exp(a.x, s * a.normal);
      // starts stay well inside the radius where log is defined
      const double spread = std::min(2.0 * s, 0.5 * m.domain_radius());
      std::vector<std::pair<double, Point>> found;  // (d(y, p), p) per converged start
      for (int start = 0; start < options.starts; ++start)
      {
        const Point init = start == 0 ? y : random_point_in_ball(m, Ball{y, spread}, rng);
        try
        {
          const auto proj = set.project_from(t, y, init);
          found.emplace_back(proj.dist, proj.point);
        }
        catch (const Error&)
        {
          continue;  // a start that does not converge proves nothing either way
        }
      }
      bool pass = !found.empty();
      if (pass)
      {
        // every start reaching the minimal distance must land on the anchor
        double best = found.front().first;
        for (const auto& f : found)
          best = std::min(best, f.first);
        for (const auto& f : found)
          if (f.first <= best + options.tolerance && m.distance(f.second, a.x) > options.tolerance)
            pass = false;
      }
      if (!pass)
        ++failures;
    }
    r.distances.push_back(s);
    r.failures.push_back(failures);
    if (failures > 0 && !failed)
      failed = true;
    if (!failed)
      r.empirical_ell = s;
  }
  r.unbounded = !failed;
  return r;
}

LogMonotonicityReport check_log_monotonicity(const Manifold& m, const Ball& region, int n_samples,
                                             std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  LogMonotonicityReport r;
  r.region = region;
  r.seed = seed;
  r.fitted_A = std::numeric_limits<double>::infinity();
  r.max_ratio = -std::numeric_limits<double>::infinity();
  while (r.samples < n_samples)
  {
    const Point x = random_point_in_ball(m, region, rng);
    const Point z1 = random_point_in_ball(m, region, rng);
    const Point z2 = random_point_in_ball(m, region, rng);
    const double d = m.distance(z1, z2);
    if (d < 1e-9)
      continue;
    const Tangent lhs = m.log(z2, x) - m.transport(z1, z2, m.log(z1, x));
    const double ratio = m.inner(lhs, m.log(z2, z1)) / (d * d);
    r.fitted_A = std::min(r.fitted_A, ratio);
    r.max_ratio = std::max(r.max_ratio, ratio);
    ++r.samples;
  }
  r.positive = r.fitted_A > 0.0;
  return r;
}

const char* to_string(ConeVerdict v)
{
  switch (v)
  {
    case ConeVerdict::member: return "member";
    case ConeVerdict::not_member: return "not_member";
    case ConeVerdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

nlohmann::json point_json(const Point& p) { return vector_json(p.coords); }

nlohmann::json to_json(const HypomonotonicityReport& r)
{
  nlohmann::json j;
  j["report"] = "hypomonotonicity";
  j["region"] = ball_json(r.region);
  j["t"] = r.t;
  j["samples"] = r.samples;
  j["max_ratio"] = number_or_null(r.max_ratio);
  j["fitted_E"] = r.fitted_E;
  j["fitted_E_is_empirical"] = true;
  j["declared_E"] = r.declared_E ? nlohmann::json(*r.declared_E) : nlohmann::json(nullptr);
  j["violations"] = r.violations;
  j["worst_pair"] = {{"x", point_json(r.worst_x)}, {"y", point_json(r.worst_y)},
                     {"v", vector_json(r.worst_v.components)}};
  j["seed"] = r.seed;
  return j;
}

nlohmann::json to_json(const ConeMembershipReport& r)
{
  nlohmann::json ratios = nlohmann::json::array();
  for (double x : r.max_ratios)
    ratios.push_back(number_or_null(x));
  return {{"report", "cone_membership"},   {"verdict", to_string(r.verdict)},
          {"fitted_lambda", number_or_null(r.fitted_lambda)},
          {"radii", r.radii},              {"max_ratios", ratios},
          {"members_found", r.members_found}, {"seed", r.seed}};
}

nlohmann::json to_json(const UniquenessReport& r)
{
  return {{"report", "projection_uniqueness"},
          {"region", ball_json(r.region)},
          {"t", r.t},
          {"n_points", r.n_points},
          {"starts", r.options.starts},
          {"tolerance", r.options.tolerance},
          {"distances", r.distances},
          {"failures", r.failures},
          {"empirical_ell", r.empirical_ell},
          {"unbounded", r.unbounded},
          {"seed", r.seed}};
}

nlohmann::json to_json(const LogMonotonicityReport& r)
{
  return {{"report", "log_monotonicity"},
          {"region", ball_json(r.region)},
          {"samples", r.samples},
          {"fitted_A", number_or_null(r.fitted_A)},
          {"max_ratio", number_or_null(r.max_ratio)},
          {"positive", r.positive},
          {"seed", r.seed}};
}

}  // namespace sweepkit::proxreg
