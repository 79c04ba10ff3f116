#include "sweepkit/lab.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace sweepkit::lab
{

namespace
{

using sweep::format_double;
using sweep::Trajectory;

constexpr double kGolden = 0.381966;

std::uint64_t mix(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nlohmann::json finite_or_null(double x)
{
  if (std::isfinite(x))
    return x;
  return nullptr;
}

double median(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_time(double horizon, int k, int n) { return horizon * static_cast<double>(k) / (n - 1); }

double sup_error(const Trajectory& traj, const std::function<Point(double)>& reference, int n)
{
  const geometry::Manifold& m = *traj.manifold;
  double worst = 0.0;
  for (int k = 0; k < n; ++k)
  {
    const double t = sample_time(traj.horizon(), k, n);
    worst = std::max(worst, m.distance(sweep::interpolate(traj, t), reference(t)));
  }
  return worst;
}

}  // namespace

const char* to_string(Reference r) { return r == Reference::analytic ? "analytic" : "finest"; }

const char* to_string(Status s)
{
  switch (s)
  {
    case Status::pass: return "pass";
    case Status::warn: return "warn";
    case Status::fail: return "fail";
  }
  return "fail";
}

std::optional<AnalyticSolution> analytic_solution(const Scenario& s)
{
  const auto* half = dynamic_cast<const sets::HalfSpace*>(s.set.get());
  if (!half || s.manifold->kind() != geometry::ManifoldKind::euclidean || s.manifold->dimension() != 1 ||
      !s.f.is_zero())
    return std::nullopt;
  const double sign = half->normal()[0];
  const double offset = half->offset();
  const double speed = half->speed();
  const double x0 = s.x0.coords[0];
  const geometry::ManifoldPtr m = s.manifold;
  // in the coordinate y = sign * x the set is [offset + speed t, inf)
  return AnalyticSolution([=](double t) {
    const double barrier = offset + std::max(0.0, speed * t);
    const double y = std::max(sign * x0, barrier);
    return m->point(geometry::Vector::Constant(1, sign * y));
  });
}

std::vector<double> dyadic_steps(int first, int levels)
{
  std::vector<double> out;
  for (int k = first; k < first + levels; ++k)
    out.push_back(std::ldexp(1.0, -k));
  return out;
}

void fit_order(RateStudy& r)
{
  const std::size_t n = r.errors.size();
  r.fitted = false;
  r.knee_excluded = false;
  r.fit_from = 0;
  r.fitted_order = std::numeric_limits<double>::quiet_NaN();
  r.constant = std::numeric_limits<double>::quiet_NaN();
  r.monotone = true;
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (r.errors[k + 1] > 1.1 * r.errors[k] + kErrorFloor)
      r.monotone = false;

  r.saturated = std::all_of(r.errors.begin(), r.errors.end(), [](double e) { return e <= kErrorFloor; });
  if (r.saturated)
  {
    r.notes.push_back("errors at the floor " + format_double(kErrorFloor) + "; order not fitted");
    return;
  }
  if (n < 4)
  {
    r.notes.push_back("fewer than 4 levels; order not fitted");
    return;
  }

  // Pre-asymptotic knee: the coarsest pairwise order is off the consistent
  // tail by more than 0.3.
  if (n >= 6)
  {
    std::vector<double> pair;
    bool positive = true;
    for (std::size_t k = 0; k + 1 < n; ++k)
    {
      if (r.errors[k] <= kErrorFloor || r.errors[k + 1] <= kErrorFloor)
      {
        positive = false;
        break;
      }
      pair.push_back(std::log(r.errors[k] / r.errors[k + 1]) / std::log(r.steps[k] / r.steps[k + 1]));
    }
    if (positive)
    {
      const std::vector<double> tail(pair.begin() + 2, pair.end());
      const double mid = median(tail);
      const bool consistent =
        std::all_of(tail.begin(), tail.end(), [&](double p) { return std::abs(p - mid) <= 0.3; });
      if (consistent && std::abs(pair[0] - mid) > 0.3)
      {
        r.knee_excluded = true;
        r.fit_from = 2;
        r.notes.push_back("pre-asymptotic knee: two coarsest levels excluded from the fit");
      }
    }
  }

  std::vector<double> lx, ly;
  for (std::size_t k = static_cast<std::size_t>(r.fit_from); k < n; ++k)
    if (r.errors[k] > kErrorFloor)
    {
      lx.push_back(std::log(r.steps[k]));
      ly.push_back(std::log(r.errors[k]));
    }
  if (lx.size() < 4)
  {
    r.saturated = true;
    r.notes.push_back("fewer than 4 levels above the error floor; order not fitted");
    return;
  }
  const double m = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i)
  {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i)
  {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  r.fitted = true;
  r.fitted_order = sxy / sxx;
  r.constant = std::exp(my - r.fitted_order * mx);
}

RateStudy run_rate_study(const Scenario& s, std::vector<double> steps, Reference reference)
{
  if (steps.empty())
    throw DomainError("rate study needs at least one step");
  for (std::size_t k = 0; k + 1 < steps.size(); ++k)
    if (!(steps[k] > steps[k + 1]))
      throw DomainError("rate study steps must be strictly decreasing");

  RateStudy r;
  r.scenario = s.name;
  r.scenario_hash = s.hash;
  r.seed = s.seed;
  r.reference = reference;

  std::function<Point(double)> exact;
  std::shared_ptr<Trajectory> finest;
  if (reference == Reference::analytic)
  {
    auto a = analytic_solution(s);
    if (!a)
      throw DomainError("no analytic solution is known for scenario '" + s.name + "'");
    exact = *a;
  }
  else
  {
    r.reference_h = steps.back() / 8.0;
    try
    {
      finest = std::make_shared<Trajectory>(sweep::catching_up(s, r.reference_h));
    }
    catch (const sweep::SweepFailure& e)
    {
      throw RateStudyFailure(std::string("reference run failed: ") + e.what(), r);
    }
    exact = [finest](double t) { return sweep::interpolate(*finest, t); };
  }

  struct Level
  {
    double error;
    bool certified;
  };
  std::vector<std::future<Level>> jobs;
  for (double h : steps)
    jobs.push_back(std::async(std::launch::async, [&, h] {
      const Trajectory traj = sweep::catching_up(s, h);
      return Level{sup_error(traj, exact, r.sample_times), traj.stats.certified};
    }));

  std::string failure;
  for (std::size_t k = 0; k < steps.size(); ++k)
  {
    try
    {
      const Level l = jobs[k].get();
      if (failure.empty())
      {
        r.steps.push_back(steps[k]);
        r.errors.push_back(l.error);
        r.certified.push_back(l.certified);
      }
    }
    catch (const Error& e)
    {
      if (failure.empty())
        failure = "h = " + format_double(steps[k]) + ": " + e.what();
    }
  }
  if (!failure.empty())
    throw RateStudyFailure(failure, r);

  fit_order(r);
  return r;
}

nlohmann::json to_json(const RateStudy& r)
{
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["scenario_hash"] = r.scenario_hash;
  j["seed"] = r.seed;
  j["reference"] = to_string(r.reference);
  if (r.reference == Reference::finest)
    j["reference_h"] = r.reference_h;
  j["sample_times"] = r.sample_times;
  j["steps"] = r.steps;
  j["errors"] = r.errors;
  j["certified"] = r.certified;
  j["fitted"] = r.fitted;
  j["fitted_order"] = finite_or_null(r.fitted_order);
  j["constant"] = finite_or_null(r.constant);
  j["fit_from"] = r.fit_from;
  j["knee_excluded"] = r.knee_excluded;
  j["saturated"] = r.saturated;
  j["monotone"] = r.monotone;
  j["notes"] = r.notes;
  return j;
}

std::string format_table(const RateStudy& r)
{
  std::ostringstream out;
  out << "scenario " << r.scenario << ", reference " << to_string(r.reference);
  if (r.reference == Reference::finest)
    out << " (h = " << format_double(r.reference_h) << ")";
  out << "\n";
  out << std::setw(14) << "h" << std::setw(16) << "error" << std::setw(10) << "order" << "\n";
  for (std::size_t k = 0; k < r.steps.size(); ++k)
  {
    out << std::setw(14) << format_double(r.steps[k]) << std::setw(16) << std::setprecision(6) << r.errors[k];
    if (k > 0 && r.errors[k] > kErrorFloor && r.errors[k - 1] > kErrorFloor)
      out << std::setw(10) << std::setprecision(3)
          << std::log(r.errors[k - 1] / r.errors[k]) / std::log(r.steps[k - 1] / r.steps[k]);
    out << "\n";
  }
  if (r.fitted)
    out << "fitted order " << std::setprecision(4) << r.fitted_order << ", constant " << r.constant
        << (r.knee_excluded ? " (two coarsest levels excluded)" : "") << "\n";
  else
    out << "order not fitted" << (r.saturated ? " (saturated)" : "") << "\n";
  return out.str();
}

void write_gnuplot(const RateStudy& r, std::ostream& out)
{
  out << "# h error\n";
  for (std::size_t k = 0; k < r.steps.size(); ++k)
    out << format_double(r.steps[k]) << ' ' << format_double(r.errors[k]) << '\n';
}

CertificationReport certify_scenario(const Scenario& s, const CertifyOptions& options)
{
  CertificationReport rep;
  rep.scenario = s.name;
  rep.scenario_hash = s.hash;
  rep.seed = s.seed;
  rep.h = s.h;
  const auto escalate = [&rep](Status st, std::string why) {
    if (static_cast<int>(st) > static_cast<int>(rep.status))
      rep.status = st;
    rep.reasons.push_back(std::move(why));
  };

  Trajectory traj;
  try
  {
    traj = sweep::catching_up(s, s.h);
  }
  catch (const Error& e)
  {
    escalate(Status::fail, std::string("integration failed: ") + e.what());
    rep.trajectory = nullptr;
    return rep;
  }
  rep.h = traj.h;
  rep.trajectory = sweep::metadata(s, traj);
  const sweep::SolverStats& st = traj.stats;
  rep.max_velocity = st.max_velocity;
  rep.velocity_bound = st.velocity_bound;
  rep.max_violation = st.max_violation;
  rep.max_predictor_distance = *std::max_element(traj.predictor_distance.begin(), traj.predictor_distance.end());

  const geometry::Manifold& m = *s.manifold;
  const sets::MovingSet& set = *s.set;
  const double rho = sweep::admissible_step(s).rho;
  const double radius = std::min({options.region_radius, 0.45 * rho, 0.45 * m.domain_radius()});

  // Checkpoint nodes spread over the trajectory.
  const int nc = std::max(1, options.checkpoints);
  std::vector<std::size_t> nodes;
  for (int j = 0; j < nc; ++j)
  {
    const std::size_t i = nc == 1 ? 0
                                   : static_cast<std::size_t>(std::llround(static_cast<double>(j) *
                                                                           traj.steps() / (nc - 1)));
    if (nodes.empty() || nodes.back() != i)
      nodes.push_back(i);
  }

  // Hypomonotonicity around each checkpoint.
  std::vector<std::future<std::optional<proxreg::HypomonotonicityReport>>> hjobs;
  for (std::size_t j = 0; j < nodes.size(); ++j)
    hjobs.push_back(std::async(std::launch::async, [&, j]() -> std::optional<proxreg::HypomonotonicityReport> {
      const std::size_t i = nodes[j];
      try
      {
        return proxreg::sample_hypomonotonicity(set, traj.times[i], Ball{traj.nodes[i], radius},
                                                options.hypomonotonicity_samples, std::nullopt,
                                                mix(s.seed ^ (0x4879ULL + j)));
      }
      catch (const StructuralError&)
      {
        return std::nullopt;  // no boundary near this checkpoint
      }
    }));

  // Uniqueness near active checkpoints, or the first active node.
  std::vector<std::size_t> active_nodes;
  for (std::size_t i : nodes)
    if (!traj.active[i].empty())
      active_nodes.push_back(i);
  if (active_nodes.size() > static_cast<std::size_t>(std::max(1, options.max_uniqueness_probes)))
    active_nodes.resize(static_cast<std::size_t>(std::max(1, options.max_uniqueness_probes)));
  if (active_nodes.empty())
    for (std::size_t i = 0; i < traj.active.size(); ++i)
      if (!traj.active[i].empty())
      {
        active_nodes.push_back(i);
        break;
      }
  proxreg::UniquenessOptions uopt;
  uopt.levels = options.uniqueness_levels;
  uopt.starts = options.uniqueness_starts;
  uopt.tolerance = s.tolerances.uniqueness;
  std::vector<std::future<proxreg::UniquenessReport>> ujobs;
  for (std::size_t j = 0; j < active_nodes.size(); ++j)
    ujobs.push_back(std::async(std::launch::async, [&, j] {
      const std::size_t i = active_nodes[j];
      return proxreg::probe_projection_uniqueness(set, traj.times[i], Ball{traj.nodes[i], radius},
                                                  options.uniqueness_points, mix(s.seed ^ (0x756eULL + j)), uopt);
    }));

  int without_boundary = 0;
  for (auto& job : hjobs)
  {
    auto h = job.get();
    if (!h)
    {
      ++without_boundary;
      continue;
    }
    rep.fitted_E = std::max(rep.fitted_E, h->fitted_E);
    rep.hypomonotonicity.push_back(std::move(*h));
  }
  if (without_boundary > 0)
    rep.reasons.push_back(std::to_string(without_boundary) + " checkpoint(s) with no boundary in reach");

  for (auto& job : ujobs)
  {
    try
    {
      rep.uniqueness.push_back(job.get());
    }
    catch (const StructuralError&)
    {
      continue;
    }
    const auto& u = rep.uniqueness.back();
    rep.probed_distance = std::max(rep.probed_distance, u.distances.empty() ? 0.0 : u.distances.back());
    if (!u.unbounded)
      rep.empirical_ell = std::min(rep.empirical_ell.value_or(u.empirical_ell), u.empirical_ell);
  }
  if (active_nodes.empty())
    rep.reasons.push_back("constraint never active; uniqueness not probed");

  // Inclusion residuals at step interiors.
  const int nr = std::max(1, options.residual_times);
  std::vector<std::future<sweep::ResidualSample>> rjobs;
  for (int k = 0; k < nr; ++k)
    rjobs.push_back(std::async(std::launch::async, [&, k] {
      const double t = traj.horizon() * (k + kGolden) / nr;
      return sweep::inclusion_residual(s, traj, t, rep.fitted_E, options.residual_samples,
                                       mix(s.seed ^ (0x7265ULL + static_cast<std::uint64_t>(k))),
                                       std::min(0.25, radius));
    }));
  for (auto& job : rjobs)
  {
    try
    {
      const auto res = job.get();
      if (res.inconclusive)
        ++rep.inconclusive_residuals;
      else
        rep.max_residual = std::max(rep.max_residual, res.residual);
    }
    catch (const Error&)
    {
      ++rep.inconclusive_residuals;
    }
  }

  if (!st.velocity_ok)
    escalate(Status::fail, "discrete velocity " + format_double(st.max_velocity) + " exceeds 2|f| + K_L = " +
                             format_double(st.velocity_bound));
  if (st.max_violation > s.tolerances.feasibility)
    escalate(Status::fail, "node violation " + format_double(st.max_violation) + " above the feasibility tolerance");
  if (rep.empirical_ell && rep.max_predictor_distance >= 0.5 * *rep.empirical_ell)
    escalate(Status::warn, "projection distance " + format_double(rep.max_predictor_distance) +
                             " reaches half the empirical ell = " + format_double(*rep.empirical_ell));
  if (!st.certified)
    escalate(Status::warn, "trajectory not certified (degenerate or far projections)");
  if (st.perturbation_bound_violations > 0)
    escalate(Status::warn, "perturbation exceeded its declared sup norm " +
                             std::to_string(st.perturbation_bound_violations) + " time(s)");
  if (st.admissible_h < traj.h * (1.0 - 1e-12))
    escalate(Status::warn, "step " + format_double(traj.h) + " above the admissible step " +
                             format_double(st.admissible_h));
  if (rep.inconclusive_residuals == nr)
    escalate(Status::warn, "no inclusion residual could be evaluated");
  return rep;
}

nlohmann::json to_json(const CertificationReport& r)
{
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["scenario_hash"] = r.scenario_hash;
  j["seed"] = r.seed;
  j["h"] = r.h;
  j["status"] = to_string(r.status);
  j["reasons"] = r.reasons;
  j["constants"] = {{"fitted_E", r.fitted_E},
                    {"empirical_ell", r.empirical_ell ? nlohmann::json(*r.empirical_ell) : nlohmann::json(nullptr)},
                    {"probed_distance", r.probed_distance},
                    {"max_predictor_distance", r.max_predictor_distance},
                    {"max_velocity", r.max_velocity},
                    {"velocity_bound", r.velocity_bound},
                    {"max_violation", r.max_violation},
                    {"max_residual", r.max_residual},
                    {"inconclusive_residuals", r.inconclusive_residuals}};
  j["hypomonotonicity"] = nlohmann::json::array();
  for (const auto& h : r.hypomonotonicity)
    j["hypomonotonicity"].push_back(proxreg::to_json(h));
  j["uniqueness"] = nlohmann::json::array();
  for (const auto& u : r.uniqueness)
    j["uniqueness"].push_back(proxreg::to_json(u));
  j["trajectory"] = r.trajectory;
  return j;
}

}  // namespace sweepkit::lab
