#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "sweep_support.hpp"
#include "sweepkit/proxreg.hpp"

using namespace testing_support;
using namespace sweepkit;
using sweep::Trajectory;

namespace
{

double sup_distance(const Trajectory& a, const Trajectory& b, int samples = 256)
{
  double worst = 0.0;
  for (int k = 0; k < samples; ++k)
  {
    const double t = a.horizon() * k / (samples - 1);
    worst = std::max(worst, a.manifold->distance(sweep::interpolate(a, t), sweep::interpolate(b, t)));
  }
  return worst;
}

}  // namespace

TEST(AdmissibleStep, ZeroDriftStaticSetReturnsCeiling)
{
  auto m = std::make_shared<Euclidean>(2);
  Scenario s;
  s.manifold = m;
  s.set = std::make_shared<sets::GeodesicBall>(m, m->point(vec({0.0, 0.0})), 1.0, vec({0.0, 0.0}), false);
  s.x0 = m->point(vec({0.1, 0.0}));
  s.horizon = 2.0;
  const auto b = sweep::admissible_step(s);
  EXPECT_TRUE(b.ceiling);
  EXPECT_EQ(b.h_max, 2.0);
}

TEST(AdmissibleStep, StepBoundFromRho)
{
  // ||f|| = 1 on S^2 with rho = pi/2 gives h <= pi/4.
  auto s = rotating_cap_scenario();
  s.f.field = [](double, const Vector& x) { return vec({x[1], -x[0], 0.0}); };
  s.f.sup_norm = 1.0;
  const auto b = sweep::admissible_step(s, 10.0, 10.0);
  EXPECT_NEAR(b.rho, std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(b.h_budget, std::numbers::pi / 4, 1e-15);
  EXPECT_NEAR(b.h_max, std::numbers::pi / 4, 1e-15);
}

TEST(AdmissibleStep, SubHorizonFromEta)
{
  auto m = std::make_shared<Euclidean>(1);
  Scenario s;
  s.manifold = m;
  s.set = std::make_shared<sets::HalfSpace>(m, vec({1.0}), 0.0, 2.0);
  s.f.field = [](double, const Vector&) { return vec({1.0}); };
  s.f.sup_norm = 1.0;
  s.x0 = m->point(vec({0.0}));
  s.horizon = 1.0;
  // 2 T ||f|| + K_L T < eta / 2 with K_L = 2, ||f|| = 1, eta = 0.1
  const auto b = sweep::admissible_step(s, 0.1, 1.0);
  EXPECT_NEAR(b.sub_horizon, 0.0125, 1e-15);
  EXPECT_NEAR(b.h_max, 0.0125, 1e-15);

  sweep::CatchingUpOptions opt;
  opt.eta = 0.1;
  opt.ell = 1.0;
  const auto traj = sweep::catching_up(s, 0.1, opt);
  EXPECT_EQ(traj.stats.sub_horizons, 80);
  ASSERT_FALSE(traj.stats.warnings.empty());
  EXPECT_NE(traj.stats.warnings.front().find("admissible"), std::string::npos);
}

TEST(CatchingUp, HalfLineNodesEqualTimes)
{
  const auto s = halfline_scenario();
  const auto traj = sweep::catching_up(s, 1e-3);
  ASSERT_EQ(traj.nodes.size(), 1001u);
  for (std::size_t i = 0; i < traj.nodes.size(); ++i)
    EXPECT_NEAR(traj.nodes[i].coords[0], traj.times[i], 1e-15) << i;
  EXPECT_TRUE(traj.stats.certified);
  EXPECT_TRUE(traj.stats.velocity_ok);
  EXPECT_NEAR(traj.stats.max_velocity, 1.0, 1e-9);
}

TEST(CatchingUp, HalfLineWaitsUntilReached)
{
  const auto s = halfline_scenario(0.3);
  const auto traj = sweep::catching_up(s, 0.01);
  for (std::size_t i = 0; i < traj.nodes.size(); ++i)
    EXPECT_NEAR(traj.nodes[i].coords[0], std::max(0.3, traj.times[i]), 1e-14) << i;
}

TEST(CatchingUp, InactiveConstraintIsGeodesicFlow)
{
  auto m = std::make_shared<Euclidean>(2);
  Scenario s;
  s.manifold = m;
  s.set = std::make_shared<sets::GeodesicBall>(m, m->point(vec({0.0, 0.0})), 10.0, vec({0.0, 0.0}), false);
  s.f.field = [](double, const Vector&) { return vec({1.0, 0.5}); };
  s.f.sup_norm = std::hypot(1.0, 0.5);
  s.x0 = m->point(vec({-1.0, 0.0}));
  s.horizon = 1.0;
  const auto traj = sweep::catching_up(s, 0.05);
  for (std::size_t i = 0; i < traj.nodes.size(); ++i)
  {
    const double t = traj.times[i];
    EXPECT_NEAR((traj.nodes[i].coords - vec({-1.0 + t, 0.5 * t})).norm(), 0.0, 1e-12);
    EXPECT_TRUE(traj.active[i].empty());
  }
  EXPECT_EQ(traj.stats.active_projections, 0);
}

TEST(CatchingUp, InactiveConstraintOnSphereFollowsGreatCircle)
{
  // f = rotation about the x3 axis is a unit Killing field on the equator; the
  // scheme's geodesic substeps stay on the equator and advance by h each.
  auto m = std::make_shared<Sphere>(2);
  Scenario s;
  s.manifold = m;
  s.set = std::make_shared<sets::SphereCap>(m, vec({0.0, 0.0, 1.0}), -0.5, 0.0);
  s.f.field = [](double, const Vector& x) { return vec({-x[1], x[0], 0.0}); };
  s.f.sup_norm = 1.0;
  s.x0 = m->point(vec({1.0, 0.0, 0.0}));
  s.horizon = 2.0;
  const auto traj = sweep::catching_up(s, 0.1);
  for (std::size_t i = 0; i < traj.nodes.size(); ++i)
  {
    const double t = traj.times[i];
    EXPECT_NEAR((traj.nodes[i].coords - vec({std::cos(t), std::sin(t), 0.0})).norm(), 0.0, 1e-12);
  }
}

TEST(CatchingUp, RotatingCapTracksBoundaryAndRefines)
{
  const auto s = rotating_cap_scenario();
  const auto coarse = sweep::catching_up(s, 0.05);
  const auto fine = sweep::catching_up(s, 0.025);
  const auto reference = sweep::catching_up(s, 0.05 / 64);
  for (std::size_t i = 1; i < coarse.nodes.size(); ++i)
  {
    const auto& set = dynamic_cast<const sets::SphereCap&>(*s.set);
    EXPECT_NEAR(coarse.nodes[i].coords.dot(set.axis(coarse.times[i])), 0.0, 1e-12) << i;
  }
  const double e1 = sup_distance(coarse, reference);
  const double e2 = sup_distance(fine, reference);
  // first order with the constant frozen at calibration (error / h = 0.064)
  EXPECT_LT(e1, 0.07 * 0.05);
  EXPECT_LT(e2, 0.07 * 0.025);
  EXPECT_GT(e1 / e2, 1.8);
}

TEST(CatchingUp, FeasibilityAndVelocityBoundOnEveryNode)
{
  for (const auto& s : {halfline_scenario(), rotating_cap_scenario(), static_disk_scenario()})
    for (double h : {0.2, 0.05, 0.01})
    {
      const auto traj = sweep::catching_up(s, h);
      for (std::size_t i = 0; i < traj.nodes.size(); ++i)
        EXPECT_LE(s.set->violation(traj.times[i], traj.nodes[i]), s.tolerances.feasibility) << s.name;
      EXPECT_LE(traj.stats.max_velocity, 2.0 * s.f.sup_norm + s.lipschitz() + 1e-6) << s.name << " h=" << h;
      EXPECT_TRUE(traj.stats.velocity_ok);
    }
}

TEST(CatchingUp, InfeasibleStartIsStructural)
{
  const auto s = halfline_scenario();
  EXPECT_THROW(sweep::catching_up_from(s, s.manifold->point(vec({-0.5})), 0.1), StructuralError);
  EXPECT_THROW(sweep::catching_up(s, 0.0), DomainError);
}

TEST(CatchingUp, ProjectionFailureCarriesPartialTrajectory)
{
  // x1 >= t and x1 <= 0.5: empty after t = 0.5.
  auto m = std::make_shared<Euclidean>(1);
  expr::Symbols sym{1, {}};
  std::vector<expr::Expression> g{expr::Expression::compile("x1 - t", sym),
                                  expr::Expression::compile("0.5 - x1", sym)};
  Scenario s;
  s.manifold = m;
  s.set = std::make_shared<sets::InequalitySet>(m, std::move(g));
  s.x0 = m->point(vec({0.0}));
  s.horizon = 1.0;
  try
  {
    sweep::catching_up(s, 0.1);
    FAIL() << "expected SweepFailure";
  }
  catch (const sweep::SweepFailure& e)
  {
    EXPECT_EQ(e.step(), 5);
    EXPECT_EQ(e.partial().nodes.size(), 6u);
    EXPECT_NEAR(e.partial().nodes.back().coords[0], 0.5, 1e-9);
  }
}

TEST(CatchingUp, PerturbationBoundViolationIsCounted)
{
  auto s = halfline_scenario();
  s.f.field = [](double, const Vector&) { return vec({2.0}); };
  s.f.sup_norm = 1.0;
  const auto traj = sweep::catching_up(s, 0.1);
  EXPECT_EQ(traj.stats.perturbation_bound_violations, 10);
  EXPECT_NEAR(traj.nodes.back().coords[0], 2.0, 1e-12);
}

TEST(CatchingUp, FarProjectionMarksNonCertified)
{
  const auto s = halfline_scenario();
  sweep::CatchingUpOptions opt;
  opt.ell = 0.05;
  EXPECT_TRUE(sweep::catching_up(s, 0.01, opt).stats.certified);
  EXPECT_FALSE(sweep::catching_up(s, 0.1, opt).stats.certified);
}

TEST(Interpolate, NodesAreExact)
{
  const auto s = rotating_cap_scenario();
  const auto traj = sweep::catching_up(s, 0.1);
  for (std::size_t i = 0; i < traj.nodes.size(); ++i)
    EXPECT_EQ(sweep::interpolate(traj, traj.times[i]).coords, traj.nodes[i].coords);
  EXPECT_THROW(sweep::interpolate(traj, -0.1), DomainError);
  EXPECT_THROW(sweep::interpolate(traj, 3.1), DomainError);
}

TEST(Interpolate, EuclideanIsLinear)
{
  const auto s = static_disk_scenario();
  const auto traj = sweep::catching_up(s, 0.1);
  for (std::size_t i = 0; i + 1 < traj.nodes.size(); i += 7)
    for (double u : {0.25, 0.5, 0.9})
    {
      const double t = traj.times[i] + u * (traj.times[i + 1] - traj.times[i]);
      const Vector lin = (1 - u) * traj.nodes[i].coords + u * traj.nodes[i + 1].coords;
      EXPECT_NEAR((sweep::interpolate(traj, t).coords - lin).norm(), 0.0, 1e-14);
    }
}

TEST(Interpolate, SphereMidpointIsSlerp)
{
  const auto s = rotating_cap_scenario();
  const auto traj = sweep::catching_up(s, 0.3);
  for (std::size_t i = 0; i + 1 < traj.nodes.size(); ++i)
  {
    const Vector a = traj.nodes[i].coords, b = traj.nodes[i + 1].coords;
    const Vector mid = (a + b).normalized();
    const double t = 0.5 * (traj.times[i] + traj.times[i + 1]);
    EXPECT_NEAR((sweep::interpolate(traj, t).coords - mid).norm(), 0.0, 1e-13);
    // interpolant speed equals the discrete velocity
    EXPECT_NEAR(s.manifold->norm(sweep::interpolant_velocity(traj, t)), traj.velocities[i], 1e-12);
  }
}

TEST(InclusionResidual, InteriorMotionIsZero)
{
  auto m = std::make_shared<Euclidean>(2);
  Scenario s;
  s.manifold = m;
  s.set = std::make_shared<sets::GeodesicBall>(m, m->point(vec({0.0, 0.0})), 10.0, vec({0.0, 0.0}), false);
  s.f.field = [](double, const Vector&) { return vec({1.0, 0.5}); };
  s.f.sup_norm = std::hypot(1.0, 0.5);
  s.x0 = m->point(vec({-1.0, 0.0}));
  const auto traj = sweep::catching_up(s, 0.05);
  for (double t : {0.013, 0.51, 0.977})
  {
    const auto r = sweep::inclusion_residual(s, traj, t, 0.0, 64, 3);
    EXPECT_FALSE(r.inconclusive);
    EXPECT_LE(r.residual, 1e-12);
    EXPECT_LE(r.w_norm, 1e-12);
  }
}

TEST(InclusionResidual, HalfLineSlidingIsZero)
{
  const auto s = halfline_scenario();
  const auto traj = sweep::catching_up(s, 0.01);
  for (double t : {0.005, 0.333, 0.71})
  {
    const auto r = sweep::inclusion_residual(s, traj, t, 0.0, 64, 5);
    EXPECT_FALSE(r.inconclusive);
    EXPECT_EQ(r.residual, 0.0);
    EXPECT_NEAR(r.w_norm, 1.0, 1e-12);
  }
}

TEST(InclusionResidual, RotatingCapVanishesUnderRefinement)
{
  const auto s = rotating_cap_scenario();
  const auto hypo = proxreg::sample_hypomonotonicity(*s.set, 1.5, Ball{s.x0, 1.0}, 400, std::nullopt, 7);
  const double E = std::max(0.0, hypo.fitted_E);
  std::vector<double> maxima;
  for (double h : {0.1, 0.05, 0.025, 0.0125})
  {
    const auto traj = sweep::catching_up(s, h);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k)
    {
      const auto r = sweep::inclusion_residual(s, traj, 3.0 * (k + 0.381966) / 100, E, 64, 11);
      ASSERT_FALSE(r.inconclusive);
      worst = std::max(worst, r.residual);
    }
    maxima.push_back(worst);
  }
  for (std::size_t k = 0; k + 1 < maxima.size(); ++k)
    EXPECT_GE(maxima[k] / maxima[k + 1], 1.5) << k;
}

TEST(InclusionResidual, DeterministicInSeedAndTime)
{
  const auto s = rotating_cap_scenario();
  const auto traj = sweep::catching_up(s, 0.05);
  const auto a = sweep::inclusion_residual(s, traj, 1.234, 0.0, 32, 9);
  const auto b = sweep::inclusion_residual(s, traj, 1.234, 0.0, 32, 9);
  EXPECT_EQ(a.residual, b.residual);
  EXPECT_EQ(a.members, b.members);
}

TEST(Gronwall, IdenticalStartsStayTogether)
{
  const auto s = static_disk_scenario();
  const auto c = sweep::gronwall_separation(s, s.x0, s.x0, 0.01, 0.0);
  for (double d : c.separation)
    EXPECT_EQ(d, 0.0);
  EXPECT_TRUE(c.merged);
}

TEST(Gronwall, HalfLineSolutionsMerge)
{
  const auto s = halfline_scenario();
  const auto c = sweep::gronwall_separation(s, s.manifold->point(vec({0.0})), s.manifold->point(vec({0.1})), 1e-3,
                                            0.0);
  EXPECT_TRUE(c.merged);
  for (std::size_t i = 0; i < c.times.size(); ++i)
  {
    if (c.times[i] >= 0.1 - 1e-12)
      EXPECT_LE(c.separation[i], 1e-12) << c.times[i];
    else
      EXPECT_NEAR(c.separation[i], 0.1 - c.times[i], 1e-12);
  }
  EXPECT_LT(c.fitted_rate, 0.0);
}

TEST(Gronwall, StaticConvexRateWithinBound)
{
  const auto s = static_disk_scenario();
  const auto hypo = proxreg::sample_hypomonotonicity(*s.set, 0.0, Ball{s.x0, 1.5}, 400, std::nullopt, 3);
  const double E = std::max(0.0, hypo.fitted_E);
  EXPECT_LE(E, 1e-10);
  const auto c = sweep::gronwall_separation(s, s.x0, s.manifold->point(vec({0.5, 1e-3})), 0.01, E);
  EXPECT_NEAR(c.separation.front(), 1e-3, 1e-15);
  EXPECT_NEAR(c.F, 2 * std::sqrt(1.09) * 2, 0.1);
  EXPECT_LE(c.fitted_rate, 1.2 * c.bound);
  EXPECT_NEAR(c.bound, 2 * std::sqrt(1.09), 1e-9);
}

TEST(Output, CsvHeaderRowsAndDeterminism)
{
  const auto s = halfline_scenario();
  const auto a = sweep::catching_up(s, 1e-3);
  const auto b = sweep::catching_up(s, 1e-3);
  std::ostringstream oa, ob;
  sweep::write_csv(a, oa);
  sweep::write_csv(b, ob);
  EXPECT_EQ(oa.str(), ob.str());
  std::istringstream in(oa.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,v_discrete,dist_to_set,active_set");
  int rows = 0;
  std::string last;
  while (std::getline(in, line))
  {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 1001);
  EXPECT_EQ(last, "1,1,1.0000000000000009,0.0010000000000000009,0");
}

TEST(Output, MetadataCarriesStats)
{
  const auto s = rotating_cap_scenario();
  const auto traj = sweep::catching_up(s, 0.1);
  const auto j = sweep::metadata(s, traj);
  EXPECT_EQ(j["steps"], 30);
  EXPECT_EQ(j["manifold"]["kind"], "sphere");
  EXPECT_TRUE(j["certified"].get<bool>());
  EXPECT_EQ(j.dump(), sweep::metadata(s, sweep::catching_up(s, 0.1)).dump());
}

TEST(Output, FormatDoubleRoundTrips)
{
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125})
    EXPECT_EQ(std::stod(sweep::format_double(x)), x);
  EXPECT_EQ(sweep::format_double(0.5), "0.5");
}
