#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <random>
#include <vector>

#include "sweepkit/sets.hpp"

namespace sweepkit::proxreg
{

using geometry::Ball;
using geometry::Manifold;
using geometry::Point;
using geometry::Tangent;
using sets::MovingSet;

/// A point on the boundary of C(t) together with a unit proximal normal.
struct BoundarySample
{
  Point x;
  Tangent normal;
};

/// Draws a boundary point of C(t) near `region`: random members are pushed
/// outward until they leave the set, the crossing is bisected, and the first
/// outside point is projected back. Throws StructuralError after repeated
/// failures.
BoundarySample sample_boundary(const MovingSet& set, double t, const Ball& region, std::mt19937_64& rng);

/// A member of C(t) in the ball, by rejection. Returns nullopt after
/// `attempts` misses.
std::optional<Point> sample_member(const MovingSet& set, double t, const Ball& ball, std::mt19937_64& rng,
                                   int attempts = 200);

struct HypomonotonicityReport
{
  Ball region;
  double t = 0.0;
  int samples = 0;
  double max_ratio = 0.0;
  double fitted_E = 0.0;
  std::optional<double> declared_E;
  int violations = 0;
  Point worst_x;
  Point worst_y;
  Tangent worst_v;
  std::uint64_t seed = 0;
};

/// max over sampled pairs of <v, log_x y> / (|v| d(x,y)^2) with x on the
/// boundary, v a unit normal at x, and y a member within the working radius.
HypomonotonicityReport sample_hypomonotonicity(const MovingSet& set, double t, const Ball& region, int n_samples,
                                               std::optional<double> declared_E, std::uint64_t seed);

enum class ConeVerdict
{
  member,
  not_member,
  inconclusive
};

struct ConeMembershipReport
{
  ConeVerdict verdict = ConeVerdict::inconclusive;
  double fitted_lambda = 0.0;  // max ratio over the sweep; infinite for non-members
  std::vector<double> radii;
  std::vector<double> max_ratios;
  std::vector<int> members_found;
  std::uint64_t seed = 0;
};

/// Checks <v, log_x y> <= L d(x,y)^2 over members y on shrinking annuli
/// r_k = r0 2^-k, k = 0..10. The same direction samples are rescaled at every
/// radius, so growth of the per-radius maximum by 4x over two halvings is
/// read as divergence.
ConeMembershipReport test_cone_membership(const MovingSet& set, double t, const Point& x, const Tangent& v,
                                          int n_samples, std::uint64_t seed, double r0 = 0.5);

struct UniquenessOptions
{
  int levels = 20;
  int starts = 16;
  double tolerance = 1e-6;
};

struct UniquenessReport
{
  Ball region;
  double t = 0.0;
  int n_points = 0;
  UniquenessOptions options;
  std::vector<double> distances;
  std::vector<int> failures;  // per distance level
  double empirical_ell = 0.0;
  bool unbounded = false;  // no failure up to the largest tested distance
  std::uint64_t seed = 0;
};

/// Queries y = exp_x(s n) for boundary points x with unit normals n and
/// graded s up to the region radius. A query passes when every multi-start
/// projection that attains the smallest distance lands on x within the
/// tolerance; starts stuck at farther local minima or failing to converge do
/// not count against it, but at least one start must converge.
UniquenessReport probe_projection_uniqueness(const MovingSet& set, double t, const Ball& region, int n_points,
                                             std::uint64_t seed, UniquenessOptions options = {});

struct LogMonotonicityReport
{
  Ball region;
  int samples = 0;
  double fitted_A = 0.0;   // minimum ratio
  double max_ratio = 0.0;
  bool positive = false;
  std::uint64_t seed = 0;
};

/// <log_{z2} x - L_{z1->z2} log_{z1} x, log_{z2} z1> / d(z1,z2)^2 over
/// sampled triples in the region.
LogMonotonicityReport check_log_monotonicity(const Manifold& m, const Ball& region, int n_samples,
                                             std::uint64_t seed);

nlohmann::json point_json(const Point& p);
nlohmann::json to_json(const HypomonotonicityReport& r);
nlohmann::json to_json(const ConeMembershipReport& r);
nlohmann::json to_json(const UniquenessReport& r);
nlohmann::json to_json(const LogMonotonicityReport& r);
const char* to_string(ConeVerdict v);

}  // namespace sweepkit::proxreg
