#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sweepkit/sets.hpp"

namespace sweepkit::sweep
{

using geometry::Manifold;
using geometry::Ball;
using geometry::ManifoldPtr;
using geometry::Point;
using geometry::Tangent;
using geometry::Vector;
using sets::MovingSet;
using sets::MovingSetPtr;

/// f(t, x): an ambient vector field projected onto T_xM, with declared
/// bounds ||f||_inf and L_f.
struct Perturbation
{
  std::function<Vector(double t, const Vector& x)> field;
  double sup_norm = 0.0;
  double lipschitz = 0.0;

  bool is_zero() const { return !field; }
  Tangent operator()(const Manifold& m, double t, const Point& x) const;
};

struct Tolerances
{
  double feasibility = 1e-9;
  double projector = 1e-10;
  double uniqueness = 1e-6;
  double velocity_margin = 1e-6;
  double activity = 1e-7;
};

struct Scenario
{
  std::string name;
  ManifoldPtr manifold;
  MovingSetPtr set;
  Perturbation f;
  double horizon = 1.0;
  Point x0;
  double h = 1e-2;
  Tolerances tolerances;
  std::uint64_t seed = 0;
  std::string hash;
  nlohmann::json descriptor;  // normalized scenario document when loaded from JSON

  double lipschitz() const { return set->lipschitz_constant(); }
};

struct StepBudget
{
  double rho = 0.0;
  double h_budget = 0.0;     // rho / (2 ||f||)
  double sub_horizon = 0.0;  // min(eta / 2, ell) / (2 ||f|| + K_L)
  double h_max = 0.0;
  bool ceiling = false;      // no constraint applied; h_max is the configured ceiling
};

/// Largest step (and sub-horizon length) allowed by h ||f|| <= rho / 2 and
/// (2 ||f|| + K_L) T <= min(eta / 2, ell). Missing eta or ell use the
/// declared prox radius hint of the set.
StepBudget admissible_step(const Scenario& s, std::optional<double> eta = std::nullopt,
                           std::optional<double> ell = std::nullopt);

struct SolverStats
{
  int steps = 0;
  long projection_iterations = 0;
  int max_projection_iterations = 0;
  int active_projections = 0;
  int degenerate_projections = 0;
  int beyond_ell = 0;
  int perturbation_bound_violations = 0;
  double max_violation = 0.0;
  double max_velocity = 0.0;
  double velocity_bound = 0.0;
  bool velocity_ok = true;
  bool certified = true;
  double admissible_h = 0.0;
  double sub_horizon = 0.0;
  int sub_horizons = 1;
  std::vector<std::string> warnings;
};

struct Trajectory
{
  ManifoldPtr manifold;
  std::vector<double> times;
  std::vector<Point> nodes;
  std::vector<double> velocities;        // d(x_i, x_{i+1}) / h, one per step
  std::vector<double> predictor_distance;  // d(exp(x_{i-1}, h f), x_i) per node, 0 at i = 0
  std::vector<std::vector<int>> active;
  double h = 0.0;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  SolverStats stats;

  double horizon() const { return times.back(); }
  int steps() const { return static_cast<int>(times.size()) - 1; }
};

struct CatchingUpOptions
{
  std::optional<double> eta;
  std::optional<double> ell;  // projections farther than this are flagged
};

/// Failure of a projection inside catching_up; carries the nodes computed so far.
class SweepFailure : public Error
{
public:
  SweepFailure(const std::string& what, int step, Trajectory partial)
    : Error(what), step_(step), partial_(std::move(partial))
  {
  }
  const char* kind() const noexcept override { return "sweep"; }
  int step() const { return step_; }
  const Trajectory& partial() const { return partial_; }

private:
  int step_;
  Trajectory partial_;
};

/// x_{i+1} = P_{C(t_{i+1})}(exp_{x_i}(h f(t_i, x_i))) on t_i = T i / N with
/// N = round(T / h).
Trajectory catching_up(const Scenario& s, double h, const CatchingUpOptions& options = {});

/// Same, started from another initial point.
Trajectory catching_up_from(const Scenario& s, const Point& x0, double h, const CatchingUpOptions& options = {});

/// Geodesic interpolant exp(x_i, ((t - t_i)/h) log(x_i, x_{i+1})).
Point interpolate(const Trajectory& traj, double t);

/// Velocity of the interpolant at t: log(x_i, x_{i+1}) / h carried along the
/// step geodesic to interpolate(t).
Tangent interpolant_velocity(const Trajectory& traj, double t);

struct ResidualSample
{
  double residual = 0.0;
  double w_norm = 0.0;
  int members = 0;
  bool inconclusive = false;
};

/// max(0, sup_c <w, log_x c> - E |w| d(x,c)^2) with x = interpolate(t),
/// w = f(t, x) - velocity, c over members of C(t) near x. The sample is
/// seeded by `seed` and t, so refinement studies compare like with like.
ResidualSample inclusion_residual(const Scenario& s, const Trajectory& traj, double t, double E_hat,
                                  int n_samples, std::uint64_t seed, double radius = 0.25);

struct SeparationCurve
{
  std::vector<double> times;
  std::vector<double> separation;
  double fitted_rate = 0.0;  // least-squares slope of log d^2
  bool merged = false;       // separation reached zero
  double F = 0.0;            // 2 ||f|| + max velocities of both runs
  double E_hat = 0.0;
  double L_f = 0.0;
  double bound = 0.0;        // 2 (E_hat F + L_f)
};

SeparationCurve gronwall_separation(const Scenario& s, const Point& x0a, const Point& x0b, double h, double E_hat);

/// One row per node: t, coordinates, backward velocity, predictor distance,
/// active constraint indices joined by ';'.
void write_csv(const Trajectory& traj, std::ostream& out);
nlohmann::json metadata(const Scenario& s, const Trajectory& traj);

/// Shortest round-trip decimal form.
std::string format_double(double x);

}  // namespace sweepkit::sweep
