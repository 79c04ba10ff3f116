#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sweepkit/proxreg.hpp"
#include "sweepkit/sweep.hpp"

namespace sweepkit::lab
{

using geometry::Ball;
using sweep::Point;
using sweep::Scenario;

enum class Reference
{
  analytic,
  finest
};

const char* to_string(Reference r);

/// Exact solution t -> x(t), when one is known.
using AnalyticSolution = std::function<Point(double t)>;

/// Closed-form solution for the one-dimensional half-line sweep with f = 0:
/// x(t) = max(x0, max_{s<=t} b(s)) for C(t) = [b(t), inf), mirrored for
/// a negative normal. nullopt for every other scenario.
std::optional<AnalyticSolution> analytic_solution(const Scenario& s);

struct RateStudy
{
  std::string scenario;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  Reference reference = Reference::finest;
  double reference_h = 0.0;  // finest only
  int sample_times = 256;
  std::vector<double> steps;   // decreasing
  std::vector<double> errors;  // sup distance over the sample times
  std::vector<bool> certified;
  bool fitted = false;          // at least 4 usable levels
  double fitted_order = 0.0;
  double constant = 0.0;        // error ~ constant * h^order
  int fit_from = 0;             // first level used in the fit
  bool knee_excluded = false;   // two coarsest levels dropped
  bool saturated = false;       // errors at the floor; order not meaningful
  bool monotone = true;         // e(h/2) <= 1.1 e(h) at every refinement
  std::vector<std::string> notes;
};

/// Aborts the study; carries the levels that completed.
class RateStudyFailure : public Error
{
public:
  RateStudyFailure(const std::string& what, RateStudy partial) : Error(what), partial_(std::move(partial)) {}
  const char* kind() const noexcept override { return "sweep"; }
  const RateStudy& partial() const { return partial_; }

private:
  RateStudy partial_;
};

/// Errors below this are treated as exact.
inline constexpr double kErrorFloor = 1e-13;

/// Runs catching_up at every step (concurrently) and measures the sup over
/// 256 uniform times of the distance to the reference. The finest reference
/// uses min(steps) / 8.
RateStudy run_rate_study(const Scenario& s, std::vector<double> steps, Reference reference);

/// Least-squares order fit over the errors of a study; fills fitted,
/// fitted_order, constant, fit_from, knee_excluded, saturated and monotone.
void fit_order(RateStudy& study);

/// Steps 2^-k for k = first .. first + levels - 1.
std::vector<double> dyadic_steps(int first, int levels);

nlohmann::json to_json(const RateStudy& r);
std::string format_table(const RateStudy& r);
/// Two columns, `h error`, for gnuplot.
void write_gnuplot(const RateStudy& r, std::ostream& out);

enum class Status
{
  pass,
  warn,
  fail
};

const char* to_string(Status s);

struct CertifyOptions
{
  int checkpoints = 3;  // nodes along the trajectory where the set is sampled
  int hypomonotonicity_samples = 60;
  int uniqueness_points = 3;
  int uniqueness_levels = 10;
  int uniqueness_starts = 6;
  int max_uniqueness_probes = 2;
  double region_radius = 1.2;  // clipped to 0.45 rho
  int residual_times = 40;
  int residual_samples = 24;
};

struct CertificationReport
{
  std::string scenario;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  double h = 0.0;
  Status status = Status::pass;
  std::vector<std::string> reasons;
  double fitted_E = 0.0;
  std::optional<double> empirical_ell;  // nullopt: no failure up to the probed distance
  double probed_distance = 0.0;
  double max_predictor_distance = 0.0;
  double max_velocity = 0.0;
  double velocity_bound = 0.0;
  double max_violation = 0.0;
  double max_residual = 0.0;
  int inconclusive_residuals = 0;
  std::vector<proxreg::HypomonotonicityReport> hypomonotonicity;
  std::vector<proxreg::UniquenessReport> uniqueness;
  nlohmann::json trajectory;  // sweep metadata, or null when the run failed
};

/// Runs the scenario at its step and checks the visited region: fitted
/// hypomonotonicity, projection uniqueness near active nodes, the velocity
/// bound, feasibility and inclusion residuals. Never throws on a failed
/// check; the report records it.
CertificationReport certify_scenario(const Scenario& s, const CertifyOptions& options = {});

nlohmann::json to_json(const CertificationReport& r);

}  // namespace sweepkit::lab
