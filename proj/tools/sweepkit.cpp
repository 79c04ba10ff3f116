#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "sweepkit/io.hpp"
#include "sweepkit/lab.hpp"
#include "sweepkit/proxreg.hpp"

namespace fs = std::filesystem;
using namespace sweepkit;
using geometry::Ball;
using nlohmann::json;

namespace
{

constexpr int kExitPass = 0;
constexpr int kExitWarn = 1;
constexpr int kExitFail = 2;

struct Flags
{
  std::string scenario;
  std::optional<double> h;
  std::string out;
  std::string gnuplot;
  int levels = 6;
  int first_level = 4;
  bool strict = false;
  bool json_errors = false;
};

int exit_for(lab::Status st, bool strict)
{
  switch (st)
  {
    case lab::Status::pass: return kExitPass;
    case lab::Status::warn: return strict ? kExitWarn : kExitPass;
    case lab::Status::fail: return kExitFail;
  }
  return kExitFail;
}

void write_text(const std::string& path, const std::string& text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error("cannot write '" + path + "'");
  f << text;
}

// JSON goes to --out when given, otherwise to stdout.
void emit(const Flags& fl, const json& doc)
{
  const std::string text = doc.dump(2) + "\n";
  if (fl.out.empty())
    std::cout << text;
  else
    write_text(fl.out, text);
}

sweep::Scenario load(const Flags& fl)
{
  sweep::Scenario s = io::load_scenario(fl.scenario);
  if (fl.h)
  {
    if (!(*fl.h > 0.0))
      throw ValidationError("h > 0", "'--h' must be positive");
    s.h = *fl.h;
  }
  return s;
}

int simulate(const Flags& fl)
{
  const sweep::Scenario s = load(fl);
  const sweep::Trajectory traj = sweep::catching_up(s, s.h);
  const fs::path csv = fl.out.empty() ? fs::path(s.name + ".csv") : fs::path(fl.out);
  {
    std::ofstream f(csv, std::ios::binary);
    if (!f)
      throw Error("cannot write '" + csv.string() + "'");
    sweep::write_csv(traj, f);
  }
  fs::path meta = csv;
  meta.replace_extension(".meta.json");
  const json md = sweep::metadata(s, traj);
  write_text(meta.string(), md.dump(2) + "\n");
  std::cout << "wrote " << csv.string() << " (" << traj.nodes.size() << " rows) and " << meta.string() << "\n";
  for (const auto& w : traj.stats.warnings)
    std::cout << "warning: " << w << "\n";
  if (!traj.stats.velocity_ok)
    return kExitFail;
  return traj.stats.warnings.empty() ? kExitPass : exit_for(lab::Status::warn, fl.strict);
}

int rates(const Flags& fl)
{
  const sweep::Scenario s = load(fl);
  if (fl.levels < 1)
    throw ValidationError("levels >= 1", "'--levels' must be at least 1");
  const auto reference = lab::analytic_solution(s) ? lab::Reference::analytic : lab::Reference::finest;
  const lab::RateStudy r = lab::run_rate_study(s, lab::dyadic_steps(fl.first_level, fl.levels), reference);
  emit(fl, lab::to_json(r));
  if (!fl.out.empty())
    std::cout << lab::format_table(r);
  if (!fl.gnuplot.empty())
  {
    std::ofstream f(fl.gnuplot, std::ios::binary);
    if (!f)
      throw Error("cannot write '" + fl.gnuplot + "'");
    lab::write_gnuplot(r, f);
  }
  const bool clean = (r.fitted || r.saturated) && r.monotone;
  return clean ? kExitPass : exit_for(lab::Status::warn, fl.strict);
}

int diagnose(const Flags& fl)
{
  const sweep::Scenario s = load(fl);
  const sweep::Trajectory traj = sweep::catching_up(s, s.h);
  const lab::CertifyOptions opt;
  const double rho = sweep::admissible_step(s).rho;
  const double radius = std::min({opt.region_radius, 0.45 * rho, 0.45 * s.manifold->domain_radius()});

  json doc;
  doc["scenario"] = s.name;
  doc["scenario_hash"] = s.hash;
  doc["seed"] = s.seed;
  doc["log_monotonicity"] =
    proxreg::to_json(proxreg::check_log_monotonicity(*s.manifold, Ball{s.x0, radius}, 200, s.seed));
  doc["hypomonotonicity"] = json::array();
  doc["uniqueness"] = json::array();
  doc["notes"] = json::array();

  proxreg::UniquenessOptions uopt;
  uopt.levels = opt.uniqueness_levels;
  uopt.starts = opt.uniqueness_starts;
  uopt.tolerance = s.tolerances.uniqueness;
  const std::size_t last = traj.nodes.size() - 1;
  for (std::size_t i : {std::size_t{0}, last / 2, last})
  {
    const Ball region{traj.nodes[i], radius};
    const double t = traj.times[i];
    try
    {
      doc["hypomonotonicity"].push_back(proxreg::to_json(
        proxreg::sample_hypomonotonicity(*s.set, t, region, opt.hypomonotonicity_samples, std::nullopt, s.seed + i)));
      doc["uniqueness"].push_back(proxreg::to_json(
        proxreg::probe_projection_uniqueness(*s.set, t, region, opt.uniqueness_points, s.seed + i, uopt)));
    }
    catch (const StructuralError& e)
    {
      doc["notes"].push_back("t = " + sweep::format_double(t) + ": " + e.what());
    }
  }
  emit(fl, doc);
  return kExitPass;
}

int certify(const Flags& fl)
{
  const lab::CertificationReport rep = lab::certify_scenario(load(fl));
  emit(fl, lab::to_json(rep));
  std::cerr << "certification " << lab::to_string(rep.status) << "\n";
  for (const auto& why : rep.reasons)
    std::cerr << "  " << why << "\n";
  return exit_for(rep.status, fl.strict);
}

int validate(const Flags& fl)
{
  const sweep::Scenario s = load(fl);
  if (!fl.out.empty())
    io::save_scenario(s, fl.out);
  std::cout << "valid scenario '" << s.name << "', hash " << s.hash << "\n";
  return kExitPass;
}

void report(const Flags& fl, const std::exception& e)
{
  if (fl.json_errors)
    std::cerr << io::error_json(e).dump() << "\n";
  else
    std::cerr << "error: " << e.what() << "\n";
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Catching-up integrator for sweeping processes on manifolds"};
  app.set_help_flag("--help", "print this help");
  app.require_subcommand(1, 1);
  Flags fl;

  const auto common = [&fl](CLI::App* sub) {
    sub->add_option("--scenario", fl.scenario, "scenario JSON file")->required();
    sub->add_flag("--strict", fl.strict, "exit 1 on warnings");
    sub->add_flag("--json-errors", fl.json_errors, "print errors as JSON on stderr");
  };

  CLI::App* sim = app.add_subcommand("simulate", "integrate and write the trajectory CSV and metadata");
  common(sim);
  sim->add_option("--h", fl.h, "step size (overrides the scenario)");
  sim->add_option("--out", fl.out, "CSV path; metadata goes next to it as .meta.json");

  CLI::App* rat = app.add_subcommand("rates", "convergence-rate study over dyadic steps");
  common(rat);
  rat->add_option("--levels", fl.levels, "number of step levels")->capture_default_str();
  rat->add_option("--first-level", fl.first_level, "coarsest step is 2^-k")->capture_default_str();
  rat->add_option("--out", fl.out, "report JSON path (default stdout)");
  rat->add_option("--gnuplot", fl.gnuplot, "write an `h error` data file");

  CLI::App* dia = app.add_subcommand("diagnose", "prox-regularity diagnostics along the trajectory");
  common(dia);
  dia->add_option("--h", fl.h, "step size (overrides the scenario)");
  dia->add_option("--out", fl.out, "report JSON path (default stdout)");

  CLI::App* cer = app.add_subcommand("certify", "run and certify a scenario");
  common(cer);
  cer->add_option("--h", fl.h, "step size (overrides the scenario)");
  cer->add_option("--out", fl.out, "report JSON path (default stdout)");

  CLI::App* val = app.add_subcommand("validate", "check a scenario file");
  common(val);
  val->add_option("--out", fl.out, "write the normalized scenario here");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitFail;
  }

  try
  {
    if (sim->parsed())
      return simulate(fl);
    if (rat->parsed())
      return rates(fl);
    if (dia->parsed())
      return diagnose(fl);
    if (cer->parsed())
      return certify(fl);
    return validate(fl);
  }
  catch (const std::exception& e)
  {
    report(fl, e);
    return kExitFail;
  }
}
