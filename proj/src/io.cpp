#include "sweepkit/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sweepkit/implicit_manifold.hpp"

namespace sweepkit::io
{

namespace
{

using nlohmann::json;
using geometry::Vector;

const char* const kInX0InC0 = "x\xE2\x82\x80 \xE2\x88\x88 C(0)";  // x₀ ∈ C(0)
const char* const kInX0InM = "x\xE2\x82\x80 \xE2\x88\x88 M";

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void require_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
  if (!j.is_object())
    throw ValidationError("type", (path.empty() ? std::string("document") : path) + " must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ValidationError("known fields", "unknown field '" + join(path, key) + "'");
}

const json& required(const json& j, const char* key, const std::string& path)
{
  const auto it = j.find(key);
  if (it == j.end())
    throw ValidationError("required field", "missing '" + join(path, key) + "'");
  return *it;
}

double number(const json& j, const std::string& path)
{
  if (!j.is_number())
    throw ValidationError("type", "'" + path + "' must be a number");
  return j.get<double>();
}

double number_or(const json& j, const char* key, const std::string& path, double fallback)
{
  const auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, join(path, key));
}

json numbers(const json& j, const std::string& path, std::optional<std::size_t> size = std::nullopt)
{
  if (!j.is_array())
    throw ValidationError("type", "'" + path + "' must be an array of numbers");
  json out = json::array();
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  if (size && out.size() != *size)
    throw ValidationError("dimensions agree", "'" + path + "' has " + std::to_string(out.size()) +
                                                " entries, expected " + std::to_string(*size));
  return out;
}

json strings(const json& j, const std::string& path)
{
  if (!j.is_array())
    throw ValidationError("type", "'" + path + "' must be an array of expression strings");
  for (std::size_t i = 0; i < j.size(); ++i)
    if (!j[i].is_string())
      throw ValidationError("type", "'" + path + "[" + std::to_string(i) + "]' must be a string");
  return j;
}

bool boolean_or(const json& j, const char* key, const std::string& path, bool fallback)
{
  const auto it = j.find(key);
  if (it == j.end())
    return fallback;
  if (!it->is_boolean())
    throw ValidationError("type", "'" + join(path, key) + "' must be true or false");
  return it->get<bool>();
}

std::string text(const json& j, const std::string& path)
{
  if (!j.is_string())
    throw ValidationError("type", "'" + path + "' must be a string");
  return j.get<std::string>();
}

void nonnegative(double x, const std::string& path)
{
  if (!(x >= 0.0) || !std::isfinite(x))
    throw ValidationError("declared constants nonnegative", "'" + path + "' = " + sweep::format_double(x));
}

Vector to_vector(const json& j)
{
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

std::vector<expr::Expression> compile_all(const json& list, int dim, const std::string& path)
{
  std::vector<expr::Expression> out;
  const expr::Symbols symbols{dim, {}};
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    try
    {
      out.push_back(expr::Expression::compile(list[i].get<std::string>(), symbols));
    }
    catch (const ParseError& e)
    {
      std::string what = e.what();
      const auto cut = what.rfind(" at line ");
      if (cut != std::string::npos)
        what.resize(cut);
      throw ParseError(path + "[" + std::to_string(i) + "]: " + what, e.line(), e.column());
    }
  }
  return out;
}

int ambient_dim(const json& manifold)
{
  const std::string kind = manifold["kind"];
  const int dim = manifold["dim"];
  return kind == "sphere" || kind == "hyperbolic" ? dim + 1 : dim;
}

json normalize_manifold(const json& j)
{
  require_object(j, "manifold", {"kind", "dim", "equalities"});
  const std::string kind = text(required(j, "kind", "manifold"), "manifold.kind");
  const json& dim = required(j, "dim", "manifold");
  if (!dim.is_number_integer() || dim.get<long long>() < 1 || dim.get<long long>() > 64)
    throw ValidationError("type", "'manifold.dim' must be an integer in [1, 64]");
  json out{{"kind", kind}, {"dim", dim.get<int>()}};
  if (kind == "implicit")
  {
    out["equalities"] = strings(required(j, "equalities", "manifold"), "manifold.equalities");
    if (out["equalities"].empty())
      throw ValidationError("required field", "'manifold.equalities' must list at least one equation");
  }
  else if (kind == "euclidean" || kind == "sphere" || kind == "hyperbolic")
  {
    if (j.contains("equalities"))
      throw ValidationError("known fields", "'manifold.equalities' only applies to the implicit kind");
  }
  else
    throw ValidationError("manifold kind", "unknown manifold kind '" + kind + "'");
  return out;
}

json normalize_set(const json& j, std::size_t n)
{
  if (!j.is_object())
    throw ValidationError("type", "set must be an object");
  const std::string kind = text(required(j, "kind", "set"), "set.kind");
  json out{{"kind", kind}};
  if (kind == "half_space")
  {
    require_object(j, "set", {"kind", "normal", "offset", "speed"});
    out["normal"] = numbers(required(j, "normal", "set"), "set.normal", n);
    out["offset"] = number_or(j, "offset", "set", 0.0);
    out["speed"] = number_or(j, "speed", "set", 0.0);
  }
  else if (kind == "ball")
  {
    require_object(j, "set", {"kind", "center", "radius", "velocity", "complement"});
    out["center"] = numbers(required(j, "center", "set"), "set.center", n);
    out["radius"] = number(required(j, "radius", "set"), "set.radius");
    if (!(out["radius"].get<double>() > 0.0))
      throw ValidationError("radius > 0", "'set.radius' must be positive");
    out["velocity"] = j.contains("velocity") ? numbers(j["velocity"], "set.velocity", n)
                                             : json(std::vector<double>(n, 0.0));
    out["complement"] = boolean_or(j, "complement", "set", false);
  }
  else if (kind == "sphere_cap")
  {
    require_object(j, "set", {"kind", "axis", "height", "omega", "plane"});
    out["axis"] = numbers(required(j, "axis", "set"), "set.axis", n);
    out["height"] = number_or(j, "height", "set", 0.0);
    out["omega"] = number_or(j, "omega", "set", 0.0);
    out["plane"] = j.contains("plane") && !j["plane"].is_null() ? numbers(j["plane"], "set.plane", n) : json(nullptr);
  }
  else if (kind == "inequalities")
  {
    require_object(j, "set", {"kind", "constraints"});
    out["constraints"] = strings(required(j, "constraints", "set"), "set.constraints");
    if (out["constraints"].empty())
      throw ValidationError("required field", "'set.constraints' must list at least one inequality");
  }
  else
    throw ValidationError("set kind", "unknown set kind '" + kind + "'");
  return out;
}

json normalize_perturbation(const json& j, std::size_t n)
{
  if (j.is_null())
    return json{{"catalog", "zero"}, {"sup_norm", 0.0}, {"lipschitz", 0.0}};
  require_object(j, "perturbation", {"field", "catalog", "rate", "sup_norm", "lipschitz"});
  json out;
  out["sup_norm"] = number_or(j, "sup_norm", "perturbation", 0.0);
  out["lipschitz"] = number_or(j, "lipschitz", "perturbation", 0.0);
  nonnegative(out["sup_norm"], "perturbation.sup_norm");
  nonnegative(out["lipschitz"], "perturbation.lipschitz");
  if (j.contains("field") && j.contains("catalog"))
    throw ValidationError("perturbation form", "give either 'field' or 'catalog', not both");
  if (j.contains("field"))
  {
    if (j.contains("rate"))
      throw ValidationError("known fields", "'perturbation.rate' only applies to the rotation catalog field");
    out["field"] = strings(j["field"], "perturbation.field");
    if (out["field"].size() != n)
      throw ValidationError("dimensions agree", "'perturbation.field' has " + std::to_string(out["field"].size()) +
                                                  " components, expected " + std::to_string(n));
    return out;
  }
  const std::string name = j.contains("catalog") ? text(j["catalog"], "perturbation.catalog") : "zero";
  out["catalog"] = name;
  if (name == "zero")
  {
    if (j.contains("rate"))
      throw ValidationError("known fields", "'perturbation.rate' only applies to the rotation catalog field");
  }
  else if (name == "rotation")
  {
    if (n < 2)
      throw ValidationError("dimensions agree", "the rotation field needs at least two coordinates");
    out["rate"] = number(required(j, "rate", "perturbation"), "perturbation.rate");
  }
  else
    throw ValidationError("perturbation catalog", "unknown catalog field '" + name + "'");
  return out;
}

json normalize_tolerances(const json& j)
{
  const sweep::Tolerances d;
  if (j.is_null())
    return normalize_tolerances(json::object());
  require_object(j, "tolerances",
                 {"feasibility", "projector", "uniqueness", "velocity_margin", "activity"});
  json out{{"feasibility", number_or(j, "feasibility", "tolerances", d.feasibility)},
           {"projector", number_or(j, "projector", "tolerances", d.projector)},
           {"uniqueness", number_or(j, "uniqueness", "tolerances", d.uniqueness)},
           {"velocity_margin", number_or(j, "velocity_margin", "tolerances", d.velocity_margin)},
           {"activity", number_or(j, "activity", "tolerances", d.activity)}};
  for (const auto& [key, value] : out.items())
    if (!(value.get<double>() > 0.0))
      throw ValidationError("tolerances positive", "'tolerances." + key + "' must be positive");
  return out;
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte)
{
  int line = 1, column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i)
  {
    if (text[i] == '\n')
    {
      ++line;
      column = 1;
    }
    else
      ++column;
  }
  return {line, column};
}

}  // namespace

json normalize(const json& raw)
{
  require_object(raw, "",
                 {"schema", "name", "manifold", "set", "perturbation", "horizon", "x0", "h", "constants", "tolerances",
                  "seed"});
  const json& schema = required(raw, "schema", "");
  if (!schema.is_number_integer() || schema.get<long long>() != kSchemaVersion)
    throw ValidationError("schema: 1", "unsupported schema " + schema.dump() + ", expected 1");

  json out;
  out["schema"] = kSchemaVersion;
  out["name"] = raw.contains("name") ? text(raw["name"], "name") : std::string("scenario");
  out["manifold"] = normalize_manifold(required(raw, "manifold", ""));
  const std::size_t n = static_cast<std::size_t>(ambient_dim(out["manifold"]));
  out["set"] = normalize_set(required(raw, "set", ""), n);
  out["perturbation"] = normalize_perturbation(raw.contains("perturbation") ? raw["perturbation"] : json(nullptr), n);

  out["horizon"] = number(required(raw, "horizon", ""), "horizon");
  if (!(out["horizon"].get<double>() > 0.0) || !std::isfinite(out["horizon"].get<double>()))
    throw ValidationError("horizon > 0", "'horizon' must be positive and finite");
  out["x0"] = numbers(required(raw, "x0", ""), "x0", n);
  out["h"] = number_or(raw, "h", "", 1e-2);
  if (!(out["h"].get<double>() > 0.0))
    throw ValidationError("h > 0", "'h' must be positive");

  json constants{{"K_L", nullptr}, {"prox_radius_hint", nullptr}};
  if (raw.contains("constants") && !raw["constants"].is_null())
  {
    require_object(raw["constants"], "constants", {"K_L", "prox_radius_hint"});
    for (const char* key : {"K_L", "prox_radius_hint"})
      if (raw["constants"].contains(key) && !raw["constants"][key].is_null())
      {
        const double v = number(raw["constants"][key], std::string("constants.") + key);
        nonnegative(v, std::string("constants.") + key);
        constants[key] = v;
      }
  }
  if (constants["prox_radius_hint"].is_number() && !(constants["prox_radius_hint"].get<double>() > 0.0))
    throw ValidationError("prox_radius_hint > 0", "'constants.prox_radius_hint' must be positive");
  // the Lipschitz constant of general inequalities cannot be read off the descriptor
  if (out["set"]["kind"] == "inequalities" && constants["K_L"].is_null())
    throw ValidationError("required field", "'constants.K_L' must be declared for the inequalities set kind");
  out["constants"] = constants;
  out["tolerances"] = normalize_tolerances(raw.contains("tolerances") ? raw["tolerances"] : json(nullptr));

  if (raw.contains("seed"))
  {
    if (!raw["seed"].is_number_unsigned() && !(raw["seed"].is_number_integer() && raw["seed"].get<long long>() >= 0))
      throw ValidationError("type", "'seed' must be a nonnegative integer");
    out["seed"] = raw["seed"].get<std::uint64_t>();
  }
  else
    out["seed"] = 0;
  return out;
}

sweep::Scenario build(const json& doc)
{
  sweep::Scenario s;
  s.name = doc["name"];
  s.horizon = doc["horizon"];
  s.h = doc["h"];
  s.seed = doc["seed"];

  const json& tol = doc["tolerances"];
  s.tolerances.feasibility = tol["feasibility"];
  s.tolerances.projector = tol["projector"];
  s.tolerances.uniqueness = tol["uniqueness"];
  s.tolerances.velocity_margin = tol["velocity_margin"];
  s.tolerances.activity = tol["activity"];

  // manifold
  const json& mj = doc["manifold"];
  const std::string mkind = mj["kind"];
  const int dim = mj["dim"];
  const int n = ambient_dim(mj);
  if (mkind == "euclidean")
    s.manifold = std::make_shared<geometry::Euclidean>(dim);
  else if (mkind == "sphere")
    s.manifold = std::make_shared<geometry::Sphere>(dim);
  else if (mkind == "hyperbolic")
    s.manifold = std::make_shared<geometry::Hyperbolic>(dim);
  else
    s.manifold = std::make_shared<geometry::ImplicitSubmanifold>(dim, compile_all(mj["equalities"], n,
                                                                                   "manifold.equalities"));
  const geometry::Manifold& m = *s.manifold;

  // moving set
  const json& sj = doc["set"];
  const std::string skind = sj["kind"];
  std::shared_ptr<sets::MovingSet> set;
  try
  {
    if (skind == "half_space")
      set = std::make_shared<sets::HalfSpace>(s.manifold, to_vector(sj["normal"]), sj["offset"], sj["speed"]);
    else if (skind == "ball")
    {
      geometry::Point c;
      try
      {
        c = m.point(to_vector(sj["center"]));
      }
      catch (const DomainError& e)
      {
        throw ValidationError("center \xE2\x88\x88 M", e.what());
      }
      set = std::make_shared<sets::GeodesicBall>(s.manifold, c, sj["radius"], to_vector(sj["velocity"]),
                                                 sj["complement"].get<bool>());
    }
    else if (skind == "sphere_cap")
    {
      std::optional<Vector> plane;
      if (!sj["plane"].is_null())
        plane = to_vector(sj["plane"]);
      set = std::make_shared<sets::SphereCap>(s.manifold, to_vector(sj["axis"]), sj["height"], sj["omega"], plane);
    }
    else
      set = std::make_shared<sets::InequalitySet>(s.manifold, compile_all(sj["constraints"], n, "set.constraints"));
  }
  catch (const StructuralError& e)
  {
    throw ValidationError("set descriptor", e.what());
  }
  catch (const DomainError& e)
  {
    throw ValidationError("set descriptor", e.what());
  }

  json declared = doc["constants"];
  const double kl = declared["K_L"].is_null() ? set->lipschitz_constant() : declared["K_L"].get<double>();
  const double hint =
    declared["prox_radius_hint"].is_null() ? set->prox_radius_hint() : declared["prox_radius_hint"].get<double>();
  set->declare_constants(kl, hint);
  sets::ProjectorOptions popt = set->options();
  popt.feasibility_tol = s.tolerances.feasibility;
  popt.step_tol = s.tolerances.projector;
  popt.activity_tol = s.tolerances.activity;
  set->set_options(popt);
  s.set = set;

  // perturbation
  const json& pj = doc["perturbation"];
  s.f.sup_norm = pj["sup_norm"];
  s.f.lipschitz = pj["lipschitz"];
  if (pj.contains("field"))
  {
    auto comps = std::make_shared<std::vector<expr::Expression>>(compile_all(pj["field"], n, "perturbation.field"));
    s.f.field = [comps](double t, const Vector& x) {
      Vector out(static_cast<Eigen::Index>(comps->size()));
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
      for (std::size_t i = 0; i < comps->size(); ++i)
        out[static_cast<Eigen::Index>(i)] = (*comps)[i](xs, t);
      return out;
    };
  }
  else if (pj["catalog"] == "rotation")
  {
    const double w = pj["rate"];
    s.f.field = [w](double, const Vector& x) {
      Vector out = Vector::Zero(x.size());
      out[0] = -w * x[1];
      out[1] = w * x[0];
      return out;
    };
  }

  // initial point
  try
  {
    s.x0 = m.point(to_vector(doc["x0"]));
  }
  catch (const DomainError& e)
  {
    throw ValidationError(kInX0InM, e.what());
  }
  const Vector g = set->constraint_values(0.0, s.x0);
  std::string violated;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (g[i] < -s.tolerances.feasibility)
      violated += (violated.empty() ? "" : ", ") + std::string("constraint ") + std::to_string(i) + " (g = " +
                  sweep::format_double(g[i]) + ")";
  if (!violated.empty())
    throw ValidationError(kInX0InC0, "initial point violates " + violated);

  json resolved = doc;
  resolved["constants"] = {{"K_L", kl}, {"prox_radius_hint", hint}};
  s.descriptor = std::move(resolved);
  s.hash = scenario_hash(s.descriptor);
  return s;
}

sweep::Scenario parse_scenario(std::string_view text)
{
  json raw;
  try
  {
    raw = json::parse(text.begin(), text.end());
  }
  catch (const json::parse_error& e)
  {
    const auto [line, column] = line_column(text, e.byte);
    std::string what = e.what();
    const auto colon = what.rfind(": ");
    throw ParseError("invalid scenario JSON: " + (colon == std::string::npos ? what : what.substr(colon + 2)), line,
                     column);
  }
  return build(normalize(raw));
}

sweep::Scenario load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const sweep::Scenario& s)
{
  if (s.descriptor.is_null())
    throw StructuralError("scenario was not built from a document");
  return s.descriptor.dump(2) + "\n";
}

void save_scenario(const sweep::Scenario& s, const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write scenario file '" + path.string() + "'");
  out << dump_scenario(s);
}

std::string scenario_hash(const json& normalized)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : normalized.dump())
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json error_json(const std::exception& e)
{
  json j;
  j["message"] = e.what();
  j["kind"] = "error";
  if (const auto* err = dynamic_cast<const Error*>(&e))
    j["kind"] = err->kind();
  if (const auto* p = dynamic_cast<const ParseError*>(&e))
  {
    j["line"] = p->line();
    j["column"] = p->column();
  }
  if (const auto* v = dynamic_cast<const ValidationError*>(&e))
    j["invariant"] = v->invariant();
  if (const auto* f = dynamic_cast<const sweep::SweepFailure*>(&e))
    j["step"] = f->step();
  return json{{"error", j}};
}

}  // namespace sweepkit::io
