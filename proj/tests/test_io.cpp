#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sweepkit/io.hpp"
#include "sweepkit/sets.hpp"

using namespace sweepkit;
using nlohmann::json;

namespace
{

const std::filesystem::path kScenarios = SWEEPKIT_SCENARIO_DIR;

const char* kHalfLine = R"({
  "schema": 1,
  "manifold": {"kind": "euclidean", "dim": 1},
  "set": {"kind": "half_space", "normal": [1], "speed": 1},
  "horizon": 1,
  "x0": [0.4]
})";

json halfline_doc() { return json::parse(kHalfLine); }

std::string invariant_of(const json& doc)
{
  try
  {
    io::build(io::normalize(doc));
  }
  catch (const ValidationError& e)
  {
    return e.invariant();
  }
  return "";
}

std::string csv_of(const sweep::Scenario& s)
{
  std::ostringstream out;
  sweep::write_csv(sweep::catching_up(s, s.h), out);
  return out.str();
}

}  // namespace

TEST(LoadScenario, BundledScenariosLoad)
{
  for (const char* name : {"halfline", "disk_moving_center", "sphere_rotating_cap", "implicit_ellipse_cap",
                           "disk_static", "annulus_complement"})
  {
    const auto s = io::load_scenario(kScenarios / (std::string(name) + ".json"));
    EXPECT_EQ(s.name, name);
    EXPECT_EQ(s.hash.size(), 16u);
    EXPECT_LE(s.set->violation(0.0, s.x0), s.tolerances.feasibility) << name;
  }
}

TEST(LoadScenario, HalfLineDefaults)
{
  const auto s = io::load_scenario(kScenarios / "halfline.json");
  EXPECT_EQ(s.lipschitz(), 1.0);
  EXPECT_TRUE(s.f.is_zero());
  EXPECT_EQ(s.f.sup_norm, 0.0);
  EXPECT_EQ(s.horizon, 1.0);
  EXPECT_EQ(s.x0.coords[0], 0.4);
  EXPECT_EQ(s.seed, 1u);
}

TEST(LoadScenario, BrokenNamesInvariantAndConstraint)
{
  try
  {
    io::load_scenario(kScenarios / "broken.json");
    FAIL() << "expected ValidationError";
  }
  catch (const ValidationError& e)
  {
    EXPECT_EQ(e.invariant(), "x\xE2\x82\x80 \xE2\x88\x88 C(0)");
    EXPECT_NE(std::string(e.what()).find("constraint 0"), std::string::npos) << e.what();
  }
}

TEST(LoadScenario, RotatingCapAxis)
{
  const auto s = io::load_scenario(kScenarios / "sphere_rotating_cap.json");
  const auto* cap = dynamic_cast<const sets::SphereCap*>(s.set.get());
  ASSERT_NE(cap, nullptr);
  // oracle: a(t) = (sin 0.3t, 0, cos 0.3t)
  for (double t : {0.0, std::numbers::pi / 0.6, 1.3})
  {
    const auto a = cap->axis(t);
    EXPECT_NEAR(a[0], std::sin(0.3 * t), 1e-15);
    EXPECT_NEAR(a[1], 0.0, 1e-15);
    EXPECT_NEAR(a[2], std::cos(0.3 * t), 1e-15);
  }
}

TEST(LoadScenario, MissingFileIsAnError)
{
  EXPECT_THROW(io::load_scenario(kScenarios / "no_such_file.json"), Error);
}

TEST(Normalize, DefaultsFilled)
{
  const json n = io::normalize(halfline_doc());
  EXPECT_EQ(n["name"], "scenario");
  EXPECT_EQ(n["h"], 1e-2);
  EXPECT_EQ(n["seed"], 0);
  EXPECT_EQ(n["set"]["offset"], 0.0);
  EXPECT_TRUE(n["perturbation"].is_object());
  for (const char* key : {"feasibility", "projector", "uniqueness", "velocity_margin"})
    EXPECT_TRUE(n["tolerances"].contains(key)) << key;
  // normalizing is idempotent
  EXPECT_EQ(io::normalize(n), n);
}

TEST(Normalize, RejectsUnknownFields)
{
  json doc = halfline_doc();
  doc["horizn"] = 2;
  EXPECT_EQ(invariant_of(doc), "known fields");
  doc = halfline_doc();
  doc["set"]["radius"] = 1;
  EXPECT_EQ(invariant_of(doc), "known fields");
}

TEST(Normalize, NamedInvariants)
{
  json doc = halfline_doc();
  doc["schema"] = 2;
  EXPECT_EQ(invariant_of(doc), "schema: 1");

  doc = halfline_doc();
  doc["horizon"] = 0;
  EXPECT_EQ(invariant_of(doc), "horizon > 0");

  doc = halfline_doc();
  doc["h"] = -1e-3;
  EXPECT_EQ(invariant_of(doc), "h > 0");

  doc = halfline_doc();
  doc["constants"] = {{"K_L", -1.0}};
  EXPECT_EQ(invariant_of(doc), "declared constants nonnegative");

  doc = halfline_doc();
  doc["constants"] = {{"prox_radius_hint", 0.0}};
  EXPECT_EQ(invariant_of(doc), "prox_radius_hint > 0");

  doc = halfline_doc();
  doc["set"] = {{"kind", "inequalities"}, {"constraints", {"x1 - t"}}};
  EXPECT_EQ(invariant_of(doc), "required field");
  doc["constants"] = {{"K_L", 1.0}};
  EXPECT_EQ(invariant_of(doc), "");

  doc = halfline_doc();
  doc["perturbation"] = {{"field", {"1"}}, {"sup_norm", -0.5}};
  EXPECT_EQ(invariant_of(doc), "declared constants nonnegative");

  doc = halfline_doc();
  doc["x0"] = {0.4, 0.0};
  EXPECT_EQ(invariant_of(doc), "dimensions agree");

  doc = halfline_doc();
  doc["manifold"]["kind"] = "torus";
  EXPECT_EQ(invariant_of(doc), "manifold kind");

  doc = halfline_doc();
  doc["set"]["kind"] = "polygon";
  EXPECT_EQ(invariant_of(doc), "set kind");

  doc = halfline_doc();
  doc.erase("x0");
  EXPECT_EQ(invariant_of(doc), "required field");

  doc = halfline_doc();
  doc["tolerances"] = {{"feasibility", 0.0}};
  EXPECT_EQ(invariant_of(doc), "tolerances positive");

  doc = halfline_doc();
  doc["perturbation"] = {{"catalog", "vortex"}};
  EXPECT_EQ(invariant_of(doc), "perturbation catalog");

  doc = json::parse(R"({"schema": 1, "manifold": {"kind": "euclidean", "dim": 2},
    "set": {"kind": "ball", "center": [0, 0], "radius": -1}, "horizon": 1, "x0": [0, 0]})");
  EXPECT_EQ(invariant_of(doc), "radius > 0");

  doc = json::parse(R"({"schema": 1, "manifold": {"kind": "sphere", "dim": 2},
    "set": {"kind": "sphere_cap", "axis": [0, 0, 1]}, "horizon": 1, "x0": [0, 0, 2]})");
  EXPECT_EQ(invariant_of(doc), "x\xE2\x82\x80 \xE2\x88\x88 M");
}

TEST(ParseScenario, JsonSyntaxErrorHasLineAndColumn)
{
  try
  {
    io::parse_scenario("{\n  \"schema\": 1,\n  \"horizon\": ,\n}");
    FAIL() << "expected ParseError";
  }
  catch (const ParseError& e)
  {
    EXPECT_EQ(e.line(), 3);
    EXPECT_GE(e.column(), 13);
  }
}

TEST(ParseScenario, ExpressionErrorCarriesPath)
{
  json doc = json::parse(R"({"schema": 1, "manifold": {"kind": "euclidean", "dim": 2},
    "set": {"kind": "ball", "center": [0, 0], "radius": 1},
    "perturbation": {"field": ["x1", "x2 * * 2"], "sup_norm": 1, "lipschitz": 1},
    "horizon": 1, "x0": [0, 0]})");
  try
  {
    io::parse_scenario(doc.dump());
    FAIL() << "expected ParseError";
  }
  catch (const ParseError& e)
  {
    EXPECT_NE(std::string(e.what()).find("perturbation.field[1]"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 6);
  }
}

TEST(RoundTrip, HashStable)
{
  const auto dir = std::filesystem::temp_directory_path() / "sweepkit_test_io";
  std::filesystem::create_directories(dir);
  for (const char* name : {"halfline", "disk_moving_center", "sphere_rotating_cap", "implicit_ellipse_cap"})
  {
    const auto a = io::load_scenario(kScenarios / (std::string(name) + ".json"));
    const auto path = dir / (std::string(name) + ".json");
    io::save_scenario(a, path);
    const auto b = io::load_scenario(path);
    EXPECT_EQ(a.hash, b.hash) << name;
    EXPECT_EQ(a.descriptor, b.descriptor) << name;
    EXPECT_EQ(io::dump_scenario(a), io::dump_scenario(b)) << name;
  }
  std::filesystem::remove_all(dir);
}

TEST(RoundTrip, HashIgnoresKeyOrderAndSeesValues)
{
  const json a = io::normalize(halfline_doc());
  const json b = io::normalize(json::parse(R"({"x0": [0.4], "horizon": 1,
    "set": {"speed": 1, "normal": [1], "kind": "half_space"},
    "manifold": {"dim": 1, "kind": "euclidean"}, "schema": 1})"));
  EXPECT_EQ(io::scenario_hash(a), io::scenario_hash(b));
  json c = halfline_doc();
  c["seed"] = 9;
  EXPECT_NE(io::scenario_hash(a), io::scenario_hash(io::normalize(c)));
}

TEST(RoundTrip, SameScenarioSameCsv)
{
  const auto a = io::load_scenario(kScenarios / "sphere_rotating_cap.json");
  const auto b = io::load_scenario(kScenarios / "sphere_rotating_cap.json");
  EXPECT_EQ(csv_of(a), csv_of(b));
}

TEST(ErrorJson, Structure)
{
  const json v = io::error_json(ValidationError("horizon > 0", "'horizon' must be positive"));
  EXPECT_EQ(v["error"]["kind"], "validation");
  EXPECT_EQ(v["error"]["invariant"], "horizon > 0");

  const json p = io::error_json(ParseError("bad token", 2, 7));
  EXPECT_EQ(p["error"]["kind"], "parse");
  EXPECT_EQ(p["error"]["line"], 2);
  EXPECT_EQ(p["error"]["column"], 7);

  const json other = io::error_json(std::runtime_error("boom"));
  EXPECT_EQ(other["error"]["message"], "boom");
}
