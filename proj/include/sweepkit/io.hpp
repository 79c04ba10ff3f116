#pragma once

#include <exception>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <string_view>

#include "sweepkit/sweep.hpp"

namespace sweepkit::io
{

inline constexpr int kSchemaVersion = 1;

/// Checks a raw scenario document against schema 1 and returns it with every
/// default filled in. Unknown fields are rejected. Throws ValidationError.
nlohmann::json normalize(const nlohmann::json& raw);

/// Builds the runtime scenario from a normalized document: compiles the
/// expressions, instantiates the manifold and set, applies the declared
/// constants and tolerances, and checks x0 against C(0).
sweep::Scenario build(const nlohmann::json& normalized);

/// normalize + build. Syntax errors raise ParseError with line and column.
sweep::Scenario parse_scenario(std::string_view text);
sweep::Scenario load_scenario(const std::filesystem::path& path);

/// Writes the normalized document (two-space indented, sorted keys).
void save_scenario(const sweep::Scenario& s, const std::filesystem::path& path);
std::string dump_scenario(const sweep::Scenario& s);

/// FNV-1a 64 of the compact dump of a normalized document, as 16 hex digits.
std::string scenario_hash(const nlohmann::json& normalized);

/// Machine-readable form of an error: kind, message, and line/column or the
/// invariant name when present.
nlohmann::json error_json(const std::exception& e);

}  // namespace sweepkit::io
