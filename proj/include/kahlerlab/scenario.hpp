#pragma once

// Scenario files: INI text with the sections [scenario], [family] and [suite].
// The accepted keys are listed in scenario_schema() and in
// docs/scenario_schema.txt.

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kahlerlab/instance.hpp"
#include "kahlerlab/verify.hpp"

namespace kl {

enum class KeyType { string, number, integer, boolean, vector4, number_list, name_list };

struct SchemaKey {
  std::string section;
  std::string key;
  KeyType type;
  /// Families the key belongs to; empty means every family.
  std::vector<std::string> families;
  bool required = false;
  std::string help;
};

const std::vector<SchemaKey>& scenario_schema();
const std::vector<std::string>& family_kinds();

struct Scenario {
  std::string origin;
  std::string name;
  std::string description;
  std::string family;
  /// Raw [family] values, validated against the schema.
  std::map<std::string, std::string> family_keys;
  std::vector<Suite> suites;
  ToleranceConfig tol;
  bool seed_given = false;
  std::vector<ConstantExpr> constants;
  std::map<ConstantExpr, double> expected_constants;
  std::optional<std::string> expected_class;
  std::vector<std::string> fields;
  std::string report_path;
  std::string table_path;
};

/// Throws ConfigError naming the section and key at fault.
Scenario parse_scenario(std::istream& in, const std::string& origin);
Scenario load_scenario(const std::string& path);

FamilyInstance build_instance(const Scenario& sc);

}  // namespace kl
