#pragma once

// StreamBench scenarios: fixture definitions, rho instantiation, the
// revision library and the scripted plan the mock planner follows.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "streamrev/core.hpp"

namespace streamrev {

struct ScriptStep {
  std::string id;
  std::string tool;
  Args args;  // may contain ${key} / ${key|default} placeholders
  std::optional<std::string> requires_key;
  std::string obs;

  friend bool operator==(const ScriptStep&, const ScriptStep&) = default;
};

/// Fixture content of one scenario, as authored in data/scenarios/*.json.
struct ScenarioDef {
  std::string name;
  std::string initial_query;
  std::vector<Clause> clauses;
  std::string order_key = "order";
  std::vector<ToolSpec> tools;      // task tools (A_T at full K/X)
  std::vector<ToolSpec> aux_tools;  // inverses and compensators
  std::map<std::string, ToolSpec> draft_equivalents;  // K/X tool -> R stand-in
  std::vector<ScriptStep> body;     // I/R prefix, cycled to fill the length multiplier
  std::vector<ScriptStep> tail;     // K/X steps
  std::map<std::string, std::vector<std::string>> tail_orders;
  std::vector<std::string> kx_disable_order;
  std::map<RevisionType, Revision> revisions;
};

ScenarioDef parse_scenario_def(const std::string& json_text);

/// Names of the bundled scenarios.
std::vector<std::string> scenario_names();

/// Bundled definition, or <dir>/data/scenarios/<name>.json when the
/// STREAMREV_ASSET_DIR environment variable names a directory holding it.
/// Throws ConfigError for unknown names.
const ScenarioDef& scenario_def(std::string_view name);

enum class RhoMode { Nearest, Exact };

struct PlannedStep {
  std::string step_id;
  std::string tool;
  ReversibilityClass cls = ReversibilityClass::I;
  Args args;
  std::string obs;
};

/// A scenario instantiated at a rho level and plan-length multiplier.
struct Scenario {
  std::string name;
  double target_rho = 0.25;
  double realized_rho = 0.0;
  unsigned length_multiplier = 1;
  std::set<std::string> enabled_kx;
  std::vector<ToolSpec> toolset;  // A_T for this rho level
  ToolRegistry registry;          // toolset + auxiliary tools
  Specification initial_spec;
  std::size_t plan_length = 0;      // N: scripted acts under the initial spec
  std::size_t first_kx_index = 0;   // 1-based position of the first tail step
  std::size_t last_kx_index = 0;    // position of the last tail step
  const ScenarioDef* def = nullptr;

  /// The full scripted plan under spec: the body repeated cyclically to
  /// m * (|body| + |tail|) - |tail| steps, then the tail in
  /// the order selected by spec, dropping steps whose required clause is
  /// not in force and substituting draft stand-ins for disabled K/X tools.
  std::vector<PlannedStep> plan_for(const Specification& spec) const;
};

/// Throws ConfigError for unknown names, multiplier 0 or a target outside
/// [0,1]; in Exact mode also when the target is not achievable, naming the
/// nearest achievable ratio.
Scenario build_scenario(std::string_view name, double target_rho, unsigned length_multiplier = 1,
                        RhoMode mode = RhoMode::Nearest);

Revision build_revision(const Scenario& scenario, RevisionType rtype);

/// Expands ${key} and ${key|default} from the effective clauses of spec.
std::string expand_template(const std::string& text, const Specification& spec);

}  // namespace streamrev
