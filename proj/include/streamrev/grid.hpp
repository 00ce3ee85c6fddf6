#pragma once

// Experiment grids: named presets, deterministic enumeration and a
// resumable parallel executor writing one JSON line per run.

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamrev/runtime.hpp"

namespace streamrev {

struct GridConfig {
  std::string name;
  std::vector<std::string> scenarios;
  std::vector<double> rhos;
  std::vector<RevisionType> revision_types;
  std::vector<std::string> policies;
  std::vector<std::string> timings;
  std::vector<unsigned> n_injections;
  std::vector<unsigned> length_mults;
  std::vector<std::uint64_t> seeds;
  std::string backend = "mock";
};

GridConfig parse_grid_config(const nlohmann::json& j);
std::vector<std::string> preset_names();
/// Bundled preset (data/presets/<name>.json). Throws ConfigError if unknown.
GridConfig load_preset(const std::string& name);

std::size_t grid_cardinality(const GridConfig& g);

/// Cross product in dimension order scenario, rho, revision type, policy,
/// timing, injections, length multiplier, then seed; each dimension keeps
/// the order given in the config. Throws ConfigError when empty.
std::vector<RunConfig> enumerate_grid(const GridConfig& g);

struct GridRunOptions {
  unsigned workers = 1;
  std::string out_path;       // JSONL; empty keeps rows in memory only
  bool full_records = false;  // write whole RunRecords instead of summary rows
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs every config not already present in out_path (matched by run_id),
/// checks each record's integrity, and rewrites out_path in enumeration
/// order. Completed rows are journaled to out_path + ".partial" so an
/// interrupted grid resumes where it stopped. Returns the rows in order.
std::vector<nlohmann::json> run_grid(const GridConfig& g, const GridRunOptions& opts);

}  // namespace streamrev
