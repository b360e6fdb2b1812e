#ifndef CONSENSUS_HARNESS_HPP_
#define CONSENSUS_HARNESS_HPP_

// Scenario files, the built-in catalog, orchestration of checks, simulations and
// analyses, and persistence of their results.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "consensus/conditions.hpp"
#include "consensus/dynamics.hpp"
#include "consensus/stats.hpp"

namespace consensus::harness {

inline constexpr int kSchemaVersion = 1;

/// Scalar sequence rho_1, rho_2, ... checked directly by the product conditions.
using RhoSchedule = Schedule<double>;

struct CheckSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  std::optional<bool> expect;  ///< expected verdict; absent means "report only"
};

struct AnalysisSpec {
  std::string op;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json expect = nlohmann::json::object();
};

struct OutputSpec {
  bool trajectory = true;
  bool ensemble = true;
  bool summary = true;
};

struct Scenario {
  std::string id;
  std::string description;
  std::optional<ModelSpec> model;
  std::optional<RhoSchedule> rho;       ///< rho-only scenarios carry no model
  std::int64_t horizon = 0;
  std::size_t ensemble = 0;             ///< 0 = no ensemble
  std::vector<std::int64_t> snapshots;  ///< extra ensemble snapshot times
  std::uint64_t master_seed = 0;
  std::vector<CheckSpec> checks;
  std::vector<AnalysisSpec> analyses;
  std::map<std::string, double> tolerances;
  OutputSpec outputs;
  nlohmann::json source;                ///< the document the scenario was parsed from

  double tolerance(const std::string& key) const;
};

/// Tolerance keys understood by checks and analyses, with their defaults.
const std::map<std::string, double>& default_tolerances();

/// Parses and validates a scenario document; `origin` prefixes error messages.
/// Throws ParseError carrying a JSON pointer to the offending field.
Scenario parse_scenario(const nlohmann::json& doc, const std::string& origin = "<memory>");
Scenario load_scenario(const std::filesystem::path& path);

struct CatalogEntry {
  std::string id;
  std::string anchor;   ///< the behaviour the case demonstrates
  std::string summary;
};

/// Built-in scenario ids, in manifest order.
std::vector<CatalogEntry> catalog();
/// Accepts catalog ids and their aliases. Throws InvalidArgument for unknown ids.
Scenario catalog_scenario(const std::string& id);
/// A path to a scenario file, or else a catalog id.
Scenario resolve_scenario(const std::string& path_or_id);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;
  std::optional<std::size_t> ensemble;
  std::map<std::string, double> tolerances;
  int threads = 0;
  std::optional<std::filesystem::path> out_dir;  ///< no files are written without it
  bool checks_only = false;
};

/// Applies command-line overrides; unknown tolerance keys throw InvalidArgument.
void apply_overrides(Scenario& s, const RunOptions& options);

struct ItemResult {
  std::string name;
  nlohmann::json params;
  nlohmann::json result;  ///< report or analysis value; null on error
  nlohmann::json expect;  ///< null when nothing is asserted
  std::optional<std::string> error;
  bool passed = true;     ///< expectation met (true when nothing is asserted and no error)
};

struct RunSummary {
  std::string scenario_id;
  std::uint64_t master_seed = 0;
  std::int64_t horizon = 0;
  std::size_t ensemble = 0;
  std::vector<ItemResult> checks;
  std::vector<ItemResult> analyses;
  std::map<std::string, double> timing;  ///< seconds per phase
  std::map<std::string, std::string> files;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Executes checks, the run-0 trajectory, the ensemble and the analyses. Item
/// failures are recorded and the run continues. Deterministic given the seed.
RunSummary run_scenario(const Scenario& s, const RunOptions& options = {});

// Persistence.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// One row per run; values use shortest round-trip formatting.
void write_ensemble_csv(std::ostream& os, const Matrix& points);
/// Reads back write_ensemble_csv output (runs must be 0..m-1 in order).
Matrix read_ensemble_csv(std::istream& is);
std::string format_double(double v);

}  // namespace consensus::harness

#endif  // CONSENSUS_HARNESS_HPP_
