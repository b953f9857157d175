#pragma once

// End-to-end drivers behind the runvar command line: report evaluation,
// simulator grids, decomposition, mitigation and table aggregation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "runvar/decomposition.hpp"
#include "runvar/judge.hpp"
#include "runvar/mitigation.hpp"
#include "runvar/sim.hpp"
#include "runvar/table.hpp"

namespace runvar {

enum class Mode { Evaluate, Simulate, Decompose, Ablate, Mitigate, Aggregate };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct AblationSettings {
  std::vector<sim::Module> modules{sim::Module::Query, sim::Module::Sum, sim::Module::Update};
  /// sim::kCombined (0) injects at every step.
  std::vector<int> steps{1, 2, 3, sim::kCombined};
  std::vector<double> lambdas{0.5, 1.0};
};

struct DecomposeSettings {
  DecompositionMethod method = DecompositionMethod::ExactEnumeration;
  /// Conditioning steps; empty means 0 .. horizon - 1.
  std::vector<int> steps;
  std::size_t n_outer = 500;
  std::size_t n_inner = 500;
  std::size_t outcome_limit = kDefaultOutcomeLimit;
};

struct MitigateSettings {
  MitigationConfig config;
  /// Temperature applied to every module and step before mitigation.
  double lambda = 1.0;
};

struct AggregateSettings {
  /// A CSV path, or "fixture:<name>".
  std::string input;
  std::vector<std::string> group_by;
};

struct RunConfig {
  Mode mode = Mode::Simulate;
  std::string reports;  // evaluate input
  JudgeSettings judge;
  std::string world_name = "reference";  // "reference", "tiny" or "custom"
  sim::WorldSpec world;
  sim::PolicyConfig policy;
  std::size_t n_runs = 10;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  /// Worker threads; 0 uses the hardware concurrency. Never affects results.
  std::size_t max_workers = 0;
  AblationSettings ablation;
  DecomposeSettings decompose;
  MitigateSettings mitigate;
  AggregateSettings aggregate;
};

/// Builds and validates a config. Missing fields take their defaults.
/// Throws ConfigError with the path of the offending field.
RunConfig config_from_json(const nlohmann::json& j, Mode mode);

/// Every field that can change results; out_dir and max_workers are left out.
nlohmann::json to_json(const RunConfig& config);

/// First 16 hex digits of the SHA-256 of to_json(config).dump().
std::string config_hash(const RunConfig& config);

/// Raw output of one command.
struct CommandResult {
  Table table;                          // results.csv
  std::vector<nlohmann::json> records;  // records.jsonl, one per line
  std::vector<std::string> warnings;
  nlohmann::json metadata = nlohmann::json::object();  // merged into meta.json
};

/// Groups reports by question, extracts and canonicalizes every run, and
/// emits one row per question plus an "__average__" row (the unweighted mean
/// over questions). Questions with fewer than 2 runs are skipped with a warning.
CommandResult cmd_evaluate(const RunConfig& config);
/// One row of final-output metrics for an n_runs ensemble.
CommandResult cmd_simulate(const RunConfig& config);
/// One row per (lambda, step, module) cell.
CommandResult cmd_ablate(const RunConfig& config);
/// One row per conditioning step.
CommandResult cmd_decompose(const RunConfig& config);
/// One row per mitigation variant, from baseline to all strategies combined.
CommandResult cmd_mitigate(const RunConfig& config);

/// Grouped means of a results file or fixture. Throws ConfigError listing the
/// valid keys when a group key is unknown.
Table cmd_aggregate(const std::string& input, const std::vector<std::string>& group_by);

CommandResult run_command(const RunConfig& config);

/// Writes results.csv, records.jsonl and meta.json under
/// <out_dir>/<mode>-<hash>, adding .1, .2, ... when that directory exists.
/// Returns the directory written.
std::filesystem::path write_outputs(const RunConfig& config, const CommandResult& result);

}  // namespace runvar
