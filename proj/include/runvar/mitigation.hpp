#pragma once

// Variance mitigation: closed schemas for intermediate reasoning, and a
// consensus ensemble over query proposals whose size decays across steps.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "runvar/schema.hpp"
#include "runvar/sim.hpp"

namespace runvar {

/// {established_facts, open_questions, next_search_directions,
///  contradictions_or_uncertainties}, all required string arrays.
const SchemaDescriptor& reasoning_schema();

/// Parses `raw` and checks it against `schema`. Accepts a payload wrapped in
/// a single <tag>...</tag> element and payloads whose JSON text is itself
/// string-escaped. Throws SchemaViolation carrying the offending field path.
nlohmann::json validate_structured(std::string_view raw, const SchemaDescriptor& schema);

struct ReasoningRecord {
  std::vector<std::string> established_facts;
  std::vector<std::string> open_questions;
  std::vector<std::string> next_search_directions;
  std::vector<std::string> contradictions_or_uncertainties;

  friend bool operator==(const ReasoningRecord&, const ReasoningRecord&) = default;
};

ReasoningRecord parse_reasoning(std::string_view raw);
nlohmann::json to_json(const ReasoningRecord& r);

/// Casefolded, trimmed, whitespace-collapsed query text.
std::string normalize_query_key(std::string_view query);

/// Intersection of the normalized sets, in the order of the first set; the
/// first set itself when the intersection is empty. Throws NoProposals.
std::vector<std::string> intersect_queries(const std::vector<std::vector<std::string>>& query_sets);

struct EnsembleSchedule {
  int n0 = 3;
  /// Explicit sizes for steps 1..sizes.size(); when empty, N(t) = max(1, n0 - (t - 1)).
  std::vector<int> sizes;
};

/// N(t) for t >= 1; 1 beyond the explicit schedule.
int ensemble_size(int t, const EnsembleSchedule& schedule);

/// Throws ConfigError unless sizes are >= 1 and non-increasing.
void validate(const EnsembleSchedule& schedule);

struct MitigationConfig {
  bool query_intersection = true;
  bool structured_sum = true;
  bool structured_update = true;
  /// Temperature multiplier for structured stages, in (0, 1].
  double gamma = 0.5;
  EnsembleSchedule schedule;
  /// Queries per proposal in the consensus ensemble.
  std::size_t proposal_size = 5;
};

void validate(const MitigationConfig& config, const sim::WorldSpec& world);

/// Step modifications implementing `config`. With N(t) == 1 the query draw is
/// exactly the unmitigated one, so N == 1 and gamma == 1 reproduce baseline
/// trajectories.
sim::StepVariant mitigation_variant(const sim::WorldSpec& world, const MitigationConfig& config);

sim::StepOutcome mitigated_step(const sim::WorldSpec& world, const sim::Belief& belief, int t,
                                const sim::PolicyConfig& cfg, const MitigationConfig& config,
                                sim::Rng& rng);

std::vector<sim::TrajectoryRecord> run_mitigated_ensemble(const sim::WorldSpec& world,
                                                          const sim::PolicyConfig& cfg,
                                                          const MitigationConfig& config,
                                                          std::size_t n_runs, std::uint64_t base_seed,
                                                          std::size_t max_workers = 1);

}  // namespace runvar
