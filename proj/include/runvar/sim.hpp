#pragma once

// Synthetic information-acquisition process: a belief bit vector over N
// candidate findings, updated for T steps by three tempered policies
// (query selection, summarization, belief update).

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "runvar/metrics.hpp"

namespace runvar::sim {

enum class Module { Query = 0, Sum = 1, Update = 2 };
inline constexpr std::array kModules{Module::Query, Module::Sum, Module::Update};

std::string_view to_string(Module m);
Module module_from_string(std::string_view s);

/// Step index meaning "every step" in grids and schedules.
inline constexpr int kCombined = 0;

using Belief = std::vector<std::uint8_t>;

/// Seeded generator. Uniform draws are built from raw 64-bit outputs so that
/// results are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  /// Independent stream `stream` derived from `seed`.
  Rng(std::uint64_t seed, std::uint64_t stream);
  /// Uniform on [0, 1).
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// Seed of run i in an ensemble.
inline std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run_index) {
  return base_seed ^ run_index;
}

/// softmax(logits / lambda); a one-hot at the first maximum when lambda == 0.
std::vector<double> tempered_probabilities(std::span<const double> logits, double lambda);

/// Draws an index from tempered_probabilities. Consumes no randomness when
/// lambda == 0. Throws EmptyActionSet.
std::size_t tempered_sample(std::span<const double> logits, double lambda, Rng& rng);

struct Document {
  std::vector<std::size_t> findings;  // ascending
  std::vector<std::string> distractors;
};

struct Query {
  std::string text;
  Document document;
};

struct AnswerCandidate {
  std::string label;
  std::vector<std::size_t> key_findings;
};

struct WorldSpec {
  std::size_t n_findings = 0;
  std::vector<Query> queries;  // query i always retrieves document i
  std::vector<AnswerCandidate> answers;
  std::string gold_answer;
  int horizon = 3;
};

/// Label of the candidate with the most key findings in `belief` (earliest
/// candidate on ties), or "" when no key finding is held.
std::string answer_for(const WorldSpec& world, const Belief& belief);

/// Answer-level dimension: one slot per candidate plus one for "".
std::size_t answer_index(const WorldSpec& world, const std::string& label);

class TemperatureSchedule {
 public:
  explicit TemperatureSchedule(int horizon = 3);

  int horizon() const noexcept { return horizon_; }
  /// step in 1..horizon.
  double at(Module m, int step) const;
  /// step in 1..horizon, or kCombined for every step.
  void set(Module m, int step, double lambda);
  void set_all(double lambda);
  void scale(Module m, double factor);

  friend bool operator==(const TemperatureSchedule&, const TemperatureSchedule&) = default;

 private:
  int horizon_;
  std::array<std::vector<double>, 3> lambda_;
};

struct PolicyConfig {
  std::vector<double> query_logits;               // one per query
  std::vector<std::vector<double>> query_affinity;  // [query][finding], may be empty
  double coverage_penalty = -2.0;                 // added when a document is fully held
  std::vector<double> inclusion_logits;           // per finding, against a logit of 0
  std::vector<double> flip_logits;                // per finding, <= 0
  TemperatureSchedule schedule;
  std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate(const WorldSpec& world, const PolicyConfig& cfg);

/// Query logits given the current belief.
std::vector<double> query_logits(const WorldSpec& world, const PolicyConfig& cfg, const Belief& belief);

/// P(fact f is kept by the summary) at temperature lambda.
double inclusion_probability(const PolicyConfig& cfg, std::size_t f, double lambda);
/// P(a summarized fact sets its bit) at temperature lambda.
double set_probability(const PolicyConfig& cfg, std::size_t f, double lambda);

/// Summary draw: each fact of document `query` is kept independently.
std::vector<std::size_t> sample_summary(const WorldSpec& world, const PolicyConfig& cfg, std::size_t query,
                                        double lambda, Rng& rng);
/// Belief update: each summarized fact sets its bit unless the flip draw fails.
Belief apply_update(const PolicyConfig& cfg, const Belief& belief, std::span<const std::size_t> summary,
                    double lambda, Rng& rng);

/// Modifications applied by mitigation strategies.
struct StepVariant {
  double sum_scale = 1.0;
  double update_scale = 1.0;
  /// Receives the 1-based step; empty means a plain tempered draw.
  std::function<std::size_t(int step, std::span<const double> logits, double lambda, Rng& rng)>
      choose_query;
};

struct StepOutcome {
  std::size_t action = 0;
  std::size_t observation = 0;       // document id
  std::vector<std::size_t> summary;  // facts kept by the summary
  Belief next_belief;
};

/// One transition from `belief` at step t (1-based).
StepOutcome step(const WorldSpec& world, const Belief& belief, int t, const PolicyConfig& cfg,
                 Rng& rng, const StepVariant& variant = {});

struct TrajectoryRecord {
  std::vector<Belief> beliefs;  // b_0 .. b_T
  std::vector<std::size_t> actions;
  std::vector<std::size_t> observations;
  std::vector<std::vector<std::size_t>> summaries;
  std::vector<std::size_t> citations;  // sorted document ids
  std::string answer;
  std::uint64_t seed = 0;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

nlohmann::json to_json(const TrajectoryRecord& r);

TrajectoryRecord run_trajectory(const WorldSpec& world, const PolicyConfig& cfg, std::uint64_t seed,
                                const StepVariant& variant = {});

/// Runs use run_seed(base_seed, i) and are returned in run order regardless
/// of how many threads execute them. Throws InsufficientRuns for n_runs < 2.
std::vector<TrajectoryRecord> run_ensemble(const WorldSpec& world, const PolicyConfig& cfg,
                                           std::size_t n_runs, std::uint64_t base_seed,
                                           const StepVariant& variant = {},
                                           std::size_t max_workers = 1);

struct EnsembleMetrics {
  TvResult answer;
  TvResult finding;
  TvResult citation;
  double accuracy = 0.0;  // fraction of runs whose answer equals the gold answer

  double average_tv() const { return (answer.tv + finding.tv + citation.tv) / 3.0; }
};

std::vector<OutputVector> finding_vectors(const WorldSpec& world, std::span<const TrajectoryRecord> runs);
std::vector<OutputVector> citation_vectors(const WorldSpec& world, std::span<const TrajectoryRecord> runs);
std::vector<OutputVector> answer_vectors(const WorldSpec& world, std::span<const TrajectoryRecord> runs);

EnsembleMetrics measure(const WorldSpec& world, std::span<const TrajectoryRecord> runs);

struct AblationCell {
  double lambda = 0.0;
  int step = kCombined;
  Module module = Module::Query;
  EnsembleMetrics metrics;
  std::vector<TrajectoryRecord> runs;
};

/// One cell per (lambda, step, module), in that nesting order. Each cell
/// starts from an all-zero schedule and uses the same base seed.
std::vector<AblationCell> ablation_grid(const WorldSpec& world, const PolicyConfig& base_cfg,
                                        std::span<const Module> modules, std::span<const int> steps,
                                        std::span<const double> lambdas, std::size_t n_runs,
                                        std::uint64_t base_seed, std::size_t max_workers = 1);

// Built-in worlds ----------------------------------------------------------

struct Scenario {
  WorldSpec world;
  PolicyConfig policy;
};

/// 32 findings, 8 queries, horizon 3. Query choices form chains, so an early
/// deviation changes every later document.
Scenario reference_scenario();

/// 4 findings, 2 queries, horizon 2, every temperature 0.7.
Scenario tiny_scenario();

/// Random small world for property tests: N in [2,5], 1-3 queries, horizon
/// 1-3, random temperatures (some exactly 0).
Scenario random_tiny_scenario(std::uint64_t seed);

// Serialization ------------------------------------------------------------

nlohmann::json to_json(const WorldSpec& world);
nlohmann::json to_json(const PolicyConfig& cfg);
nlohmann::json to_json(const TemperatureSchedule& schedule);
/// Parsers report problems as ConfigError with a path rooted at `where`.
WorldSpec world_from_json(const nlohmann::json& j, const std::string& where = "world");
PolicyConfig policy_from_json(const nlohmann::json& j, const WorldSpec& world,
                              const std::string& where = "policy");
TemperatureSchedule schedule_from_json(const nlohmann::json& j, int horizon,
                                       const std::string& where = "schedule");

std::string belief_string(const Belief& b);

}  // namespace runvar::sim
