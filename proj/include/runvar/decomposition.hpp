#pragma once

// Law-of-total-variance split of the next belief's total variance into a
// propagated part (from the spread of the current belief) and an intrinsic
// part added by the query, summary and update draws of one step.
//
// The conditioning state is b_t, the belief after t steps (0 <= t < T); the
// transition uses the temperatures of schedule step t + 1. X is the raw
// (unnormalized) next belief bit vector.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "runvar/sim.hpp"

namespace runvar {

enum class DecompositionMethod { ExactEnumeration, MonteCarlo };

struct DecompositionTerms {
  double total = 0.0;
  double propagated = 0.0;
  double intrinsic = 0.0;
  double delta_query = 0.0;
  double delta_sum = 0.0;
  double delta_update = 0.0;
};

struct DecompositionReport {
  int step = 0;
  DecompositionTerms terms;
  DecompositionMethod method = DecompositionMethod::ExactEnumeration;
  /// |total - (propagated + intrinsic)|
  double residual = 0.0;
  /// |intrinsic - (delta_query + delta_sum + delta_update)|
  double delta_residual = 0.0;
  /// Monte Carlo only.
  std::size_t n_outer = 0;
  std::size_t n_inner = 0;
  std::size_t samples = 0;  // simulated transitions
  std::optional<DecompositionTerms> standard_errors;
  /// Exact only: enumerated outcomes.
  std::size_t outcomes = 0;
};

nlohmann::json to_json(const DecompositionReport& r);

inline constexpr std::size_t kDefaultOutcomeLimit = 1'000'000;

/// Exact distribution of b_t, keyed by bit mask (bit f = finding f).
/// Requires n_findings <= 64. Throws StateSpaceTooLarge past `outcome_limit`.
std::map<std::uint64_t, double> belief_distribution(const sim::WorldSpec& world, const sim::PolicyConfig& cfg,
                                                    int t, std::size_t outcome_limit = kDefaultOutcomeLimit);

DecompositionReport decompose_exact(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t,
                                    std::size_t outcome_limit = kDefaultOutcomeLimit);

/// Nested Monte Carlo: n_outer draws of b_t, each followed by three groups of
/// n_inner continuations sharing b_t, (b_t, a_t) and (b_t, a_t, h_t). Every
/// trace is a pairwise U-statistic; standard errors are leave-one-outer-out
/// jackknife estimates.
DecompositionReport decompose_mc(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t,
                                 std::size_t n_outer, std::size_t n_inner, std::uint64_t seed);

struct PropagationPoint {
  int injection_step = 1;
  sim::EnsembleMetrics metrics;
};

/// For each step s in 1..T: temperature `lambda` on `module` at step s only,
/// then the final-output metrics of an n_runs ensemble.
std::vector<PropagationPoint> propagation_curve(const sim::WorldSpec& world, const sim::PolicyConfig& cfg_template,
                                                sim::Module module, double lambda, std::size_t n_runs,
                                                std::uint64_t base_seed);

}  // namespace runvar
