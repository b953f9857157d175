#include "runvar/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "runvar/error.hpp"
#include "runvar/parallel.hpp"

namespace runvar::sim {

using nlohmann::json;

std::string_view to_string(Module m) {
  switch (m) {
    case Module::Query: return "query";
    case Module::Sum: return "sum";
    case Module::Update: return "update";
  }
  return "unknown";
}

Module module_from_string(std::string_view s) {
  for (auto m : kModules) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("module", "unknown module '" + std::string(s) + "' (expected query, sum or update)");
}

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32)};
  engine_.seed(seq);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::vector<double> tempered_probabilities(std::span<const double> logits, double lambda) {
  if (logits.empty()) throw EmptyActionSet();
  std::vector<double> p(logits.size(), 0.0);
  const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  if (lambda <= 0.0) {
    p[best] = 1.0;
    return p;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - logits[best]) / lambda);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t tempered_sample(std::span<const double> logits, double lambda, Rng& rng) {
  const auto p = tempered_probabilities(logits, lambda);
  if (lambda <= 0.0) return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = i;
    cumulative += p[i];
    if (u < cumulative) return i;
  }
  return last_positive;  // rounding left u above the final cumulative sum
}

std::string answer_for(const WorldSpec& world, const Belief& belief) {
  std::size_t best_count = 0;
  const std::string* best = nullptr;
  for (const auto& candidate : world.answers) {
    std::size_t count = 0;
    for (auto f : candidate.key_findings) count += belief[f] != 0;
    if (count > best_count) {
      best_count = count;
      best = &candidate.label;
    }
  }
  return best == nullptr ? std::string{} : *best;
}

std::size_t answer_index(const WorldSpec& world, const std::string& label) {
  for (std::size_t i = 0; i < world.answers.size(); ++i) {
    if (world.answers[i].label == label) return i;
  }
  return world.answers.size();
}

// ---------------------------------------------------------------------------

TemperatureSchedule::TemperatureSchedule(int horizon) : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("horizon", "must be at least 1");
  for (auto& row : lambda_) row.assign(static_cast<std::size_t>(horizon), 0.0);
}

double TemperatureSchedule::at(Module m, int step) const {
  if (step < 1 || step > horizon_) throw ConfigError("schedule", fmt::format("step {} outside 1..{}", step, horizon_));
  return lambda_[static_cast<std::size_t>(m)][static_cast<std::size_t>(step - 1)];
}

void TemperatureSchedule::set(Module m, int step, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("schedule", fmt::format("temperature must be finite and >= 0, got {}", lambda));
  }
  auto& row = lambda_[static_cast<std::size_t>(m)];
  if (step == kCombined) {
    std::fill(row.begin(), row.end(), lambda);
    return;
  }
  if (step < 1 || step > horizon_) throw ConfigError("schedule", fmt::format("step {} outside 1..{}", step, horizon_));
  row[static_cast<std::size_t>(step - 1)] = lambda;
}

void TemperatureSchedule::set_all(double lambda) {
  for (auto m : kModules) set(m, kCombined, lambda);
}

void TemperatureSchedule::scale(Module m, double factor) {
  for (double& x : lambda_[static_cast<std::size_t>(m)]) x *= factor;
}

// ---------------------------------------------------------------------------

void validate(const WorldSpec& world, const PolicyConfig& cfg) {
  const auto n = world.n_findings;
  if (n == 0) throw ConfigError("world.n_findings", "must be positive");
  if (world.queries.empty()) throw ConfigError("world.queries", "at least one query is required");
  if (world.horizon < 1) throw ConfigError("world.horizon", "must be at least 1");
  for (std::size_t q = 0; q < world.queries.size(); ++q) {
    const auto& doc = world.queries[q].document;
    if (!std::is_sorted(doc.findings.begin(), doc.findings.end()) ||
        std::adjacent_find(doc.findings.begin(), doc.findings.end()) != doc.findings.end()) {
      throw ConfigError(fmt::format("world.queries[{}].findings", q), "must be ascending and unique");
    }
    for (auto f : doc.findings) {
      if (f >= n) throw ConfigError(fmt::format("world.queries[{}].findings", q), fmt::format("finding {} >= n_findings", f));
    }
  }
  for (std::size_t a = 0; a < world.answers.size(); ++a) {
    for (auto f : world.answers[a].key_findings) {
      if (f >= n) throw ConfigError(fmt::format("world.answers[{}].key_findings", a), fmt::format("finding {} >= n_findings", f));
    }
  }
  if (cfg.query_logits.size() != world.queries.size()) {
    throw ConfigError("policy.query_logits", fmt::format("expected {} values", world.queries.size()));
  }
  if (!cfg.query_affinity.empty()) {
    if (cfg.query_affinity.size() != world.queries.size()) {
      throw ConfigError("policy.query_affinity", fmt::format("expected {} rows", world.queries.size()));
    }
    for (std::size_t q = 0; q < cfg.query_affinity.size(); ++q) {
      if (cfg.query_affinity[q].size() != n) {
        throw ConfigError(fmt::format("policy.query_affinity[{}]", q), fmt::format("expected {} values", n));
      }
    }
  }
  if (cfg.inclusion_logits.size() != n) throw ConfigError("policy.inclusion_logits", fmt::format("expected {} values", n));
  if (cfg.flip_logits.size() != n) throw ConfigError("policy.flip_logits", fmt::format("expected {} values", n));
  for (std::size_t f = 0; f < n; ++f) {
    if (!(cfg.flip_logits[f] <= 0.0)) throw ConfigError(fmt::format("policy.flip_logits[{}]", f), "must be <= 0");
  }
  if (cfg.schedule.horizon() != world.horizon) {
    throw ConfigError("policy.schedule", fmt::format("covers {} steps, world horizon is {}", cfg.schedule.horizon(), world.horizon));
  }
}

std::vector<double> query_logits(const WorldSpec& world, const PolicyConfig& cfg, const Belief& belief) {
  std::vector<double> logits = cfg.query_logits;
  for (std::size_t q = 0; q < logits.size(); ++q) {
    if (!cfg.query_affinity.empty()) {
      const auto& row = cfg.query_affinity[q];
      for (std::size_t f = 0; f < row.size(); ++f) {
        if (belief[f] != 0) logits[q] += row[f];
      }
    }
    const auto& facts = world.queries[q].document.findings;
    if (std::all_of(facts.begin(), facts.end(), [&](std::size_t f) { return belief[f] != 0; })) {
      logits[q] += cfg.coverage_penalty;
    }
  }
  return logits;
}

namespace {

std::array<double, 2> inclusion_logits(const PolicyConfig& cfg, std::size_t f) {
  return {cfg.inclusion_logits[f], 0.0};  // index 0 keeps the fact
}

std::array<double, 2> flip_pair(const PolicyConfig& cfg, std::size_t f) {
  return {0.0, cfg.flip_logits[f]};  // index 1 leaves the bit unset
}

}  // namespace

double inclusion_probability(const PolicyConfig& cfg, std::size_t f, double lambda) {
  return tempered_probabilities(inclusion_logits(cfg, f), lambda)[0];
}

double set_probability(const PolicyConfig& cfg, std::size_t f, double lambda) {
  return tempered_probabilities(flip_pair(cfg, f), lambda)[0];
}

std::vector<std::size_t> sample_summary(const WorldSpec& world, const PolicyConfig& cfg, std::size_t query,
                                        double lambda, Rng& rng) {
  std::vector<std::size_t> summary;
  for (auto f : world.queries[query].document.findings) {
    if (tempered_sample(inclusion_logits(cfg, f), lambda, rng) == 0) summary.push_back(f);
  }
  return summary;
}

Belief apply_update(const PolicyConfig& cfg, const Belief& belief, std::span<const std::size_t> summary,
                    double lambda, Rng& rng) {
  Belief next = belief;
  for (auto f : summary) {
    if (tempered_sample(flip_pair(cfg, f), lambda, rng) == 0) next[f] = 1;
  }
  return next;
}

StepOutcome step(const WorldSpec& world, const Belief& belief, int t, const PolicyConfig& cfg, Rng& rng,
                 const StepVariant& variant) {
  if (t < 1 || t > world.horizon) throw ConfigError("step", fmt::format("step {} outside 1..{}", t, world.horizon));
  const auto& schedule = cfg.schedule;
  StepOutcome out;

  const auto logits = query_logits(world, cfg, belief);
  const double lambda_q = schedule.at(Module::Query, t);
  out.action = variant.choose_query ? variant.choose_query(t, logits, lambda_q, rng)
                                    : tempered_sample(logits, lambda_q, rng);
  out.observation = out.action;

  out.summary = sample_summary(world, cfg, out.action, schedule.at(Module::Sum, t) * variant.sum_scale, rng);
  out.next_belief =
      apply_update(cfg, belief, out.summary, schedule.at(Module::Update, t) * variant.update_scale, rng);
  return out;
}

std::string belief_string(const Belief& b) {
  std::string s(b.size(), '0');
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] != 0) s[i] = '1';
  }
  return s;
}

json to_json(const TrajectoryRecord& r) {
  json beliefs = json::array();
  for (const auto& b : r.beliefs) beliefs.push_back(belief_string(b));
  return json{{"seed", r.seed},           {"beliefs", beliefs},     {"actions", r.actions},
              {"observations", r.observations}, {"summaries", r.summaries}, {"citations", r.citations},
              {"answer", r.answer}};
}

TrajectoryRecord run_trajectory(const WorldSpec& world, const PolicyConfig& cfg, std::uint64_t seed,
                                const StepVariant& variant) {
  Rng rng(seed);
  TrajectoryRecord r;
  r.seed = seed;
  r.beliefs.emplace_back(world.n_findings, 0);
  for (int t = 1; t <= world.horizon; ++t) {
    auto outcome = step(world, r.beliefs.back(), t, cfg, rng, variant);
    r.actions.push_back(outcome.action);
    r.observations.push_back(outcome.observation);
    r.summaries.push_back(std::move(outcome.summary));
    r.beliefs.push_back(std::move(outcome.next_belief));
  }
  r.citations = r.observations;
  std::sort(r.citations.begin(), r.citations.end());
  r.citations.erase(std::unique(r.citations.begin(), r.citations.end()), r.citations.end());
  r.answer = answer_for(world, r.beliefs.back());
  return r;
}

std::vector<TrajectoryRecord> run_ensemble(const WorldSpec& world, const PolicyConfig& cfg, std::size_t n_runs,
                                           std::uint64_t base_seed, const StepVariant& variant,
                                           std::size_t max_workers) {
  if (n_runs < 2) throw InsufficientRuns(n_runs);
  validate(world, cfg);
  std::vector<TrajectoryRecord> runs(n_runs);
  parallel_for(n_runs, max_workers,
               [&](std::size_t i) { runs[i] = run_trajectory(world, cfg, run_seed(base_seed, i), variant); });
  return runs;
}

std::vector<OutputVector> finding_vectors(const WorldSpec& world, std::span<const TrajectoryRecord> runs) {
  std::vector<OutputVector> out;
  for (const auto& r : runs) {
    auto v = OutputVector::zeros(Level::Finding, world.n_findings);
    const auto& b = r.beliefs.back();
    for (std::size_t f = 0; f < b.size(); ++f) v.entries[f] = b[f] != 0 ? 1.0 : 0.0;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<OutputVector> citation_vectors(const WorldSpec& world, std::span<const TrajectoryRecord> runs) {
  std::vector<OutputVector> out;
  for (const auto& r : runs) out.push_back(OutputVector::indicator(Level::Citation, r.citations, world.queries.size()));
  return out;
}

std::vector<OutputVector> answer_vectors(const WorldSpec& world, std::span<const TrajectoryRecord> runs) {
  std::vector<OutputVector> out;
  for (const auto& r : runs) out.push_back(OutputVector::one_hot(answer_index(world, r.answer), world.answers.size() + 1));
  return out;
}

EnsembleMetrics measure(const WorldSpec& world, std::span<const TrajectoryRecord> runs) {
  EnsembleMetrics m;
  m.answer = summarize(answer_vectors(world, runs));
  m.finding = summarize(finding_vectors(world, runs));
  m.citation = summarize(citation_vectors(world, runs));
  const auto correct = std::count_if(runs.begin(), runs.end(), [&](const TrajectoryRecord& r) {
    return !world.gold_answer.empty() && r.answer == world.gold_answer;
  });
  m.accuracy = static_cast<double>(correct) / static_cast<double>(runs.size());
  return m;
}

std::vector<AblationCell> ablation_grid(const WorldSpec& world, const PolicyConfig& base_cfg,
                                        std::span<const Module> modules, std::span<const int> steps,
                                        std::span<const double> lambdas, std::size_t n_runs,
                                        std::uint64_t base_seed, std::size_t max_workers) {
  std::vector<AblationCell> cells;
  for (double lambda : lambdas) {
    for (int s : steps) {
      for (auto m : modules) {
        PolicyConfig cfg = base_cfg;
        cfg.schedule = TemperatureSchedule(world.horizon);
        cfg.schedule.set(m, s, lambda);
        auto runs = run_ensemble(world, cfg, n_runs, base_seed, {}, max_workers);
        auto metrics = measure(world, runs);
        cells.push_back(AblationCell{lambda, s, m, metrics, std::move(runs)});
      }
    }
  }
  return cells;
}

}  // namespace runvar::sim
