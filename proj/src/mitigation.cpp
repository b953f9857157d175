#include "runvar/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "runvar/error.hpp"
#include "runvar/parallel.hpp"
#include "runvar/text.hpp"

namespace runvar {

using nlohmann::json;

const SchemaDescriptor& reasoning_schema() {
  static const SchemaDescriptor schema{
      "reasoning",
      "1",
      SchemaShape::Object,
      {{"established_facts", FieldType::StringArray, true},
       {"open_questions", FieldType::StringArray, true},
       {"next_search_directions", FieldType::StringArray, true},
       {"contradictions_or_uncertainties", FieldType::StringArray, true}},
  };
  return schema;
}

namespace {

std::string_view strip_wrapper(std::string_view raw) {
  static const std::regex wrapper_re(R"(^\s*<([A-Za-z_][\w-]*)>([\s\S]*)</\1>\s*$)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_match(raw.begin(), raw.end(), m, wrapper_re)) {
    return raw.substr(static_cast<std::size_t>(m.position(2)), static_cast<std::size_t>(m.length(2)));
  }
  return raw;
}

std::optional<json> try_parse(std::string_view s) {
  json j = json::parse(s, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

}  // namespace

json validate_structured(std::string_view raw, const SchemaDescriptor& schema) {
  const std::string_view body = text::trim(strip_wrapper(raw));
  auto parsed = try_parse(body);
  if (!parsed) {
    // JSON text that was itself escaped as a string body: {\n  \"a\": ...}
    if (auto unescaped = try_parse("\"" + std::string(body) + "\""); unescaped && unescaped->is_string()) {
      parsed = try_parse(unescaped->get<std::string>());
    }
  }
  if (!parsed) throw SchemaViolation("$", "payload is not valid JSON");
  if (auto issue = find_schema_issue(*parsed, schema)) throw SchemaViolation(issue->path, issue->message);
  return *parsed;
}

ReasoningRecord parse_reasoning(std::string_view raw) {
  const auto j = validate_structured(raw, reasoning_schema());
  return ReasoningRecord{
      j.at("established_facts").get<std::vector<std::string>>(),
      j.at("open_questions").get<std::vector<std::string>>(),
      j.at("next_search_directions").get<std::vector<std::string>>(),
      j.at("contradictions_or_uncertainties").get<std::vector<std::string>>(),
  };
}

json to_json(const ReasoningRecord& r) {
  return json{{"established_facts", r.established_facts},
              {"open_questions", r.open_questions},
              {"next_search_directions", r.next_search_directions},
              {"contradictions_or_uncertainties", r.contradictions_or_uncertainties}};
}

std::string normalize_query_key(std::string_view query) { return text::normalize(query); }

std::vector<std::string> intersect_queries(const std::vector<std::vector<std::string>>& query_sets) {
  if (query_sets.empty()) throw NoProposals();
  std::vector<std::string> first;
  for (const auto& q : query_sets.front()) {
    auto key = normalize_query_key(q);
    if (std::find(first.begin(), first.end(), key) == first.end()) first.push_back(std::move(key));
  }
  std::vector<std::string> common = first;
  for (std::size_t i = 1; i < query_sets.size(); ++i) {
    std::set<std::string> keys;
    for (const auto& q : query_sets[i]) keys.insert(normalize_query_key(q));
    std::erase_if(common, [&](const std::string& k) { return !keys.contains(k); });
  }
  return common.empty() ? first : common;
}

int ensemble_size(int t, const EnsembleSchedule& schedule) {
  if (t < 1) throw ConfigError("ensemble.step", "steps start at 1");
  if (!schedule.sizes.empty()) {
    return t <= static_cast<int>(schedule.sizes.size()) ? schedule.sizes[static_cast<std::size_t>(t - 1)] : 1;
  }
  return std::max(1, schedule.n0 - (t - 1));
}

void validate(const EnsembleSchedule& schedule) {
  if (schedule.n0 < 1) throw ConfigError("mitigation.n0", "must be at least 1");
  for (std::size_t i = 0; i < schedule.sizes.size(); ++i) {
    const auto path = fmt::format("mitigation.sizes[{}]", i);
    if (schedule.sizes[i] < 1) throw ConfigError(path, "must be at least 1");
    if (i > 0 && schedule.sizes[i] > schedule.sizes[i - 1]) throw ConfigError(path, "sizes must not increase");
  }
}

void validate(const MitigationConfig& config, const sim::WorldSpec& world) {
  validate(config.schedule);
  if (!(config.gamma > 0.0 && config.gamma <= 1.0)) throw ConfigError("mitigation.gamma", "must be in (0, 1]");
  if (config.proposal_size < 1) throw ConfigError("mitigation.proposal_size", "must be at least 1");
  std::set<std::string> keys;
  for (std::size_t q = 0; q < world.queries.size(); ++q) {
    if (!keys.insert(normalize_query_key(world.queries[q].text)).second) {
      throw ConfigError(fmt::format("world.queries[{}].text", q), "normalized query texts must be unique");
    }
  }
}

namespace {

/// The first `size` queries of a Plackett-Luce draw: repeated tempered draws
/// without replacement.
std::vector<std::size_t> draw_proposal(std::span<const double> logits, double lambda, std::size_t size,
                                       sim::Rng& rng) {
  std::vector<double> remaining(logits.begin(), logits.end());
  std::vector<std::size_t> picked;
  size = std::min(size, remaining.size());
  while (picked.size() < size) {
    const auto i = sim::tempered_sample(remaining, lambda, rng);
    picked.push_back(i);
    remaining[i] = -std::numeric_limits<double>::infinity();
  }
  return picked;
}

}  // namespace

sim::StepVariant mitigation_variant(const sim::WorldSpec& world, const MitigationConfig& config) {
  validate(config, world);
  sim::StepVariant variant;
  if (config.structured_sum) variant.sum_scale = config.gamma;
  if (config.structured_update) variant.update_scale = config.gamma;
  if (!config.query_intersection) return variant;

  std::vector<std::string> keys;
  for (const auto& q : world.queries) keys.push_back(normalize_query_key(q.text));
  variant.choose_query = [keys, config](int t, std::span<const double> logits, double lambda, sim::Rng& rng) {
    const int n = ensemble_size(t, config.schedule);
    if (n == 1) return sim::tempered_sample(logits, lambda, rng);
    std::vector<std::vector<std::string>> proposals;
    for (int k = 0; k < n; ++k) {
      auto& proposal = proposals.emplace_back();
      for (auto q : draw_proposal(logits, lambda, config.proposal_size, rng)) proposal.push_back(keys[q]);
    }
    // Among the agreed queries, act on the one the policy itself prefers.
    std::size_t best = keys.size();
    for (const auto& key : intersect_queries(proposals)) {
      const auto q = static_cast<std::size_t>(std::find(keys.begin(), keys.end(), key) - keys.begin());
      if (best == keys.size() || logits[q] > logits[best] || (logits[q] == logits[best] && q < best)) best = q;
    }
    return best;
  };
  return variant;
}

sim::StepOutcome mitigated_step(const sim::WorldSpec& world, const sim::Belief& belief, int t,
                                const sim::PolicyConfig& cfg, const MitigationConfig& config, sim::Rng& rng) {
  return sim::step(world, belief, t, cfg, rng, mitigation_variant(world, config));
}

std::vector<sim::TrajectoryRecord> run_mitigated_ensemble(const sim::WorldSpec& world, const sim::PolicyConfig& cfg,
                                                          const MitigationConfig& config, std::size_t n_runs,
                                                          std::uint64_t base_seed, std::size_t max_workers) {
  return sim::run_ensemble(world, cfg, n_runs, base_seed, mitigation_variant(world, config), max_workers);
}

}  // namespace runvar
