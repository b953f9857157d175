#include <fmt/format.h>

#include "runvar/error.hpp"
#include "runvar/sim.hpp"

namespace runvar::sim {

using nlohmann::json;

namespace {

Document block_document(std::size_t index, std::size_t width, std::size_t n_distractors) {
  Document d;
  for (std::size_t k = 0; k < width; ++k) d.findings.push_back(index * width + k);
  for (std::size_t k = 0; k < n_distractors; ++k) d.distractors.push_back(fmt::format("noise-{}-{}", index, k));
  return d;
}

std::vector<std::size_t> block(std::size_t index, std::size_t width) {
  return block_document(index, width, 0).findings;
}

}  // namespace

Scenario reference_scenario() {
  constexpr std::size_t kQueries = 8;
  constexpr std::size_t kWidth = 4;
  Scenario s;
  auto& w = s.world;
  w.n_findings = kQueries * kWidth;
  w.horizon = 3;
  for (std::size_t q = 0; q < kQueries; ++q) {
    w.queries.push_back(Query{fmt::format("topic {}", q), block_document(q, kWidth, 2)});
  }
  w.answers = {{"alpha", block(2, kWidth)}, {"beta", block(5, kWidth)}, {"gamma", block(7, kWidth)}};
  w.gold_answer = "alpha";

  auto& p = s.policy;
  // Three chains, 0 -> 1 -> 2, 3 -> 4 -> 5 and 6 -> 7: holding a document's
  // facts raises the logit of its successor.
  p.query_logits = {2.5, 0.0, 0.0, 1.5, 0.0, 0.0, 1.5, 0.0};
  p.query_affinity.assign(kQueries, std::vector<double>(w.n_findings, 0.0));
  const std::pair<std::size_t, std::size_t> links[] = {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {6, 7}};
  for (auto [from, to] : links) {
    for (auto f : block(from, kWidth)) p.query_affinity[to][f] = 1.0;
  }
  p.coverage_penalty = -2.0;
  p.inclusion_logits.assign(w.n_findings, 1.0);
  p.flip_logits.assign(w.n_findings, -1.0);
  p.schedule = TemperatureSchedule(w.horizon);
  return s;
}

Scenario tiny_scenario() {
  Scenario s;
  auto& w = s.world;
  w.n_findings = 4;
  w.horizon = 2;
  w.queries = {Query{"first", Document{{0, 1, 2}, {"noise-0"}}}, Query{"second", Document{{1, 2, 3}, {"noise-1"}}}};
  w.answers = {{"x", {0, 3}}, {"y", {1, 2}}};
  w.gold_answer = "x";

  auto& p = s.policy;
  p.query_logits = {0.5, 0.0};
  p.query_affinity = {{0.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}};
  p.inclusion_logits.assign(4, 1.0);
  p.flip_logits.assign(4, -1.0);
  p.schedule = TemperatureSchedule(w.horizon);
  p.schedule.set_all(0.7);
  return s;
}

Scenario random_tiny_scenario(std::uint64_t seed) {
  Rng rng(seed);
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); };
  auto real = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  Scenario s;
  auto& w = s.world;
  w.n_findings = static_cast<std::size_t>(pick(2, 5));
  w.horizon = pick(1, 3);
  const int n_queries = pick(1, 3);
  for (int q = 0; q < n_queries; ++q) {
    Document d;
    for (std::size_t f = 0; f < w.n_findings; ++f) {
      if (rng.uniform() < 0.6) d.findings.push_back(f);
    }
    if (d.findings.empty()) d.findings.push_back(static_cast<std::size_t>(pick(0, static_cast<int>(w.n_findings) - 1)));
    w.queries.push_back(Query{fmt::format("q{}", q), std::move(d)});
  }
  w.answers = {{"a", {0}}, {"b", {w.n_findings - 1}}};
  w.gold_answer = "a";

  auto& p = s.policy;
  for (int q = 0; q < n_queries; ++q) p.query_logits.push_back(real(-1.0, 1.0));
  p.query_affinity.assign(static_cast<std::size_t>(n_queries), std::vector<double>(w.n_findings));
  for (auto& row : p.query_affinity) {
    for (double& x : row) x = real(-1.0, 1.0);
  }
  for (std::size_t f = 0; f < w.n_findings; ++f) {
    p.inclusion_logits.push_back(real(-1.5, 1.5));
    p.flip_logits.push_back(real(-2.0, 0.0));
  }
  p.schedule = TemperatureSchedule(w.horizon);
  for (auto m : kModules) {
    for (int t = 1; t <= w.horizon; ++t) p.schedule.set(m, t, rng.uniform() < 0.3 ? 0.0 : real(0.1, 2.0));
  }
  p.seed = seed;
  return s;
}

// ---------------------------------------------------------------------------

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + "." + key, "missing field");
  return *it;
}

template <class T>
T as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where, "unexpected type " + std::string(j.type_name()));
  }
}

/// A number applies to every element; an array must have exactly `n` values.
std::vector<double> per_item(const json& j, std::size_t n, const std::string& where) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  auto v = as<std::vector<double>>(j, where);
  if (v.size() != n) throw ConfigError(where, fmt::format("expected {} values, got {}", n, v.size()));
  return v;
}

}  // namespace

json to_json(const WorldSpec& w) {
  json queries = json::array();
  for (const auto& q : w.queries) {
    queries.push_back(json{{"text", q.text}, {"findings", q.document.findings}, {"distractors", q.document.distractors}});
  }
  json answers = json::array();
  for (const auto& a : w.answers) answers.push_back(json{{"label", a.label}, {"key_findings", a.key_findings}});
  return json{{"n_findings", w.n_findings}, {"horizon", w.horizon},         {"queries", queries},
              {"answers", answers},         {"gold_answer", w.gold_answer}};
}

json to_json(const TemperatureSchedule& s) {
  json out = json::object();
  for (auto m : kModules) {
    std::vector<double> row;
    for (int t = 1; t <= s.horizon(); ++t) row.push_back(s.at(m, t));
    out[std::string(to_string(m))] = row;
  }
  return out;
}

json to_json(const PolicyConfig& p) {
  return json{{"query_logits", p.query_logits},         {"query_affinity", p.query_affinity},
              {"coverage_penalty", p.coverage_penalty}, {"inclusion_logits", p.inclusion_logits},
              {"flip_logits", p.flip_logits},           {"schedule", to_json(p.schedule)},
              {"seed", p.seed}};
}

WorldSpec world_from_json(const json& j, const std::string& where) {
  WorldSpec w;
  w.n_findings = as<std::size_t>(require(j, "n_findings", where), where + ".n_findings");
  if (j.contains("horizon")) w.horizon = as<int>(j["horizon"], where + ".horizon");
  const auto& queries = require(j, "queries", where);
  if (!queries.is_array()) throw ConfigError(where + ".queries", "expected an array");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto path = fmt::format("{}.queries[{}]", where, i);
    Query q;
    q.text = as<std::string>(require(queries[i], "text", path), path + ".text");
    q.document.findings = as<std::vector<std::size_t>>(require(queries[i], "findings", path), path + ".findings");
    if (queries[i].contains("distractors")) {
      q.document.distractors = as<std::vector<std::string>>(queries[i]["distractors"], path + ".distractors");
    }
    w.queries.push_back(std::move(q));
  }
  if (j.contains("answers")) {
    const auto& answers = j["answers"];
    if (!answers.is_array()) throw ConfigError(where + ".answers", "expected an array");
    for (std::size_t i = 0; i < answers.size(); ++i) {
      const auto path = fmt::format("{}.answers[{}]", where, i);
      w.answers.push_back(AnswerCandidate{as<std::string>(require(answers[i], "label", path), path + ".label"),
                                          as<std::vector<std::size_t>>(require(answers[i], "key_findings", path),
                                                                       path + ".key_findings")});
    }
  }
  if (j.contains("gold_answer")) w.gold_answer = as<std::string>(j["gold_answer"], where + ".gold_answer");
  return w;
}

TemperatureSchedule schedule_from_json(const json& j, int horizon, const std::string& where) {
  TemperatureSchedule s(horizon);
  if (j.is_number()) {
    s.set_all(j.get<double>());
    return s;
  }
  if (!j.is_object()) throw ConfigError(where, "expected a number or an object keyed by module");
  for (const auto& [key, value] : j.items()) {
    const auto path = where + "." + key;
    Module m;
    try {
      m = module_from_string(key);
    } catch (const ConfigError&) {
      throw ConfigError(path, "unknown module (expected query, sum or update)");
    }
    const auto row = per_item(value, static_cast<std::size_t>(horizon), path);
    for (int t = 1; t <= horizon; ++t) {
      try {
        s.set(m, t, row[static_cast<std::size_t>(t - 1)]);
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}[{}]", path, t - 1), e.what());
      }
    }
  }
  return s;
}

PolicyConfig policy_from_json(const json& j, const WorldSpec& world, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  PolicyConfig p;
  p.query_logits = per_item(require(j, "query_logits", where), world.queries.size(), where + ".query_logits");
  if (j.contains("query_affinity")) {
    p.query_affinity = as<std::vector<std::vector<double>>>(j["query_affinity"], where + ".query_affinity");
  }
  if (j.contains("coverage_penalty")) p.coverage_penalty = as<double>(j["coverage_penalty"], where + ".coverage_penalty");
  p.inclusion_logits = per_item(require(j, "inclusion_logits", where), world.n_findings, where + ".inclusion_logits");
  p.flip_logits = per_item(require(j, "flip_logits", where), world.n_findings, where + ".flip_logits");
  p.schedule = j.contains("schedule") ? schedule_from_json(j["schedule"], world.horizon, where + ".schedule")
                                      : TemperatureSchedule(world.horizon);
  if (j.contains("seed")) p.seed = as<std::uint64_t>(j["seed"], where + ".seed");
  validate(world, p);
  return p;
}

}  // namespace runvar::sim
