#include <cmath>
#include <filesystem>
#include <set>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "runvar/error.hpp"
#include "runvar/fixtures.hpp"
#include "runvar/harness.hpp"

namespace runvar {

using nlohmann::json;

namespace {

constexpr std::string_view kModeNames[] = {"evaluate", "simulate", "decompose", "ablate", "mitigate", "aggregate"};

template <class T>
T get(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "unexpected type " + std::string(j.type_name()));
  }
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "$" : where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (allowed.contains(key)) continue;
    std::string valid;
    for (const auto& a : allowed) valid += (valid.empty() ? "" : ", ") + a;
    throw ConfigError(where.empty() ? key : where + "." + key, "unknown field; valid fields are " + valid);
  }
}

template <class T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  if (auto it = j.find(key); it != j.end()) out = get<T>(*it, where.empty() ? key : where + "." + key);
}

void check_lambda(double lambda, const std::string& path) {
  if (!std::isfinite(lambda) || lambda < 0.0) throw ConfigError(path, "temperature must be finite and >= 0");
}

int step_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "combined") return sim::kCombined;
    throw ConfigError(path, "expected a step number or \"combined\"");
  }
  return get<int>(j, path);
}

void load_world(const json& j, RunConfig& c) {
  sim::Scenario scenario;
  const json world = j.value("world", json("reference"));
  if (world.is_string()) {
    c.world_name = world.get<std::string>();
    if (c.world_name == "reference") {
      scenario = sim::reference_scenario();
    } else if (c.world_name == "tiny") {
      scenario = sim::tiny_scenario();
    } else {
      throw ConfigError("world", "unknown world '" + c.world_name + "'; use reference, tiny or an object");
    }
    if (j.contains("policy")) scenario.policy = sim::policy_from_json(j["policy"], scenario.world);
  } else {
    c.world_name = "custom";
    scenario.world = sim::world_from_json(world);
    if (!j.contains("policy")) throw ConfigError("policy", "a custom world needs a policy");
    scenario.policy = sim::policy_from_json(j["policy"], scenario.world);
  }
  if (j.contains("temperature")) {
    scenario.policy.schedule = sim::schedule_from_json(j["temperature"], scenario.world.horizon, "temperature");
  }
  scenario.policy.seed = c.seed;
  sim::validate(scenario.world, scenario.policy);
  c.world = std::move(scenario.world);
  c.policy = std::move(scenario.policy);
}

void load_judge(const json& j, JudgeSettings& s) {
  check_keys(j, "judge", {"endpoint", "model", "timeout_ms", "max_retries", "max_in_flight", "token_env"});
  read(j, "endpoint", "judge", s.endpoint);
  read(j, "model", "judge", s.model);
  if (j.contains("timeout_ms")) s.timeout = std::chrono::milliseconds(get<long>(j["timeout_ms"], "judge.timeout_ms"));
  read(j, "max_retries", "judge", s.max_retries);
  read(j, "max_in_flight", "judge", s.max_in_flight);
  read(j, "token_env", "judge", s.token_env);
  if (s.endpoint.empty()) throw ConfigError("judge.endpoint", "must not be empty");
  if (s.max_in_flight < 1) throw ConfigError("judge.max_in_flight", "must be at least 1");
  if (s.max_retries < 0) throw ConfigError("judge.max_retries", "must be >= 0");
  if (s.timeout.count() <= 0) throw ConfigError("judge.timeout_ms", "must be positive");
}

void load_ablation(const json& j, const RunConfig& c, AblationSettings& a) {
  check_keys(j, "ablation", {"modules", "steps", "lambdas"});
  if (j.contains("modules")) {
    a.modules.clear();
    const auto names = get<std::vector<std::string>>(j["modules"], "ablation.modules");
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        a.modules.push_back(sim::module_from_string(names[i]));
      } catch (const ConfigError&) {
        throw ConfigError(fmt::format("ablation.modules[{}]", i), "unknown module (expected query, sum or update)");
      }
    }
  }
  if (j.contains("steps")) {
    if (!j["steps"].is_array()) throw ConfigError("ablation.steps", "expected an array");
    a.steps.clear();
    for (std::size_t i = 0; i < j["steps"].size(); ++i) {
      a.steps.push_back(step_from_json(j["steps"][i], fmt::format("ablation.steps[{}]", i)));
    }
  }
  read(j, "lambdas", "ablation", a.lambdas);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    if (a.steps[i] < 0 || a.steps[i] > c.world.horizon) {
      throw ConfigError(fmt::format("ablation.steps[{}]", i), fmt::format("step outside 1..{}", c.world.horizon));
    }
  }
  for (std::size_t i = 0; i < a.lambdas.size(); ++i) check_lambda(a.lambdas[i], fmt::format("ablation.lambdas[{}]", i));
  if (a.modules.empty() || a.steps.empty() || a.lambdas.empty()) {
    throw ConfigError("ablation", "modules, steps and lambdas must be non-empty");
  }
}

void load_decompose(const json& j, const RunConfig& c, DecomposeSettings& d) {
  check_keys(j, "decompose", {"method", "steps", "n_outer", "n_inner", "outcome_limit"});
  if (j.contains("method")) {
    const auto m = get<std::string>(j["method"], "decompose.method");
    if (m == "exact") d.method = DecompositionMethod::ExactEnumeration;
    else if (m == "monte_carlo") d.method = DecompositionMethod::MonteCarlo;
    else throw ConfigError("decompose.method", "expected exact or monte_carlo");
  }
  read(j, "steps", "decompose", d.steps);
  read(j, "n_outer", "decompose", d.n_outer);
  read(j, "n_inner", "decompose", d.n_inner);
  read(j, "outcome_limit", "decompose", d.outcome_limit);
  if (d.steps.empty()) {
    for (int t = 0; t < c.world.horizon; ++t) d.steps.push_back(t);
  }
  for (std::size_t i = 0; i < d.steps.size(); ++i) {
    if (d.steps[i] < 0 || d.steps[i] >= c.world.horizon) {
      throw ConfigError(fmt::format("decompose.steps[{}]", i), fmt::format("step outside 0..{}", c.world.horizon - 1));
    }
  }
  if (d.method == DecompositionMethod::MonteCarlo) {
    if (d.n_outer < 2) throw ConfigError("decompose.n_outer", "must be at least 2");
    if (d.n_inner < 2) throw ConfigError("decompose.n_inner", "must be at least 2");
  } else if (c.world.n_findings > 64) {
    throw ConfigError("decompose.method", "exact enumeration supports at most 64 findings");
  }
}

void load_mitigate(const json& j, const RunConfig& c, MitigateSettings& m) {
  check_keys(j, "mitigate", {"lambda", "gamma", "n0", "sizes", "proposal_size", "query_intersection",
                             "structured_sum", "structured_update"});
  read(j, "lambda", "mitigate", m.lambda);
  read(j, "gamma", "mitigate", m.config.gamma);
  read(j, "n0", "mitigate", m.config.schedule.n0);
  read(j, "sizes", "mitigate", m.config.schedule.sizes);
  read(j, "proposal_size", "mitigate", m.config.proposal_size);
  read(j, "query_intersection", "mitigate", m.config.query_intersection);
  read(j, "structured_sum", "mitigate", m.config.structured_sum);
  read(j, "structured_update", "mitigate", m.config.structured_update);
  check_lambda(m.lambda, "mitigate.lambda");
  try {
    validate(m.config, c.world);
  } catch (const ConfigError& e) {
    throw ConfigError("mitigate." + e.path(), e.what());
  }
}

void load_aggregate(const json& j, AggregateSettings& a) {
  check_keys(j, "aggregate", {"input", "group_by"});
  read(j, "input", "aggregate", a.input);
  read(j, "group_by", "aggregate", a.group_by);
  if (a.input.empty()) throw ConfigError("aggregate.input", "missing results path or fixture:<name>");
  if (a.input.starts_with("fixture:")) {
    try {
      fixture_csv(std::string_view(a.input).substr(8));
    } catch (const ConfigError& e) {
      throw ConfigError("aggregate.input", e.what());
    }
  } else if (!std::filesystem::exists(a.input)) {
    throw ConfigError("aggregate.input", "file not found: " + a.input);
  }
}

}  // namespace

std::string_view to_string(Mode mode) { return kModeNames[static_cast<int>(mode)]; }

Mode mode_from_string(std::string_view s) {
  for (int i = 0; i < 6; ++i) {
    if (kModeNames[i] == s) return static_cast<Mode>(i);
  }
  throw ConfigError("mode", "unknown mode '" + std::string(s) + "'");
}

RunConfig config_from_json(const json& j, Mode mode) {
  check_keys(j, "", {"mode", "reports", "judge", "world", "policy", "temperature", "n_runs", "seed", "out",
                     "max_workers", "ablation", "decompose", "mitigate", "aggregate"});
  RunConfig c;
  c.mode = mode;
  if (j.contains("mode") && mode_from_string(get<std::string>(j["mode"], "mode")) != mode) {
    throw ConfigError("mode", "config is for '" + j["mode"].get<std::string>() + "', not '" +
                                  std::string(to_string(mode)) + "'");
  }
  read(j, "seed", "", c.seed);
  read(j, "n_runs", "", c.n_runs);
  read(j, "out", "", c.out_dir);
  read(j, "max_workers", "", c.max_workers);
  read(j, "reports", "", c.reports);
  if (j.contains("judge")) load_judge(j["judge"], c.judge);

  switch (mode) {
    case Mode::Evaluate:
      if (c.reports.empty()) throw ConfigError("reports", "missing report file path");
      if (!std::filesystem::exists(c.reports)) throw ConfigError("reports", "file not found: " + c.reports);
      break;
    case Mode::Aggregate:
      load_aggregate(j.value("aggregate", json::object()), c.aggregate);
      break;
    default:
      load_world(j, c);
      if (mode != Mode::Decompose && c.n_runs < 2) throw ConfigError("n_runs", "at least 2 runs are required");
      if (mode == Mode::Ablate) load_ablation(j.value("ablation", json::object()), c, c.ablation);
      if (mode == Mode::Decompose) load_decompose(j.value("decompose", json::object()), c, c.decompose);
      if (mode == Mode::Mitigate) load_mitigate(j.value("mitigate", json::object()), c, c.mitigate);
  }
  if (c.out_dir.empty()) throw ConfigError("out", "must not be empty");
  return c;
}

json to_json(const RunConfig& c) {
  json j{{"mode", to_string(c.mode)}, {"seed", c.seed}};
  switch (c.mode) {
    case Mode::Evaluate:
      j["reports"] = c.reports;
      j["judge"] = json{{"endpoint", c.judge.endpoint}, {"model", c.judge.model}};
      return j;
    case Mode::Aggregate:
      j["aggregate"] = json{{"input", c.aggregate.input}, {"group_by", c.aggregate.group_by}};
      return j;
    default:
      break;
  }
  j["world_name"] = c.world_name;
  j["world"] = sim::to_json(c.world);
  j["policy"] = sim::to_json(c.policy);
  if (c.mode != Mode::Decompose) j["n_runs"] = c.n_runs;
  if (c.mode == Mode::Ablate) {
    std::vector<std::string> modules;
    for (auto m : c.ablation.modules) modules.emplace_back(sim::to_string(m));
    j["ablation"] = json{{"modules", modules}, {"steps", c.ablation.steps}, {"lambdas", c.ablation.lambdas}};
  }
  if (c.mode == Mode::Decompose) {
    const auto& d = c.decompose;
    j["decompose"] = json{{"method", d.method == DecompositionMethod::ExactEnumeration ? "exact" : "monte_carlo"},
                          {"steps", d.steps},
                          {"n_outer", d.n_outer},
                          {"n_inner", d.n_inner},
                          {"outcome_limit", d.outcome_limit}};
  }
  if (c.mode == Mode::Mitigate) {
    const auto& m = c.mitigate;
    j["mitigate"] = json{{"lambda", m.lambda},
                         {"gamma", m.config.gamma},
                         {"n0", m.config.schedule.n0},
                         {"sizes", m.config.schedule.sizes},
                         {"proposal_size", m.config.proposal_size},
                         {"query_intersection", m.config.query_intersection},
                         {"structured_sum", m.config.structured_sum},
                         {"structured_update", m.config.structured_update}};
  }
  return j;
}

std::string config_hash(const RunConfig& config) {
  const auto text = to_json(config).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < 8 && i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace runvar
