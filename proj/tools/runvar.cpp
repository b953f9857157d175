// runvar: multi-run stochasticity evaluation and simulation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "runvar/error.hpp"
#include "runvar/fixtures.hpp"
#include "runvar/harness.hpp"

using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> out;
  std::optional<std::string> judge_endpoint;
  std::optional<std::size_t> workers;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw runvar::ConfigError("--config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw runvar::ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
}

void apply(const Common& c, json& j) {
  if (c.seed) j["seed"] = *c.seed;
  if (c.runs) j["n_runs"] = *c.runs;
  if (c.out) j["out"] = *c.out;
  if (c.workers) j["max_workers"] = *c.workers;
  if (c.judge_endpoint) j["judge"]["endpoint"] = *c.judge_endpoint;
}

int run(runvar::Mode mode, const Common& common, const std::function<void(json&)>& extra) {
  json j = load_config(common.config_path);
  apply(common, j);
  extra(j);
  const auto config = runvar::config_from_json(j, mode);
  const auto result = runvar::run_command(config);
  std::cout << result.table.to_csv();
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  if (mode != runvar::Mode::Aggregate || common.out) {
    const auto dir = runvar::write_outputs(config, result);
    std::cerr << "wrote " << dir.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure, decompose and reduce run-to-run variance of research agents."};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Base seed for every random draw");
  app.add_option("--runs", common.runs, "Runs per ensemble (default 10)");
  app.add_option("--out", common.out, "Output root directory (default out)");
  app.add_option("--judge-endpoint", common.judge_endpoint,
                 "Chat-completion URL, or 'mock' for the offline judge; the token comes from RUNVAR_JUDGE_TOKEN");
  app.add_option("--workers", common.workers, "Worker threads (default: hardware concurrency)");

  std::optional<std::string> reports;
  auto* evaluate = app.add_subcommand("evaluate", "Score a file of agent reports, one JSON record per run");
  evaluate->add_option("--reports", reports, "Report file (JSON lines)");

  std::optional<std::string> world;
  std::optional<double> lambda;
  auto add_world = [&](CLI::App* sub) {
    sub->add_option("--world", world, "Built-in world: reference or tiny");
    sub->add_option("--lambda", lambda, "Temperature for every module and step");
  };
  auto* simulate = app.add_subcommand("simulate", "Run one simulated ensemble");
  auto* ablate = app.add_subcommand("ablate", "Temperature x step x module grid on the simulator");
  auto* mitigate = app.add_subcommand("mitigate", "Compare mitigation strategies against the baseline");
  auto* decompose = app.add_subcommand("decompose", "Split per-step variance into propagated and intrinsic parts");
  for (auto* sub : {simulate, ablate, mitigate, decompose}) add_world(sub);

  std::optional<std::string> method;
  std::vector<int> steps;
  std::optional<std::size_t> outer, inner;
  decompose->add_option("--method", method, "exact or monte_carlo")->check(CLI::IsMember({"exact", "monte_carlo"}));
  decompose->add_option("--step", steps, "Conditioning step t (repeatable; default all)");
  decompose->add_option("--outer", outer, "Monte Carlo outer samples");
  decompose->add_option("--inner", inner, "Monte Carlo inner samples per group");

  std::optional<std::string> input;
  std::vector<std::string> group_by;
  auto* aggregate = app.add_subcommand("aggregate", "Grouped means of a results table or fixture");
  aggregate->add_option("--input", input, "results.csv path or fixture:<name>");
  aggregate->add_option("--group-by", group_by, "Key column (repeatable or comma-separated)")->delimiter(',');

  std::string fixture_name;
  bool list = false;
  auto* fixture = app.add_subcommand("fixture", "Print a shipped fixture table");
  fixture->add_option("name", fixture_name, "Fixture name");
  fixture->add_flag("--list", list, "List fixture names");

  CLI11_PARSE(app, argc, argv);

  auto with_world = [&](json& j) {
    if (world) j["world"] = *world;
    if (lambda) j["temperature"] = *lambda;
  };
  try {
    if (*evaluate) {
      return run(runvar::Mode::Evaluate, common, [&](json& j) {
        if (reports) j["reports"] = *reports;
      });
    }
    if (*simulate) return run(runvar::Mode::Simulate, common, with_world);
    if (*ablate) return run(runvar::Mode::Ablate, common, with_world);
    if (*mitigate) return run(runvar::Mode::Mitigate, common, with_world);
    if (*decompose) {
      return run(runvar::Mode::Decompose, common, [&](json& j) {
        with_world(j);
        if (method) j["decompose"]["method"] = *method;
        if (!steps.empty()) j["decompose"]["steps"] = steps;
        if (outer) j["decompose"]["n_outer"] = *outer;
        if (inner) j["decompose"]["n_inner"] = *inner;
      });
    }
    if (*aggregate) {
      return run(runvar::Mode::Aggregate, common, [&](json& j) {
        if (input) j["aggregate"]["input"] = *input;
        if (!group_by.empty()) j["aggregate"]["group_by"] = group_by;
      });
    }
    if (*fixture) {
      if (list || fixture_name.empty()) {
        for (const auto& n : runvar::fixture_names()) std::cout << n << "\n";
      } else {
        std::cout << runvar::fixture_csv(fixture_name);
      }
      return 0;
    }
  } catch (const runvar::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
