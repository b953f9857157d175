#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <doctest.h>

#include "runvar/error.hpp"
#include "runvar/mitigation.hpp"

using namespace runvar;
using namespace runvar::sim;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string payload() { return read_file(RUNVAR_TEST_DATA "/reasoning_payload.txt"); }

std::string violation_path(const std::string& raw) {
  try {
    validate_structured(raw, reasoning_schema());
  } catch (const SchemaViolation& e) {
    return e.path();
  }
  return "<none>";
}

double entropy(const std::map<std::size_t, int>& counts, int n) {
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = c / double(n);
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

TEST_CASE("reasoning payload parses") {
  const auto r = parse_reasoning(payload());
  CHECK(r.established_facts.empty());
  REQUIRE(r.open_questions.size() == 3);
  CHECK(r.next_search_directions.size() == 4);
  CHECK(r.contradictions_or_uncertainties.size() == 3);
  CHECK(r.open_questions[0].starts_with("Which countries were in the top 10"));
  CHECK(r.next_search_directions[3] == "Filter countries with gun homicide rates less than 0.20 per 100,000 in both years.");
}

TEST_CASE("reasoning round trip") {
  const auto r = parse_reasoning(payload());
  const auto again = parse_reasoning(to_json(r).dump());
  CHECK(again == r);
  CHECK(parse_reasoning("<reasoning>" + to_json(r).dump() + "</reasoning>") == r);
}

TEST_CASE("schema violations carry the field path") {
  auto j = to_json(parse_reasoning(payload()));
  auto missing = j;
  missing.erase("open_questions");
  CHECK(violation_path(missing.dump()) == "open_questions");

  auto extra = j;
  extra["notes"] = nlohmann::json::array();
  CHECK(violation_path(extra.dump()) == "notes");

  auto wrong = j;
  wrong["next_search_directions"][1] = 7;
  CHECK(violation_path(wrong.dump()).starts_with("next_search_directions"));

  CHECK_THROWS_AS(parse_reasoning("not json at all"), Error);
}

TEST_CASE("normalize_query_key") {
  CHECK(normalize_query_key("  Global  Peace\tIndex ") == "global peace index");
  CHECK(normalize_query_key("GPI 2023") == normalize_query_key("gpi   2023"));
}

TEST_CASE("intersect_queries") {
  CHECK(intersect_queries({{"a", "b", "c"}, {"c", "B"}, {"b", "c", "d"}}) == std::vector<std::string>{"b", "c"});
  CHECK(intersect_queries({{"x", "y"}, {"z"}}) == std::vector<std::string>{"x", "y"});
  CHECK(intersect_queries({{"Only One"}}) == std::vector<std::string>{"only one"});
  CHECK(intersect_queries({{"a", "b", "c"}, {"b", "c", "d"}, {"c", "e"}}) == std::vector<std::string>{"c"});
  CHECK(intersect_queries({{"a"}, {"b"}}) == std::vector<std::string>{"a"});
  CHECK(intersect_queries({{"a", "b"}}) == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(intersect_queries({}), NoProposals);
}

TEST_CASE("intersection is commutative and associative when non-empty") {
  std::mt19937_64 gen(12);
  std::bernoulli_distribution bit(0.7);
  const std::vector<std::string> universe{"a", "b", "c", "d", "e", "f"};
  auto random_set = [&] {
    std::vector<std::string> out{"a"};  // keeps the intersection non-empty
    for (std::size_t i = 1; i < universe.size(); ++i) {
      if (bit(gen)) out.push_back(universe[i]);
    }
    std::shuffle(out.begin(), out.end(), gen);
    return out;
  };
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_set(), y = random_set(), z = random_set();
    const auto xyz = sorted(intersect_queries({x, y, z}));
    CHECK(sorted(intersect_queries({z, x, y})) == xyz);
    CHECK(sorted(intersect_queries({intersect_queries({x, y}), z})) == xyz);
    CHECK(sorted(intersect_queries({x, intersect_queries({y, z})})) == xyz);
  }
}

TEST_CASE("ensemble_size decays and stays at one") {
  const EnsembleSchedule def;
  CHECK(ensemble_size(1, def) == 3);
  CHECK(ensemble_size(2, def) == 2);
  CHECK(ensemble_size(3, def) == 1);
  CHECK(ensemble_size(9, def) == 1);
  for (int n0 = 1; n0 <= 6; ++n0) {
    const EnsembleSchedule s{n0, {}};
    for (int t = 1; t < 10; ++t) CHECK(ensemble_size(t + 1, s) <= ensemble_size(t, s));
  }
  const EnsembleSchedule explicit_sizes{3, {4, 2}};
  CHECK(ensemble_size(1, explicit_sizes) == 4);
  CHECK(ensemble_size(2, explicit_sizes) == 2);
  CHECK(ensemble_size(3, explicit_sizes) == 1);
  CHECK_THROWS_AS(ensemble_size(0, def), ConfigError);

  CHECK_NOTHROW(validate(explicit_sizes));
  CHECK_THROWS_AS(validate(EnsembleSchedule{3, {2, 3}}), ConfigError);
  CHECK_THROWS_AS(validate(EnsembleSchedule{0, {}}), ConfigError);
}

TEST_CASE("config validation") {
  const auto s = reference_scenario();
  MitigationConfig c;
  CHECK_NOTHROW(validate(c, s.world));
  c.gamma = 0.0;
  CHECK_THROWS_AS(validate(c, s.world), ConfigError);
  c.gamma = 1.5;
  CHECK_THROWS_AS(validate(c, s.world), ConfigError);
}

TEST_CASE("single member ensemble at gamma one reproduces the baseline") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(1.0);
  MitigationConfig c;
  c.gamma = 1.0;
  c.schedule = EnsembleSchedule{1, {}};
  const auto base = run_ensemble(s.world, s.policy, 12, 8);
  const auto mitigated = run_mitigated_ensemble(s.world, s.policy, c, 12, 8);
  CHECK(base == mitigated);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(to_json(base[i]).dump() == to_json(mitigated[i]).dump());
}

TEST_CASE("consensus lowers the entropy of the query draw") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(1.0);
  const Belief empty(s.world.n_findings, 0);
  const auto draws = [&](int n0) {
    MitigationConfig c;
    c.structured_sum = c.structured_update = false;
    c.schedule = EnsembleSchedule{n0, {}};
    std::map<std::size_t, int> counts;
    Rng rng(31);
    for (int i = 0; i < 4000; ++i) ++counts[mitigated_step(s.world, empty, 1, s.policy, c, rng).action];
    return entropy(counts, 4000);
  };
  const double h1 = draws(1);
  CHECK(draws(2) < h1);
  CHECK(draws(3) < h1);
}

TEST_CASE("larger fixed ensembles do not raise variance") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(1.0);
  std::vector<double> mean_tv;
  for (int k = 1; k <= 3; ++k) {
    MitigationConfig c;
    c.structured_sum = c.structured_update = false;
    c.schedule = EnsembleSchedule{k, {k, k, k}};
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      sum += measure(s.world, run_mitigated_ensemble(s.world, s.policy, c, 20, 100 + seed)).average_tv();
    }
    mean_tv.push_back(sum / 50);
  }
  CAPTURE(mean_tv[0]);
  CAPTURE(mean_tv[1]);
  CAPTURE(mean_tv[2]);
  CHECK(mean_tv[1] <= mean_tv[0]);
  CHECK(mean_tv[2] <= mean_tv[1]);
}

TEST_CASE("structured stages lower final-output variance") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(1.0);
  const auto base = measure(s.world, run_ensemble(s.world, s.policy, 40, 2));
  MitigationConfig c;
  c.query_intersection = false;
  const auto structured = measure(s.world, run_mitigated_ensemble(s.world, s.policy, c, 40, 2));
  CHECK(structured.finding.tv < base.finding.tv);
}
