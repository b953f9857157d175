#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "oracles.hpp"
#include "runvar/error.hpp"
#include "runvar/sim.hpp"

using namespace runvar;
using namespace runvar::sim;

TEST_CASE("tempered_sample at zero temperature is the first argmax") {
  Rng rng(1);
  const std::vector<double> logits{3, 1, 0};
  for (int i = 0; i < 50; ++i) CHECK(tempered_sample(logits, 0.0, rng) == 0);
  const std::vector<double> tied{1, 4, 4};
  CHECK(tempered_sample(tied, 0.0, rng) == 1);
  CHECK(tempered_probabilities(tied, 0.0) == std::vector<double>{0, 1, 0});
  CHECK_THROWS_AS(tempered_sample(std::vector<double>{}, 1.0, rng), EmptyActionSet);
}

TEST_CASE("tempered_sample consumes no randomness at zero temperature") {
  Rng a(9), b(9);
  const std::vector<double> logits{0.2, 0.1};
  for (int i = 0; i < 10; ++i) tempered_sample(logits, 0.0, a);
  CHECK(a.uniform() == b.uniform());
}

TEST_CASE("tempered_probabilities match softmax") {
  const std::vector<double> logits{3, 1, 0, -2};
  for (double lambda : {0.1, 0.5, 1.0, 4.0}) {
    const auto p = tempered_probabilities(logits, lambda);
    const auto q = oracle::softmax(logits, lambda);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
  }
  const auto flat = tempered_probabilities(std::vector<double>{2, 2, 2}, 0.7);
  for (double x : flat) CHECK(x == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("tempered_sample frequencies") {
  const std::vector<double> logits{3, 1, 0};
  const double lambda = 1.5;
  const auto p = oracle::softmax(logits, lambda);
  Rng rng(123);
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[tempered_sample(logits, lambda, rng)];
  for (std::size_t k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(p[k] * (1 - p[k]) / n);
    CHECK(std::fabs(counts[k] / double(n) - p[k]) < 3.5 * sigma);
  }
}

TEST_CASE("Rng streams differ and repeat") {
  Rng a(5, 0), b(5, 1), c(5, 0);
  const double x = a.uniform();
  CHECK(x != b.uniform());
  CHECK(x == c.uniform());
  Rng r(77);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("zero temperatures give identical runs") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(0.0);
  const auto runs = run_ensemble(s.world, s.policy, 8, 42);
  for (const auto& r : runs) {
    CHECK(r.beliefs == runs[0].beliefs);
    CHECK(r.citations == runs[0].citations);
    CHECK(r.answer == runs[0].answer);
  }
  const auto m = measure(s.world, runs);
  CHECK(m.answer.tv == 0.0);
  CHECK(m.finding.tv == 0.0);
  CHECK(m.citation.tv == 0.0);
}

TEST_CASE("ensembles do not depend on the worker count") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(1.0);
  const auto one = run_ensemble(s.world, s.policy, 16, 3, {}, 1);
  const auto many = run_ensemble(s.world, s.policy, 16, 3, {}, 6);
  CHECK(one == many);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].seed == run_seed(3, i));
    CHECK(one[i] == run_trajectory(s.world, s.policy, run_seed(3, i)));
  }
  CHECK_THROWS_AS(run_ensemble(s.world, s.policy, 1, 3), InsufficientRuns);
}

TEST_CASE("trajectory shape and belief monotonicity") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(1.0);
  for (int t = 1; t <= s.world.horizon; ++t) s.policy.schedule.set(Module::Update, t, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_trajectory(s.world, s.policy, seed);
    REQUIRE(r.beliefs.size() == static_cast<std::size_t>(s.world.horizon) + 1);
    CHECK(r.actions.size() == static_cast<std::size_t>(s.world.horizon));
    CHECK(r.actions == r.observations);
    CHECK(std::all_of(r.beliefs[0].begin(), r.beliefs[0].end(), [](auto b) { return b == 0; }));
    for (std::size_t t = 0; t + 1 < r.beliefs.size(); ++t) {
      for (std::size_t f = 0; f < s.world.n_findings; ++f) {
        if (r.beliefs[t][f]) CHECK(r.beliefs[t + 1][f]);
      }
      // With the update at zero temperature every summarized fact is kept.
      for (auto f : r.summaries[t]) CHECK(r.beliefs[t + 1][f] == 1);
    }
    const std::set<std::size_t> cited(r.citations.begin(), r.citations.end());
    CHECK(cited == std::set<std::size_t>(r.observations.begin(), r.observations.end()));
    CHECK(r.answer == answer_for(s.world, r.beliefs.back()));
  }
}

TEST_CASE("answer_for") {
  WorldSpec w;
  w.n_findings = 4;
  w.answers = {{"A", {0, 1}}, {"B", {2, 3}}};
  CHECK(answer_for(w, Belief{0, 0, 0, 0}).empty());
  CHECK(answer_for(w, Belief{1, 0, 1, 0}) == "A");
  CHECK(answer_for(w, Belief{0, 0, 1, 1}) == "B");
  CHECK(answer_index(w, "B") == 1);
  CHECK(answer_index(w, "") == 2);
}

TEST_CASE("schedule set and scale") {
  TemperatureSchedule s(3);
  CHECK(s.at(Module::Sum, 2) == 0.0);
  s.set(Module::Query, 1, 0.5);
  CHECK(s.at(Module::Query, 1) == 0.5);
  CHECK(s.at(Module::Query, 2) == 0.0);
  s.set(Module::Sum, kCombined, 1.0);
  for (int t = 1; t <= 3; ++t) CHECK(s.at(Module::Sum, t) == 1.0);
  s.scale(Module::Sum, 0.5);
  CHECK(s.at(Module::Sum, 3) == 0.5);
  CHECK_THROWS_AS(s.set(Module::Sum, 4, 1.0), ConfigError);
  CHECK_THROWS_AS(s.set(Module::Sum, 1, -0.1), ConfigError);
}

TEST_CASE("ablation grid layout") {
  const auto s = reference_scenario();
  const std::vector<Module> modules(kModules.begin(), kModules.end());
  const std::vector<int> steps{1, 2, 3, kCombined};
  const std::vector<double> lambdas{0.5, 1.0};
  const auto cells = ablation_grid(s.world, s.policy, modules, steps, lambdas, 4, 11, 4);
  REQUIRE(cells.size() == 24);
  CHECK(cells[0].lambda == 0.5);
  CHECK(cells[0].step == 1);
  CHECK(cells[0].module == Module::Query);
  CHECK(cells[2].module == Module::Update);
  CHECK(cells[3].step == 2);
  CHECK(cells[12].lambda == 1.0);
  for (const auto& c : cells) CHECK(c.runs.size() == 4);
}

TEST_CASE("query temperature at the final step leaves earlier actions fixed") {
  auto s = reference_scenario();
  s.policy.schedule.set_all(0.0);
  s.policy.schedule.set(Module::Query, s.world.horizon, 1.0);
  const auto runs = run_ensemble(s.world, s.policy, 10, 4);
  for (const auto& r : runs) {
    for (int t = 0; t + 1 < s.world.horizon; ++t) {
      CHECK(r.actions[static_cast<std::size_t>(t)] == runs[0].actions[static_cast<std::size_t>(t)]);
    }
  }
}

TEST_CASE("json round trips") {
  const auto s = reference_scenario();
  const auto world = world_from_json(to_json(s.world));
  CHECK(to_json(world) == to_json(s.world));
  const auto policy = policy_from_json(to_json(s.policy), world);
  CHECK(to_json(policy) == to_json(s.policy));
  CHECK(policy.schedule == s.policy.schedule);

  const auto uniform = schedule_from_json(0.3, 3);
  CHECK(uniform.at(Module::Update, 3) == 0.3);
  const auto partial = schedule_from_json(nlohmann::json{{"query", {1.0, 0.0, 0.0}}}, 3);
  CHECK(partial.at(Module::Query, 1) == 1.0);
  CHECK(partial.at(Module::Sum, 1) == 0.0);
}

TEST_CASE("config errors name the field") {
  const auto s = tiny_scenario();
  auto j = to_json(s.policy);
  j["flip_logits"][1] = 0.5;
  try {
    policy_from_json(j, s.world);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "policy.flip_logits[1]");
  }

  auto short_logits = to_json(s.policy);
  short_logits["query_logits"] = {1.0};
  CHECK_THROWS_WITH_AS(policy_from_json(short_logits, s.world), doctest::Contains("policy.query_logits"),
                       ConfigError);

  try {
    schedule_from_json(nlohmann::json{{"search", {1, 1}}}, 2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "schedule.search");
  }
  try {
    schedule_from_json(nlohmann::json{{"sum", {0.5, -1}}}, 2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "schedule.sum[1]");
  }

  auto world = to_json(s.world);
  world["queries"][0].erase("text");
  try {
    world_from_json(world);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "world.queries[0].text");
  }
}

TEST_CASE("random tiny scenarios are valid") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = random_tiny_scenario(seed);
    CHECK_NOTHROW(validate(s.world, s.policy));
    CHECK(s.world.n_findings >= 2);
    CHECK(s.world.n_findings <= 5);
    CHECK(s.world.horizon >= 1);
    CHECK(s.world.horizon <= 3);
  }
}
