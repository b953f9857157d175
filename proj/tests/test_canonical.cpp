#include <random>
#include <set>

#include <doctest.h>

#include "fakes.hpp"
#include "runvar/canonical.hpp"
#include "runvar/error.hpp"
#include "runvar/prompts.hpp"

using namespace runvar;

TEST_CASE("normalize_url rules") {
  CHECK(normalize_url("HTTPS://Example.COM:443/path/#sec") == "https://example.com/path");
  CHECK(normalize_url("http://a.com/x?utm_source=t&b=2&a=1") == "http://a.com/x?a=1&b=2");
  CHECK(normalize_url("https://a.com") == "https://a.com");
  CHECK(normalize_url("  http://A.com:80/  ") == "http://a.com");
  CHECK(normalize_url("http://a.com:8080/x") == "http://a.com:8080/x");
  CHECK(normalize_url("https://a.com/x?gclid=1&fbclid=2&UTM_Medium=m") == "https://a.com/x");
  CHECK(normalize_url("https://a.com/Path/Case") == "https://a.com/Path/Case");
  CHECK(normalize_url("https://[::1]:443/x") == "https://[::1]/x");
}

TEST_CASE("normalize_url rejects malformed input") {
  CHECK_THROWS_AS(normalize_url("not a url"), MalformedUrl);
  CHECK_THROWS_AS(normalize_url("example.com/path"), MalformedUrl);
  CHECK_THROWS_AS(normalize_url("http://"), MalformedUrl);
  CHECK_THROWS_AS(normalize_url("http://a.com:port/"), MalformedUrl);
  CHECK_THROWS_AS(normalize_url(""), MalformedUrl);
}

TEST_CASE("normalize_url is idempotent") {
  const char* samples[] = {"HTTPS://Example.COM:443/path/#sec", "http://a.com/x?utm_source=t&b=2&a=1",
                           "https://a.com", "http://x.org:80//a//?z=1&y=&a=2#f", "https://u:P@Host.io/q?b=1&a=1"};
  for (const char* s : samples) {
    const auto once = normalize_url(s);
    CHECK(normalize_url(once) == once);
  }
}

TEST_CASE("cluster_findings with judge verdicts") {
  ScriptedJudge yes([](std::string_view) { return std::string("yes"); });
  EquivalenceOracle same(yes, ItemKind::Finding);
  const auto space = cluster_findings({{"X was founded in 1900"}, {"X's founding year is 1900"}}, same);
  CHECK(space.k() == 1);
  CHECK(space.assignments == std::vector<std::vector<std::size_t>>{{0}, {0}});
  CHECK(space.items[0].representative == "X was founded in 1900");

  ScriptedJudge no([](std::string_view) { return std::string("No."); });
  EquivalenceOracle different(no, ItemKind::Finding);
  const auto split = cluster_findings({{"A"}, {"B"}}, different);
  CHECK(split.k() == 2);
  CHECK(split.assignments == std::vector<std::vector<std::size_t>>{{0}, {1}});
}

TEST_CASE("cluster_findings under exact matching is deduplication") {
  EquivalenceOracle exact(OracleKind::ExactString);
  const auto space = cluster_findings({{"a", "b"}, {"a", "b"}, {"a", "b"}}, exact);
  CHECK(space.k() == 2);

  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> item(0, 6), len(0, 5), runs(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> input(static_cast<std::size_t>(runs(gen)));
    std::set<std::string> distinct;
    for (auto& run : input) {
      for (int i = len(gen); i > 0; --i) {
        run.push_back("f" + std::to_string(item(gen)));
        distinct.insert(run.back());
      }
    }
    EquivalenceOracle oracle(OracleKind::ExactString);
    const auto s = cluster_findings(input, oracle);
    CHECK(s.k() == distinct.size());
    for (std::size_t r = 0; r < input.size(); ++r) {
      REQUIRE(s.item_ids[r].size() == input[r].size());
      for (std::size_t p = 0; p < input[r].size(); ++p) CHECK(s.items[s.item_ids[r][p]].representative == input[r][p]);
      std::set<std::size_t> ids(s.item_ids[r].begin(), s.item_ids[r].end());
      CHECK(std::vector<std::size_t>(ids.begin(), ids.end()) == s.assignments[r]);
    }
  }
}

TEST_CASE("greedy clustering compares against representatives in creation order") {
  // b matches both a and c; a was created first.
  ScriptedJudge judge([](std::string_view p) {
    const bool b_involved = contains(p, "Finding A: b\n") || contains(p, "Finding B: b\n");
    return std::string(b_involved ? "yes" : "no");
  });
  EquivalenceOracle oracle(judge, ItemKind::Finding);
  const auto s = cluster_findings({{"a"}, {"c"}, {"b"}}, oracle);
  CHECK(s.k() == 2);
  CHECK(s.assignments[2] == std::vector<std::size_t>{0});
}

TEST_CASE("oracle caches verdicts per unordered pair") {
  ScriptedJudge judge([](std::string_view) { return std::string("no"); });
  EquivalenceOracle oracle(judge, ItemKind::Answer);
  CHECK_FALSE(oracle.equivalent("x", "y"));
  CHECK_FALSE(oracle.equivalent("y", "x"));
  CHECK_FALSE(oracle.equivalent("x", "y"));
  CHECK(oracle.equivalent("x", "x"));
  CHECK(judge.calls() == 1);
  CHECK(oracle.judge_calls() == 1);
  CHECK(contains(judge.prompts()[0], prompts::kAnswerEquivalenceLead));
  CHECK_THROWS_AS(EquivalenceOracle(OracleKind::JudgeBacked), ConfigError);
}

TEST_CASE("judge failures propagate from clustering") {
  ScriptedJudge down([](std::string_view) -> std::string { throw OracleUnavailable("offline"); });
  EquivalenceOracle oracle(down, ItemKind::Finding);
  CHECK_THROWS_AS(cluster_findings({{"a"}, {"b"}}, oracle), OracleUnavailable);
}

TEST_CASE("canonicalize_answers") {
  EquivalenceOracle normalized(OracleKind::NormalizedString);
  CHECK(canonicalize_answers({"Paris", "paris", "Lyon"}, normalized) == std::vector<std::size_t>{0, 0, 1});
  CHECK(canonicalize_answers({"", ""}, normalized) == std::vector<std::size_t>{0, 0});
  CHECK(canonicalize_answers({"A", "  ", "", "A"}, normalized) == std::vector<std::size_t>{0, 1, 1, 0});

  ScriptedJudge yes([](std::string_view) { return std::string("Yes"); });
  EquivalenceOracle judged(yes, ItemKind::Answer);
  CHECK(canonicalize_answers({"42", "forty-two"}, judged) == std::vector<std::size_t>{0, 0});

  ScriptedJudge counting([](std::string_view) { return std::string("no"); });
  EquivalenceOracle never(counting, ItemKind::Answer);
  canonicalize_answers({"", "x", ""}, never);
  CHECK(counting.calls() == 0);
  CHECK_THROWS_AS(canonicalize_answers({}, normalized), InsufficientRuns);
}

TEST_CASE("build_vectors") {
  CanonicalSpace s;
  s.level = Level::Finding;
  s.items = {{0, "c1"}, {1, "c2"}};
  s.assignments = {{0, 1}, {1}, {}};
  const auto vs = build_vectors(s);
  CHECK(vs[0].entries == std::vector<double>{1, 1});
  CHECK(vs[1].entries == std::vector<double>{0, 1});
  CHECK(vs[2].is_zero());

  EquivalenceOracle exact(OracleKind::ExactString);
  const auto answers = build_vectors(answer_space({"p", "p", "q"}, exact));
  CHECK(answers[0] == OutputVector::one_hot(0, 2));
  CHECK(answers[2] == OutputVector::one_hot(1, 2));
  CHECK(answers[0].level == Level::Answer);
}

TEST_CASE("canonicalize_citations") {
  const auto c = canonicalize_citations({{"HTTPS://Example.COM:443/a/", "https://example.com/a?utm_source=x"},
                                         {"https://example.com/a", "ftp//broken"},
                                         {}});
  CHECK(c.space.k() == 2);
  CHECK(c.space.assignments[0] == std::vector<std::size_t>{0});
  CHECK(c.space.assignments[1] == std::vector<std::size_t>{0, 1});
  CHECK(c.space.assignments[2].empty());
  REQUIRE(c.warnings.size() == 1);
  CHECK(contains(c.warnings[0], "ftp//broken"));
  CHECK(build_vectors(c.space)[2].is_zero());
}
