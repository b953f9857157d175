#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "runvar/error.hpp"
#include "runvar/metrics.hpp"

using namespace runvar;

namespace {

OutputVector vec(std::vector<double> entries, Level level = Level::Finding) {
  OutputVector v;
  v.level = level;
  v.entries = std::move(entries);
  return v;
}

OutputVector set_vector(std::vector<std::size_t> members, std::size_t dim) {
  return OutputVector::indicator(Level::Finding, members, dim);
}

std::vector<oracle::Vec> raw(const std::vector<OutputVector>& vs) {
  std::vector<oracle::Vec> out;
  for (const auto& v : vs) out.push_back(v.entries);
  return out;
}

std::vector<OutputVector> random_binary(std::mt19937_64& gen, std::size_t n, std::size_t dim) {
  std::bernoulli_distribution bit(0.4);
  std::vector<OutputVector> vs;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = OutputVector::zeros(Level::Finding, dim);
    for (double& e : v.entries) e = bit(gen);
    vs.push_back(std::move(v));
  }
  return vs;
}

}  // namespace

TEST_CASE("l2_normalize") {
  const auto v = l2_normalize(vec({1, 1, 0, 0}));
  CHECK(v.entries[0] == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(v.entries[1] == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(v.entries[2] == 0.0);
  CHECK(l2_normalize(vec({0, 0, 0})).entries == std::vector<double>{0, 0, 0});
  const auto e2 = OutputVector::one_hot(1, 3);
  CHECK(l2_normalize(e2) == e2);
}

TEST_CASE("tv_estimate on small fixtures") {
  const auto e1 = OutputVector::one_hot(0, 2), e2 = OutputVector::one_hot(1, 2);
  const std::vector<OutputVector> answers{e1, e1, e2};
  CHECK(tv_estimate(answers) == doctest::Approx(oracle::pairwise_tv(raw(answers), true)).epsilon(1e-12));
  CHECK(tv_estimate(answers) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const std::vector<OutputVector> sets{set_vector({0, 1}, 3), set_vector({1, 2}, 3)};
  CHECK(tv_estimate(sets) == doctest::Approx(oracle::pairwise_tv(raw(sets), true)).epsilon(1e-12));
  CHECK(tv_estimate(sets) == doctest::Approx(0.5).epsilon(1e-12));

  for (std::size_t n : {2, 5, 17}) {
    std::vector<OutputVector> same(n, set_vector({0, 3}, 5));
    CHECK(tv_estimate(same) == 0.0);
  }
}

TEST_CASE("single omission values and scale sensitivity") {
  auto omission = [](std::size_t m) {
    std::vector<std::size_t> s1(m), s2(m - 1);
    for (std::size_t i = 0; i < m; ++i) s1[i] = i;
    for (std::size_t i = 0; i + 1 < m; ++i) s2[i] = i;
    return tv_estimate(std::vector<OutputVector>{set_vector(s1, m), set_vector(s2, m)});
  };
  CHECK(std::round(omission(100) * 1000) / 1000 == doctest::Approx(0.005));
  CHECK(std::round(omission(10) * 1000) / 1000 == doctest::Approx(0.051));
  double previous = 2.0;
  for (std::size_t m : {5, 10, 20, 50, 100}) {
    const double tv = omission(m);
    CHECK(tv == doctest::Approx(oracle::single_omission_tv(m)).epsilon(1e-12));
    CHECK(tv < previous);
    previous = tv;
  }
}

TEST_CASE("tv_estimate errors") {
  CHECK_THROWS_AS(tv_estimate(std::vector<OutputVector>{OutputVector::one_hot(0, 2)}), InsufficientRuns);
  CHECK_THROWS_AS(tv_estimate(std::vector<OutputVector>{}), InsufficientRuns);
  CHECK_THROWS_AS(tv_estimate(std::vector<OutputVector>{set_vector({0}, 2), set_vector({0}, 3)}), DimensionMismatch);
}

TEST_CASE("zero vectors sit at distance one from unit vectors") {
  const std::vector<OutputVector> vs{OutputVector::zeros(Level::Finding, 3), set_vector({1}, 3)};
  // ||0 - e||^2 = 1 over 2 ordered pairs, divided by 2 n (n-1) = 4.
  CHECK(tv_estimate(vs) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("tv_support_size") {
  CHECK(tv_support_size(std::vector<OutputVector>{set_vector({0, 1, 2}, 6), set_vector({0, 1, 2, 3, 4}, 6)}) ==
        doctest::Approx(2.0));
  CHECK(tv_support_size(std::vector<OutputVector>(3, set_vector({0, 1, 2, 3}, 5))) == 0.0);

  std::vector<OutputVector> vs;
  std::vector<double> sizes;
  for (std::size_t k : {88, 92, 92}) {
    std::vector<std::size_t> members(k);
    for (std::size_t i = 0; i < k; ++i) members[i] = i;
    vs.push_back(set_vector(members, 100));
    sizes.push_back(static_cast<double>(k));
  }
  const auto r = summarize(vs);
  CHECK(r.mean_support == doctest::Approx(90.6667).epsilon(1e-5));
  CHECK(r.support_tv == doctest::Approx(oracle::sample_variance(sizes)).epsilon(1e-12));
  CHECK(r.support_tv == doctest::Approx(5.3333).epsilon(1e-4));
  CHECK(r.n_runs == 3);
}

TEST_CASE("answer_discordance") {
  CHECK(answer_discordance(std::vector<std::size_t>{0, 0, 1}) == doctest::Approx(2.0 / 3.0));
  CHECK(answer_discordance(std::vector<std::size_t>{4, 4, 4, 4}) == 0.0);
  CHECK(answer_discordance(std::vector<std::size_t>{0, 1, 2}) == 1.0);
  CHECK_THROWS_AS(answer_discordance(std::vector<std::size_t>{1}), InsufficientRuns);
}

TEST_CASE("mean_pairwise_cosine") {
  CHECK(mean_pairwise_cosine(std::vector<OutputVector>{set_vector({0, 1}, 3), set_vector({1, 2}, 3)}) ==
        doctest::Approx(0.5));
  CHECK(mean_pairwise_cosine(std::vector<OutputVector>(4, set_vector({2}, 3))) == doctest::Approx(1.0));
  CHECK(mean_pairwise_cosine(std::vector<OutputVector>{set_vector({0}, 3), set_vector({1, 2}, 3)}) == 0.0);
}

TEST_CASE("identities against the pairwise oracle on random inputs") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> n_dist(2, 20), d_dist(1, 50);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = n_dist(gen), d = d_dist(gen);
    auto vs = random_binary(gen, n, d);
    const double tv = tv_estimate(vs);
    CHECK(std::fabs(tv - oracle::pairwise_tv(raw(vs), true)) <= 1e-12);
    CHECK(std::fabs(tv_estimate(vs, false) - oracle::pairwise_tv(raw(vs), false)) <= 1e-12);
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    const bool any_zero = std::any_of(vs.begin(), vs.end(), [](const auto& v) { return v.is_zero(); });
    if (!any_zero) CHECK(std::fabs(tv - (1.0 - mean_pairwise_cosine(vs))) <= 1e-12);

    std::shuffle(vs.begin(), vs.end(), gen);
    CHECK(tv_estimate(vs) == doctest::Approx(tv).epsilon(1e-14));
  }
}

TEST_CASE("leave-one-out values match recomputation") {
  std::mt19937_64 gen(5);
  auto vs = random_binary(gen, 7, 9);
  const auto loo = tv_leave_one_out(vs, false);
  REQUIRE(loo.size() == vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    auto rest = vs;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
    CHECK(loo[i] == doctest::Approx(oracle::pairwise_tv(raw(rest), false)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(tv_leave_one_out(std::vector<OutputVector>(2, set_vector({0}, 1))), InsufficientRuns);
}

TEST_CASE("semantic_vectorize") {
  const std::vector<std::string> globals{"cat", "dog", "car"};
  const SimilarityOracle sim = [](std::string_view a, std::string_view b) {
    if (a == b) return 1.0;
    if ((a == "cat" && b == "dog") || (a == "dog" && b == "cat")) return 0.8;
    return 0.0;
  };
  CHECK(semantic_vectorize({"cat"}, globals, sim).entries == std::vector<double>{1, 0.8, 0});
  CHECK(semantic_vectorize({"dog", "car"}, globals, sim).entries == std::vector<double>{0.8, 1, 1});
  CHECK(semantic_vectorize({}, globals, sim).is_zero());

  const SimilarityOracle exact = [](std::string_view a, std::string_view b) { return a == b ? 1.0 : 0.0; };
  CHECK(semantic_vectorize({"dog", "car"}, globals, exact).entries == std::vector<double>{0, 1, 1});
  CHECK_THROWS_AS(semantic_vectorize({"bus"}, globals, sim), UnknownItem);
}
