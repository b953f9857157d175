#include "runvar/decomposition.hpp"

#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "runvar/error.hpp"
#include "runvar/parallel.hpp"

namespace runvar {

using nlohmann::json;
using sim::Belief;
using sim::Module;

json to_json(const DecompositionReport& r) {
  auto terms = [](const DecompositionTerms& t) {
    return json{{"tv_total", t.total},         {"tv_propagated", t.propagated}, {"tv_intrinsic", t.intrinsic},
                {"delta_query", t.delta_query}, {"delta_sum", t.delta_sum},     {"delta_update", t.delta_update}};
  };
  json out = terms(r.terms);
  out["step"] = r.step;
  out["method"] = r.method == DecompositionMethod::ExactEnumeration ? "exact" : "monte_carlo";
  out["residual"] = r.residual;
  out["delta_residual"] = r.delta_residual;
  if (r.method == DecompositionMethod::ExactEnumeration) {
    out["outcomes"] = r.outcomes;
  } else {
    out["n_outer"] = r.n_outer;
    out["n_inner"] = r.n_inner;
    out["samples"] = r.samples;
    out["standard_errors"] = r.standard_errors ? terms(*r.standard_errors) : json(nullptr);
  }
  return out;
}

namespace {

void check_enumerable(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t, int max_t) {
  sim::validate(world, cfg);
  if (world.n_findings > 64) {
    throw ConfigError("world.n_findings", "exact enumeration supports at most 64 findings");
  }
  if (t < 0 || t > max_t) throw ConfigError("step", fmt::format("step {} outside 0..{}", t, max_t));
}

class OutcomeCounter {
 public:
  explicit OutcomeCounter(std::size_t limit) : limit_(limit) {}
  void add(std::size_t n = 1) {
    count_ += n;
    if (count_ > limit_) throw StateSpaceTooLarge(count_, limit_);
  }
  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t limit_;
  std::size_t count_ = 0;
};

Belief to_belief(std::uint64_t mask, std::size_t n) {
  Belief b(n, 0);
  for (std::size_t f = 0; f < n; ++f) b[f] = (mask >> f) & 1u;
  return b;
}

/// Calls fn(action, p_action, summary_mask, p_summary) for every summary with
/// nonzero probability.
void for_each_summary(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, std::uint64_t mask, int step,
                      OutcomeCounter& counter,
                      const std::function<void(std::size_t, long double, std::uint64_t, long double)>& fn) {
  const auto belief = to_belief(mask, world.n_findings);
  const auto pa = sim::tempered_probabilities(sim::query_logits(world, cfg, belief),
                                              cfg.schedule.at(Module::Query, step));
  const double lambda_s = cfg.schedule.at(Module::Sum, step);
  for (std::size_t a = 0; a < pa.size(); ++a) {
    if (pa[a] <= 0.0) continue;
    const auto& facts = world.queries[a].document.findings;
    std::function<void(std::size_t, std::uint64_t, long double)> recurse = [&](std::size_t i, std::uint64_t h,
                                                                               long double p) {
      if (i == facts.size()) {
        counter.add();
        fn(a, pa[a], h, p);
        return;
      }
      const long double keep = sim::inclusion_probability(cfg, facts[i], lambda_s);
      if (keep > 0.0L) recurse(i + 1, h | (std::uint64_t{1} << facts[i]), p * keep);
      if (keep < 1.0L) recurse(i + 1, h, p * (1.0L - keep));
    };
    recurse(0, 0, 1.0L);
  }
}

std::map<std::uint64_t, double> distribution_impl(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t,
                                                  OutcomeCounter& counter) {
  std::map<std::uint64_t, long double> dist{{0, 1.0L}};
  for (int s = 1; s <= t; ++s) {
    const double lambda_u = cfg.schedule.at(Module::Update, s);
    std::map<std::uint64_t, long double> next;
    for (const auto& [mask, pb] : dist) {
      for_each_summary(world, cfg, mask, s, counter, [&](std::size_t, long double p_a, std::uint64_t h, long double p_h) {
        // Facts already held cannot change, so only new facts branch.
        std::vector<std::size_t> fresh;
        for (std::size_t f = 0; f < world.n_findings; ++f) {
          if (((h >> f) & 1u) && !((mask >> f) & 1u)) fresh.push_back(f);
        }
        std::function<void(std::size_t, std::uint64_t, long double)> recurse = [&](std::size_t i, std::uint64_t m,
                                                                                   long double p) {
          if (i == fresh.size()) {
            counter.add();
            next[m] += p;
            return;
          }
          const long double set = sim::set_probability(cfg, fresh[i], lambda_u);
          if (set > 0.0L) recurse(i + 1, m | (std::uint64_t{1} << fresh[i]), p * set);
          if (set < 1.0L) recurse(i + 1, m, p * (1.0L - set));
        };
        recurse(0, mask, pb * p_a * p_h);
      });
    }
    dist = std::move(next);
  }
  std::map<std::uint64_t, double> out;
  for (const auto& [mask, p] : dist) out.emplace(mask, static_cast<double>(p));
  return out;
}

long double squared_distance(const std::vector<long double>& a, const std::vector<long double>& b) {
  long double s = 0.0L;
  for (std::size_t f = 0; f < a.size(); ++f) s += (a[f] - b[f]) * (a[f] - b[f]);
  return s;
}

long double binary_trace(const std::vector<long double>& m) {
  long double s = 0.0L;
  for (long double x : m) s += x * (1.0L - x);
  return s;
}

}  // namespace

std::map<std::uint64_t, double> belief_distribution(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t,
                                                    std::size_t outcome_limit) {
  check_enumerable(world, cfg, t, world.horizon);
  OutcomeCounter counter(outcome_limit);
  return distribution_impl(world, cfg, t, counter);
}

DecompositionReport decompose_exact(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t,
                                    std::size_t outcome_limit) {
  check_enumerable(world, cfg, t, world.horizon - 1);
  OutcomeCounter counter(outcome_limit);
  const auto dist = distribution_impl(world, cfg, t, counter);
  const std::size_t n = world.n_findings;
  const int s = t + 1;
  const double lambda_u = cfg.schedule.at(Module::Update, s);
  std::vector<long double> set_p(n);
  for (std::size_t f = 0; f < n; ++f) set_p[f] = sim::set_probability(cfg, f, lambda_u);

  struct ActionBranch {
    long double p = 0.0L;
    std::vector<long double> mean;
    std::vector<std::pair<long double, std::vector<long double>>> summaries;
  };
  struct StateBranch {
    long double p = 0.0L;
    std::vector<long double> mean;
    long double delta_query = 0.0L, delta_sum = 0.0L, delta_update = 0.0L, intrinsic = 0.0L;
  };

  std::vector<StateBranch> states;
  for (const auto& [mask, pb] : dist) {
    std::map<std::size_t, ActionBranch> actions;
    for_each_summary(world, cfg, mask, s, counter, [&](std::size_t a, long double p_a, std::uint64_t h, long double p_h) {
      // Given (b, a, h) the bits are independent: held bits stay 1, summarized
      // bits set with their set probability, the rest stay 0.
      std::vector<long double> m(n, 0.0L);
      for (std::size_t f = 0; f < n; ++f) {
        if ((mask >> f) & 1u) m[f] = 1.0L;
        else if ((h >> f) & 1u) m[f] = set_p[f];
      }
      auto& branch = actions[a];
      branch.p = p_a;
      branch.summaries.emplace_back(p_h, std::move(m));
    });

    StateBranch state;
    state.p = pb;
    state.mean.assign(n, 0.0L);
    for (auto& [a, branch] : actions) {
      branch.mean.assign(n, 0.0L);
      for (const auto& [p_h, m] : branch.summaries) {
        for (std::size_t f = 0; f < n; ++f) branch.mean[f] += p_h * m[f];
      }
      for (const auto& [p_h, m] : branch.summaries) {
        state.delta_sum += branch.p * p_h * squared_distance(m, branch.mean);
        state.delta_update += branch.p * p_h * binary_trace(m);
      }
      for (std::size_t f = 0; f < n; ++f) state.mean[f] += branch.p * branch.mean[f];
    }
    for (const auto& [a, branch] : actions) state.delta_query += branch.p * squared_distance(branch.mean, state.mean);
    state.intrinsic = binary_trace(state.mean);
    states.push_back(std::move(state));
  }

  std::vector<long double> mean(n, 0.0L);
  for (const auto& st : states) {
    for (std::size_t f = 0; f < n; ++f) mean[f] += st.p * st.mean[f];
  }
  long double propagated = 0.0L, intrinsic = 0.0L, dq = 0.0L, ds = 0.0L, du = 0.0L;
  for (const auto& st : states) {
    propagated += st.p * squared_distance(st.mean, mean);
    intrinsic += st.p * st.intrinsic;
    dq += st.p * st.delta_query;
    ds += st.p * st.delta_sum;
    du += st.p * st.delta_update;
  }
  const long double total = binary_trace(mean);

  DecompositionReport r;
  r.step = t;
  r.method = DecompositionMethod::ExactEnumeration;
  r.terms = DecompositionTerms{static_cast<double>(total),     static_cast<double>(propagated),
                               static_cast<double>(intrinsic), static_cast<double>(dq),
                               static_cast<double>(ds),        static_cast<double>(du)};
  r.residual = static_cast<double>(std::fabs(total - propagated - intrinsic));
  r.delta_residual = static_cast<double>(std::fabs(intrinsic - dq - ds - du));
  r.outcomes = counter.count();
  return r;
}

// ---------------------------------------------------------------------------

namespace {

OutputVector raw_vector(const Belief& b) {
  auto v = OutputVector::zeros(Level::Finding, b.size());
  for (std::size_t f = 0; f < b.size(); ++f) v.entries[f] = b[f];
  return v;
}

struct OuterSample {
  double i_b = 0.0, i_ba = 0.0, i_bah = 0.0;
  OutputVector first;      // one unconditional draw of X
  OutputVector mean_b;     // mean of the b-group
};

double mean_of(const std::vector<double>& xs) {
  long double s = 0.0L;
  for (double x : xs) s += x;
  return static_cast<double>(s / xs.size());
}

/// Jackknife standard error from leave-one-out estimates.
double jackknife_se(const std::vector<double>& loo) {
  const double n = static_cast<double>(loo.size());
  const double m = mean_of(loo);
  long double s = 0.0L;
  for (double x : loo) s += (x - m) * (x - m);
  return std::sqrt(static_cast<double>((n - 1.0) / n * s));
}

/// Leave-one-out means of xs.
std::vector<double> loo_means(const std::vector<double>& xs) {
  long double total = 0.0L;
  for (double x : xs) total += x;
  std::vector<double> out;
  for (double x : xs) out.push_back(static_cast<double>((total - x) / (xs.size() - 1)));
  return out;
}

}  // namespace

DecompositionReport decompose_mc(const sim::WorldSpec& world, const sim::PolicyConfig& cfg, int t, std::size_t n_outer,
                                 std::size_t n_inner, std::uint64_t seed) {
  sim::validate(world, cfg);
  if (t < 0 || t >= world.horizon) throw ConfigError("step", fmt::format("step {} outside 0..{}", t, world.horizon - 1));
  if (n_outer < 2) throw InsufficientRuns(n_outer);
  if (n_inner < 2) throw InsufficientRuns(n_inner);
  const int s = t + 1;
  const double lambda_q = cfg.schedule.at(Module::Query, s);
  const double lambda_s = cfg.schedule.at(Module::Sum, s);
  const double lambda_u = cfg.schedule.at(Module::Update, s);

  std::vector<OuterSample> outer(n_outer);
  parallel_for(n_outer, hardware_workers(), [&](std::size_t i) {
    sim::Rng rng(seed, i);
    Belief b(world.n_findings, 0);
    for (int k = 1; k <= t; ++k) b = sim::step(world, b, k, cfg, rng).next_belief;

    std::vector<OutputVector> group_b, group_ba, group_bah;
    for (std::size_t j = 0; j < n_inner; ++j) group_b.push_back(raw_vector(sim::step(world, b, s, cfg, rng).next_belief));
    const auto a = sim::tempered_sample(sim::query_logits(world, cfg, b), lambda_q, rng);
    for (std::size_t j = 0; j < n_inner; ++j) {
      const auto h = sim::sample_summary(world, cfg, a, lambda_s, rng);
      group_ba.push_back(raw_vector(sim::apply_update(cfg, b, h, lambda_u, rng)));
    }
    const auto h = sim::sample_summary(world, cfg, a, lambda_s, rng);
    for (std::size_t j = 0; j < n_inner; ++j) group_bah.push_back(raw_vector(sim::apply_update(cfg, b, h, lambda_u, rng)));

    auto& o = outer[i];
    o.i_b = tv_estimate(group_b, false);
    o.i_ba = tv_estimate(group_ba, false);
    o.i_bah = tv_estimate(group_bah, false);
    o.first = group_b.front();
    o.mean_b = OutputVector::zeros(Level::Finding, world.n_findings);
    for (const auto& x : group_b) {
      for (std::size_t f = 0; f < x.entries.size(); ++f) o.mean_b.entries[f] += x.entries[f];
    }
    for (double& e : o.mean_b.entries) e /= static_cast<double>(n_inner);
  });

  std::vector<double> intr, dq, ds, du;
  std::vector<OutputVector> firsts, means;
  for (const auto& o : outer) {
    intr.push_back(o.i_b);
    dq.push_back(o.i_b - o.i_ba);
    ds.push_back(o.i_ba - o.i_bah);
    du.push_back(o.i_bah);
    firsts.push_back(o.first);
    means.push_back(o.mean_b);
  }
  const double inner = static_cast<double>(n_inner);

  DecompositionReport r;
  r.step = t;
  r.method = DecompositionMethod::MonteCarlo;
  r.n_outer = n_outer;
  r.n_inner = n_inner;
  r.samples = n_outer * (3 * n_inner + static_cast<std::size_t>(t));
  auto& terms = r.terms;
  terms.intrinsic = mean_of(intr);
  terms.delta_query = mean_of(dq);
  terms.delta_sum = mean_of(ds);
  terms.delta_update = mean_of(du);
  terms.total = tv_estimate(firsts, false);
  // The spread of group means overstates Var(E[X | b]) by E[Var(X | b)] / n_inner.
  terms.propagated = tv_estimate(means, false) - terms.intrinsic / inner;
  r.residual = std::fabs(terms.total - terms.propagated - terms.intrinsic);
  r.delta_residual = std::fabs(terms.intrinsic - terms.delta_query - terms.delta_sum - terms.delta_update);

  if (n_outer >= 3) {
    DecompositionTerms se;
    se.intrinsic = jackknife_se(loo_means(intr));
    se.delta_query = jackknife_se(loo_means(dq));
    se.delta_sum = jackknife_se(loo_means(ds));
    se.delta_update = jackknife_se(loo_means(du));
    se.total = jackknife_se(tv_leave_one_out(firsts, false));
    auto prop_loo = tv_leave_one_out(means, false);
    const auto intr_loo = loo_means(intr);
    for (std::size_t i = 0; i < prop_loo.size(); ++i) prop_loo[i] -= intr_loo[i] / inner;
    se.propagated = jackknife_se(prop_loo);
    r.standard_errors = se;
  }
  return r;
}

std::vector<PropagationPoint> propagation_curve(const sim::WorldSpec& world, const sim::PolicyConfig& cfg_template,
                                                sim::Module module, double lambda, std::size_t n_runs,
                                                std::uint64_t base_seed) {
  std::vector<PropagationPoint> curve;
  for (int s = 1; s <= world.horizon; ++s) {
    sim::PolicyConfig cfg = cfg_template;
    cfg.schedule = sim::TemperatureSchedule(world.horizon);
    cfg.schedule.set(module, s, lambda);
    const auto runs = sim::run_ensemble(world, cfg, n_runs, base_seed);
    curve.push_back(PropagationPoint{s, sim::measure(world, runs)});
  }
  return curve;
}

}  // namespace runvar
