#include "runvar/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "runvar/error.hpp"

namespace runvar {

namespace {

// Neumaier-compensated accumulator in extended precision.
class CompensatedSum {
 public:
  void add(long double x) noexcept {
    const long double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  long double value() const noexcept { return sum_ + carry_; }

 private:
  long double sum_ = 0.0L;
  long double carry_ = 0.0L;
};

void check_runs(std::size_t n) {
  if (n < 2) throw InsufficientRuns(n);
}

void check_compatible(std::span<const OutputVector> vs) {
  check_runs(vs.size());
  const auto& first = vs.front();
  for (const auto& v : vs) {
    if (v.dimension() != first.dimension()) {
      throw DimensionMismatch("vector dimensions differ: " + std::to_string(first.dimension()) +
                              " vs " + std::to_string(v.dimension()));
    }
    if (v.level != first.level) {
      throw DimensionMismatch("vectors from different levels: " +
                              std::string(to_string(first.level)) + " vs " +
                              std::string(to_string(v.level)));
    }
  }
}

std::vector<OutputVector> prepare(std::span<const OutputVector> vs, bool normalize) {
  std::vector<OutputVector> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(normalize ? l2_normalize(v) : v);
  return out;
}

long double dot(const OutputVector& a, const OutputVector& b) {
  CompensatedSum s;
  for (std::size_t k = 0; k < a.entries.size(); ++k) {
    s.add(static_cast<long double>(a.entries[k]) * b.entries[k]);
  }
  return s.value();
}

/// ||x_i - mean||^2 for every run, with the mean accumulated in extended precision.
std::vector<long double> squared_deviations(const std::vector<OutputVector>& xs) {
  const std::size_t dim = xs.front().dimension();
  std::vector<long double> mean(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    CompensatedSum s;
    for (const auto& x : xs) s.add(x.entries[k]);
    mean[k] = s.value() / xs.size();
  }
  std::vector<long double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    CompensatedSum s;
    for (std::size_t k = 0; k < dim; ++k) {
      const long double d = x.entries[k] - mean[k];
      s.add(d * d);
    }
    out.push_back(s.value());
  }
  return out;
}

long double ordered_pair_count(std::size_t n) {
  return static_cast<long double>(n) * static_cast<long double>(n - 1);
}

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Answer: return "answer";
    case Level::Finding: return "finding";
    case Level::Citation: return "citation";
  }
  return "unknown";
}

OutputVector OutputVector::zeros(Level level, std::size_t dim) {
  return OutputVector{level, std::vector<double>(dim, 0.0)};
}

OutputVector OutputVector::one_hot(std::size_t index, std::size_t dim) {
  if (index >= dim) throw DimensionMismatch("one-hot index out of range");
  auto v = zeros(Level::Answer, dim);
  v.entries[index] = 1.0;
  return v;
}

OutputVector OutputVector::indicator(Level level, std::span<const std::size_t> members,
                                     std::size_t dim) {
  auto v = zeros(level, dim);
  for (auto m : members) {
    if (m >= dim) throw DimensionMismatch("indicator member out of range");
    v.entries[m] = 1.0;
  }
  return v;
}

std::size_t OutputVector::support_size() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](double x) { return x != 0.0; }));
}

OutputVector l2_normalize(const OutputVector& v) {
  CompensatedSum sq;
  for (double x : v.entries) sq.add(static_cast<long double>(x) * x);
  const long double norm = std::sqrt(sq.value());
  OutputVector out = v;
  if (norm > 0.0L) {
    for (double& x : out.entries) x = static_cast<double>(x / norm);
  } else {
    std::fill(out.entries.begin(), out.entries.end(), 0.0);
  }
  return out;
}

double tv_estimate(std::span<const OutputVector> vs, bool normalize) {
  check_compatible(vs);
  const auto xs = prepare(vs, normalize);
  const auto dev = squared_deviations(xs);
  CompensatedSum total;
  for (long double d : dev) total.add(d);
  // sum_{i<j} ||x_i - x_j||^2 == n * sum_i ||x_i - mean||^2
  return static_cast<double>(total.value() / (xs.size() - 1));
}

std::vector<double> tv_leave_one_out(std::span<const OutputVector> vs, bool normalize) {
  check_compatible(vs);
  const std::size_t n = vs.size();
  if (n < 3) throw InsufficientRuns(n - 1);
  const auto xs = prepare(vs, normalize);
  const auto dev = squared_deviations(xs);
  CompensatedSum total_dev;
  for (long double d : dev) total_dev.add(d);
  const long double pair_total = n * total_dev.value();  // sum over unordered pairs
  std::vector<double> out(n);
  const long double denom = ordered_pair_count(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    // Row sum of run i: sum_j ||x_i - x_j||^2 == n ||x_i - mean||^2 + sum_j ||x_j - mean||^2
    const long double row = n * dev[i] + total_dev.value();
    out[i] = static_cast<double>((pair_total - row) / denom);
  }
  return out;
}

double tv_support_size(std::span<const OutputVector> vs) {
  check_runs(vs.size());
  const std::size_t n = vs.size();
  std::vector<long double> sizes;
  sizes.reserve(n);
  for (const auto& v : vs) sizes.push_back(static_cast<long double>(v.support_size()));
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const long double d = sizes[i] - sizes[j];
      total.add(d * d);
    }
  }
  return static_cast<double>(total.value() / ordered_pair_count(n));
}

double answer_discordance(std::span<const std::size_t> labels) {
  check_runs(labels.size());
  const std::size_t n = labels.size();
  std::size_t discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i] != labels[j]) ++discordant;
    }
  }
  return static_cast<double>(2.0L * discordant / ordered_pair_count(n));
}

double mean_pairwise_cosine(std::span<const OutputVector> vs) {
  check_compatible(vs);
  const auto xs = prepare(vs, true);
  const std::size_t n = xs.size();
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total.add(dot(xs[i], xs[j]));
  }
  return static_cast<double>(2.0L * total.value() / ordered_pair_count(n));
}

OutputVector semantic_vectorize(const std::set<std::string>& run_items,
                                std::span<const std::string> global_items,
                                const SimilarityOracle& sim, Level level) {
  for (const auto& item : run_items) {
    if (std::find(global_items.begin(), global_items.end(), item) == global_items.end()) {
      throw UnknownItem(item);
    }
  }
  auto v = OutputVector::zeros(level, global_items.size());
  for (std::size_t k = 0; k < global_items.size(); ++k) {
    double best = 0.0;
    for (const auto& f : run_items) best = std::max(best, sim(global_items[k], f));
    v.entries[k] = best;
  }
  return v;
}

TvResult summarize(std::span<const OutputVector> vs, bool normalize) {
  TvResult r;
  r.tv = tv_estimate(vs, normalize);
  r.support_tv = tv_support_size(vs);
  r.n_runs = vs.size();
  CompensatedSum support;
  for (const auto& v : vs) support.add(static_cast<long double>(v.support_size()));
  r.mean_support = static_cast<double>(support.value() / vs.size());
  return r;
}

}  // namespace runvar
