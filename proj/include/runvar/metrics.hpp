#pragma once

// Total-variance estimators over per-run output vectors.
//
// Every estimator here is the pairwise U-statistic
//
//   TV = 1 / (2 n (n-1)) * sum_i sum_j ||x_i - x_j||^2
//
// or one of its algebraic special cases. All functions are pure.

#include <cstddef>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace runvar {

enum class Level { Answer, Finding, Citation };

std::string_view to_string(Level level);

/// One run's output embedded in a canonical space.
struct OutputVector {
  Level level = Level::Finding;
  std::vector<double> entries;

  static OutputVector zeros(Level level, std::size_t dim);
  static OutputVector one_hot(std::size_t index, std::size_t dim);
  /// Binary indicator vector; `members` must be < dim.
  static OutputVector indicator(Level level, std::span<const std::size_t> members, std::size_t dim);

  std::size_t dimension() const noexcept { return entries.size(); }
  /// ||x||_0
  std::size_t support_size() const noexcept;
  bool is_zero() const noexcept { return support_size() == 0; }

  friend bool operator==(const OutputVector&, const OutputVector&) = default;
};

struct TvResult {
  double tv = 0.0;
  double support_tv = 0.0;
  std::size_t n_runs = 0;
  double mean_support = 0.0;
};

/// x / ||x||_2, or the zero vector when ||x||_2 == 0.
OutputVector l2_normalize(const OutputVector& v);

/// Pairwise U-statistic for Tr(Cov(X)). With `normalize`, each vector is
/// passed through l2_normalize first.
/// Throws InsufficientRuns (n < 2) and DimensionMismatch.
double tv_estimate(std::span<const OutputVector> vs, bool normalize = true);

/// Leave-one-out values of tv_estimate: element i is the estimate computed
/// without run i. Requires n >= 3. Used for jackknife standard errors.
std::vector<double> tv_leave_one_out(std::span<const OutputVector> vs, bool normalize = true);

/// Unbiased sample variance of the support sizes ||x_i||_0, in pairwise form.
double tv_support_size(std::span<const OutputVector> vs);

/// Fraction of ordered pairs (i != j) with different labels.
double answer_discordance(std::span<const std::size_t> labels);

/// Mean over ordered pairs (i != j) of the dot product of the normalized vectors.
/// tv_estimate == 1 - mean_pairwise_cosine whenever no vector is zero.
double mean_pairwise_cosine(std::span<const OutputVector> vs);

/// Similarity in [0, 1]; sim(u, u) == 1 and symmetric.
using SimilarityOracle = std::function<double(std::string_view, std::string_view)>;

/// Soft indicator vector: entry k is max over f in run_items of sim(global_items[k], f).
/// Throws UnknownItem when a run item is absent from global_items.
OutputVector semantic_vectorize(const std::set<std::string>& run_items,
                                std::span<const std::string> global_items,
                                const SimilarityOracle& sim, Level level = Level::Finding);

/// tv_estimate, tv_support_size and the mean support in one pass.
TvResult summarize(std::span<const OutputVector> vs, bool normalize = true);

}  // namespace runvar
