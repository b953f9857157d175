#pragma once

// Shared canonical spaces for answers, findings and citations, so that entry k
// of every run's vector refers to the same item.

#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "runvar/judge.hpp"
#include "runvar/metrics.hpp"

namespace runvar {

/// Canonical key for exact citation matching. Throws MalformedUrl.
std::string normalize_url(std::string_view raw);

struct CanonicalItem {
  std::size_t id = 0;
  std::string representative;
};

struct CanonicalSpace {
  Level level = Level::Finding;
  std::vector<CanonicalItem> items;
  /// Sorted, duplicate-free canonical ids per run.
  std::vector<std::vector<std::size_t>> assignments;
  /// item_ids[run][pos] is the canonical id of the pos-th raw item of that run.
  std::vector<std::vector<std::size_t>> item_ids;

  std::size_t k() const noexcept { return items.size(); }
};

enum class OracleKind { ExactString, NormalizedString, JudgeBacked };
enum class ItemKind { Answer, Finding };

/// Decides whether two texts name the same canonical item. Judge verdicts are
/// cached per unordered pair, so repeated questions never reach the judge.
/// Safe to call from several threads.
class EquivalenceOracle {
 public:
  explicit EquivalenceOracle(OracleKind kind = OracleKind::ExactString);
  EquivalenceOracle(JudgeTransport& judge, ItemKind item_kind);

  EquivalenceOracle(const EquivalenceOracle&) = delete;
  EquivalenceOracle& operator=(const EquivalenceOracle&) = delete;

  bool equivalent(std::string_view a, std::string_view b);

  OracleKind kind() const noexcept { return kind_; }
  std::size_t judge_calls() const;

 private:
  OracleKind kind_;
  JudgeTransport* judge_ = nullptr;
  ItemKind item_kind_ = ItemKind::Finding;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, bool> cache_;
  std::size_t judge_calls_ = 0;
};

/// Greedy first-match clustering in (run, position) order against the
/// representatives of existing items, in creation order.
CanonicalSpace cluster_findings(const std::vector<std::vector<std::string>>& per_run_findings,
                                EquivalenceOracle& oracle);

/// Canonical id per answer. All empty answers share one id, created when the
/// first empty answer is seen, and never reach the oracle.
std::vector<std::size_t> canonicalize_answers(const std::vector<std::string>& answers,
                                              EquivalenceOracle& oracle);

/// Same as canonicalize_answers, packaged as an Answer-level space.
CanonicalSpace answer_space(const std::vector<std::string>& answers, EquivalenceOracle& oracle);

struct CitationSpace {
  CanonicalSpace space;
  /// One message per malformed URL; such URLs are keyed by their trimmed text.
  std::vector<std::string> warnings;
};

/// Normalizes every URL and matches the keys exactly.
CitationSpace canonicalize_citations(const std::vector<std::vector<std::string>>& per_run_urls);

/// Indicator vectors (one-hot at the Answer level), all of dimension space.k().
std::vector<OutputVector> build_vectors(const CanonicalSpace& space);

}  // namespace runvar
