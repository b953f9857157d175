#include "runvar/canonical.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>

#include "runvar/error.hpp"
#include "runvar/extraction.hpp"
#include "runvar/prompts.hpp"
#include "runvar/text.hpp"

namespace runvar {

EquivalenceOracle::EquivalenceOracle(OracleKind kind) : kind_(kind) {
  if (kind == OracleKind::JudgeBacked) {
    throw ConfigError("oracle", "a judge-backed oracle needs a judge transport");
  }
}

EquivalenceOracle::EquivalenceOracle(JudgeTransport& judge, ItemKind item_kind)
    : kind_(OracleKind::JudgeBacked), judge_(&judge), item_kind_(item_kind) {}

std::size_t EquivalenceOracle::judge_calls() const {
  std::lock_guard lock(mutex_);
  return judge_calls_;
}

bool EquivalenceOracle::equivalent(std::string_view a, std::string_view b) {
  switch (kind_) {
    case OracleKind::ExactString:
      return a == b;
    case OracleKind::NormalizedString:
      return text::normalize(a) == text::normalize(b);
    case OracleKind::JudgeBacked:
      break;
  }
  if (a == b) return true;
  auto key = a < b ? std::pair{std::string(a), std::string(b)} : std::pair{std::string(b), std::string(a)};
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  // Ask in the cached orientation so the prompt is independent of argument order.
  const std::string prompt = item_kind_ == ItemKind::Answer
                                 ? prompts::answer_equivalence(key.first, key.second)
                                 : prompts::finding_equivalence(key.first, key.second);
  const bool verdict = parse_verdict(judge_->complete(prompt));
  std::lock_guard lock(mutex_);
  ++judge_calls_;
  return cache_.emplace(std::move(key), verdict).first->second;
}

namespace {

std::size_t assign(std::vector<CanonicalItem>& items, const std::string& text,
                   EquivalenceOracle& oracle) {
  for (const auto& item : items) {
    if (oracle.equivalent(item.representative, text)) return item.id;
  }
  items.push_back(CanonicalItem{items.size(), text});
  return items.back().id;
}

void finalize_assignments(CanonicalSpace& space) {
  space.assignments.clear();
  for (const auto& ids : space.item_ids) {
    std::vector<std::size_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    space.assignments.push_back(std::move(sorted));
  }
}

}  // namespace

CanonicalSpace cluster_findings(const std::vector<std::vector<std::string>>& per_run_findings,
                                EquivalenceOracle& oracle) {
  if (per_run_findings.empty()) throw InsufficientRuns(0);
  CanonicalSpace space;
  space.level = Level::Finding;
  for (const auto& run : per_run_findings) {
    auto& ids = space.item_ids.emplace_back();
    for (const auto& finding : run) ids.push_back(assign(space.items, finding, oracle));
  }
  finalize_assignments(space);
  return space;
}

std::vector<std::size_t> canonicalize_answers(const std::vector<std::string>& answers,
                                              EquivalenceOracle& oracle) {
  if (answers.empty()) throw InsufficientRuns(0);
  std::vector<CanonicalItem> items;
  std::optional<std::size_t> empty_id;
  std::vector<std::size_t> ids;
  ids.reserve(answers.size());
  for (const auto& answer : answers) {
    if (text::trim(answer).empty()) {
      if (!empty_id) {
        empty_id = items.size();
        items.push_back(CanonicalItem{*empty_id, ""});
      }
      ids.push_back(*empty_id);
      continue;
    }
    std::optional<std::size_t> match;
    for (const auto& item : items) {
      if (empty_id && item.id == *empty_id) continue;
      if (oracle.equivalent(item.representative, answer)) {
        match = item.id;
        break;
      }
    }
    if (!match) {
      match = items.size();
      items.push_back(CanonicalItem{*match, answer});
    }
    ids.push_back(*match);
  }
  return ids;
}

CanonicalSpace answer_space(const std::vector<std::string>& answers, EquivalenceOracle& oracle) {
  const auto ids = canonicalize_answers(answers, oracle);
  CanonicalSpace space;
  space.level = Level::Answer;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (ids[i] == space.items.size()) {
      space.items.push_back(CanonicalItem{ids[i], text::trim(answers[i]).empty() ? std::string{} : answers[i]});
    }
    space.item_ids.push_back({ids[i]});
  }
  finalize_assignments(space);
  return space;
}

CitationSpace canonicalize_citations(const std::vector<std::vector<std::string>>& per_run_urls) {
  if (per_run_urls.empty()) throw InsufficientRuns(0);
  CitationSpace result;
  auto& space = result.space;
  space.level = Level::Citation;
  std::unordered_map<std::string, std::size_t> by_key;
  for (const auto& run : per_run_urls) {
    auto& ids = space.item_ids.emplace_back();
    for (const auto& url : run) {
      std::string key;
      try {
        key = normalize_url(url);
      } catch (const MalformedUrl& e) {
        key = std::string(text::trim(url));
        result.warnings.emplace_back(e.what());
      }
      auto [it, inserted] = by_key.emplace(key, space.items.size());
      if (inserted) space.items.push_back(CanonicalItem{it->second, key});
      ids.push_back(it->second);
    }
  }
  finalize_assignments(space);
  return result;
}

std::vector<OutputVector> build_vectors(const CanonicalSpace& space) {
  std::vector<OutputVector> out;
  out.reserve(space.assignments.size());
  for (const auto& ids : space.assignments) {
    if (space.level == Level::Answer && ids.size() == 1) {
      out.push_back(OutputVector::one_hot(ids.front(), space.k()));
    } else {
      out.push_back(OutputVector::indicator(space.level, ids, space.k()));
    }
  }
  return out;
}

}  // namespace runvar
