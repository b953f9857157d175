#pragma once

#include <string>
#include <string_view>

namespace runvar::prompts {

/// Bumped whenever any template text changes; recorded in run metadata.
inline constexpr std::string_view kVersion = "prompts-v1";

std::string_view claim_extraction_template();
std::string_view atomic_decomposition_template();
std::string_view answer_extraction_template();

/// Headings that delimit the inputs appended to a template.
inline constexpr std::string_view kQuestionHeading = "## Research Question\n";
inline constexpr std::string_view kReportHeading = "## Report\n";

std::string claim_extraction(std::string_view question, std::string_view report);
std::string atomic_decomposition(std::string_view claim);
std::string answer_extraction(std::string_view question, std::string_view report);

// Equivalence prompts. These are local definitions, not published templates.
inline constexpr std::string_view kAnswerEquivalenceLead =
    "Do these two answers refer to the same entity/value? Reply yes/no.";
inline constexpr std::string_view kFindingEquivalenceLead =
    "Do these two findings express the same underlying fact? Reply yes/no.";

std::string answer_equivalence(std::string_view a, std::string_view b);
std::string finding_equivalence(std::string_view a, std::string_view b);

}  // namespace runvar::prompts
