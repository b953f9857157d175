#include "runvar/prompts.hpp"

#include <fmt/format.h>

namespace runvar::prompts {

namespace {

// Template texts. Do not edit without bumping kVersion.

constexpr std::string_view kClaimExtraction = R"PROMPT(
## Task Description
Extract all factual claims from the provided report. Each claim should be a factual statement that
can be verified. Claims may or may not have supporting citations.

## Input
A Research Question and a complete report containing factual claims, some of which may have
citation markers and corresponding URLs (either inline or in a reference section).

## Output Requirements
- Extract each distinct factual claim throughout the entire report
- For each claim, output a JSON object with:
  - The exact claim text as a string
  - The original text from the report containing this claim (context)
  - The corresponding citation URL as source (if a citation marker directly follows the claim)
- If a claim has a citation marker directly following it, return the supporting URL as source
- If a claim does not have a citation marker directly following it, return an empty string for source
- Ensure all string values are properly escaped for valid JSON format (e.g., Replace internal quotation
  marks (") with escaped quotation marks (\\")) in the claim and context
- Return a JSON array containing all claim objects

## Format Specification
[
  {
    "claim": "The exact statement representing a factual claim",
    "context": "The original sentence or passage from the report containing this claim",
    "source": "https://example.com/source1"
  },
  {
    "claim": "Another factual statement without direct citation",
    "context": "The original sentence or passage from the report containing this claim",
    "source": ""
  }
]

## Guidelines for Claim Identification
1. A claim should be a complete, standalone factual statement
2. Maintain the original wording where possible, but remove unnecessary context
3. Extract all factual claims regardless of whether they have citation support
4. Only map citation markers (numbers, author names, etc.) to their corresponding URLs in
   the references section when the marker directly follows the claim statement
5. Exclude opinions, speculations, or methodological descriptions
6. Extract the context passage containing each claim for verification purposes
7. If multiple claims are associated with the same citation, extract them as separate entries

## Citation URL Mapping
- If URLs appear directly after claims, use those URLs directly
- Citation markers (e.g., a number or [number]) must directly follow the claim to be considered
  as supporting that claim
- If claims use citation markers that reference a bibliography or reference section, locate the corresponding
  URLs in that section
- If a claim has no directly following citation marker, use an empty string for source
)PROMPT";

constexpr std::string_view kAtomicDecomposition = R"PROMPT(You are given a factual statement (a claim) from a technical report.
Break the claim down into independent, minimal atomic facts that can each be
verified in isolation. Keep each atomic fact short, declarative, and free of
conjunctions when possible. Avoid duplicating the same content in multiple ways
unless it clarifies distinct atomic facts (e.g., subject + membership vs subject + role).

Format:
- Return a JSON array of strings. Each string is one atomic fact.
- Do not include any extra commentary or Markdown. Only return the JSON array.

Examples:
Input: "He was an American composer, conductor, and musical director."
Output: [
  "He was an American.",
  "He was a composer.",
  "He was a conductor.",
  "He was a musical director."
]

Input: "She currently stars in the romantic comedy series, Love and Destiny, which premiered in 2019."
Output: [
  "She currently stars in Love and Destiny.",
  "Love and Destiny is a romantic comedy series.",
  "Love and Destiny premiered in 2019."
]

Input: "During his professional career, McCoy played for the Broncos, the San Diego Chargers, the Minnesota Vikings, and the Jacksonville Jaguars."
Output: [
  "McCoy played for the Broncos.",
  "McCoy played for the Broncos during his professional career.",
  "McCoy played for the San Diego Chargers.",
  "McCoy played for the San Diego Chargers during his professional career.",
  "McCoy played for the Minnesota Vikings.",
  "McCoy played for the Minnesota Vikings during his professional career.",
  "McCoy played for the Jacksonville Jaguars.",
  "McCoy played for the Jacksonville Jaguars during his professional career."
]

Input: "The EU approved the AI Act in 2024 and introduced new compliance requirements."
Output: [
  "The EU approved the AI Act in 2024.",
  "The AI Act introduced new compliance requirements."
]

Input: "The Amazon River is the largest by discharge and flows into the Atlantic Ocean."
Output: [
  "The Amazon River is the largest river by discharge.",
  "The Amazon River flows into the Atlantic Ocean."
]

Now decompose the following claim into atomic facts and return only a JSON array of strings:)PROMPT";

constexpr std::string_view kAnswerExtraction = R"PROMPT(## Task Description
Extract the answer to the research question from the provided report.

## Input
A Research Question and a complete report containing the answer.

## Output Requirements
Extract the direct answer to the research question
Provide supporting evidence/context from the report
Return a JSON object with the answer and supporting context

## Format Specification
{
  "question": "The research question",
  "answer": "The direct answer extracted from the report",
  "supporting_context": "Key passages from the report that support this answer"
}

## Guidelines
1. Focus on directly answering the research question
2. Be concise but comprehensive
3. Include relevant evidence and context
4. Maintain factual accuracy)PROMPT";

std::string with_inputs(std::string_view tmpl, std::string_view question, std::string_view report) {
  const std::string_view gap = tmpl.ends_with('\n') ? "\n" : "\n\n";
  return fmt::format("{}{}{}{}\n\n{}{}\n", tmpl, gap, kQuestionHeading, question, kReportHeading, report);
}

}  // namespace

std::string_view claim_extraction_template() { return kClaimExtraction; }
std::string_view atomic_decomposition_template() { return kAtomicDecomposition; }
std::string_view answer_extraction_template() { return kAnswerExtraction; }

std::string claim_extraction(std::string_view question, std::string_view report) {
  return with_inputs(kClaimExtraction, question, report);
}

std::string atomic_decomposition(std::string_view claim) {
  return fmt::format("{}\n{}\n", kAtomicDecomposition, claim);
}

std::string answer_extraction(std::string_view question, std::string_view report) {
  return with_inputs(kAnswerExtraction, question, report);
}

std::string answer_equivalence(std::string_view a, std::string_view b) {
  return fmt::format("{}\nAnswer A: {}\nAnswer B: {}\n", kAnswerEquivalenceLead, a, b);
}

std::string finding_equivalence(std::string_view a, std::string_view b) {
  return fmt::format("{}\nFinding A: {}\nFinding B: {}\n", kFindingEquivalenceLead, a, b);
}

}  // namespace runvar::prompts
