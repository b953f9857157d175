#pragma once

// Turns a raw agent report into a RunArtifact by querying a judge with the
// claim, decomposition and answer templates.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "runvar/judge.hpp"
#include "runvar/schema.hpp"

namespace runvar {

struct Claim {
  std::string claim;
  std::string context;  // kept for audit only
  std::string source;   // empty when no citation marker follows the claim

  friend bool operator==(const Claim&, const Claim&) = default;
};

struct AnswerExtraction {
  std::string answer;  // may be empty
  std::string supporting_context;
};

struct RunArtifact {
  std::string run_id;
  std::string answer;
  std::vector<Claim> claims;
  std::vector<std::string> findings;
  /// finding_claim[i] is the index of the claim finding i was decomposed from.
  std::vector<std::size_t> finding_claim;
  /// Raw URLs: claim sources first, then URLs scanned from the report text.
  std::vector<std::string> citations;
  std::optional<bool> accuracy;
};

nlohmann::json to_json(const RunArtifact& artifact);

/// One line of a report file.
struct ReportRecord {
  std::string question_id;
  std::string run_id;
  std::string question;
  std::string report;
  std::optional<std::string> gold_answer;
};

/// Parses one JSON line. Throws ConfigError naming the missing field.
ReportRecord parse_report_record(std::string_view line, std::size_t line_number = 0);
std::vector<ReportRecord> read_report_file(const std::string& path);

/// Strict parse with a single repair pass (code fences, surrounding prose,
/// trailing commas). Throws JudgeFormatError with the byte offset in `raw`
/// of the first violation.
nlohmann::json parse_structured_response(std::string_view raw, const SchemaDescriptor& schema);

std::vector<Claim> extract_claims(std::string_view question, std::string_view report,
                                  JudgeTransport& judge);
std::vector<std::string> decompose_atomic(std::string_view claim, JudgeTransport& judge);
AnswerExtraction extract_answer(std::string_view question, std::string_view report,
                                JudgeTransport& judge);
/// Exact match short-circuits; otherwise asks the judge for a yes/no verdict.
bool grade_accuracy(std::string_view extracted, std::string_view gold, JudgeTransport& judge);

/// Parses a yes/no verdict. Throws JudgeFormatError for anything else.
bool parse_verdict(std::string_view raw);

/// http(s) URLs appearing anywhere in `text`, in order of appearance.
std::vector<std::string> scan_urls(std::string_view text);

struct ExtractionOptions {
  /// Maximum number of concurrent decomposition requests.
  int max_in_flight = 4;
};

/// Full extraction for one report. The result depends only on the judge's
/// answers, never on request completion order.
RunArtifact extract_run(const ReportRecord& record, JudgeTransport& judge,
                        const ExtractionOptions& options = {});

}  // namespace runvar
