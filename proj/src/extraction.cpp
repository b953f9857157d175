#include "runvar/extraction.hpp"

#include <fstream>
#include <regex>
#include <stdexcept>

#include "runvar/error.hpp"
#include "runvar/parallel.hpp"
#include "runvar/prompts.hpp"
#include "runvar/text.hpp"

namespace runvar {

using nlohmann::json;

namespace {

// Text after the repair pass, with the offset in the original text of every
// retained byte.
struct Repaired {
  std::string text;
  std::vector<std::size_t> origin;
};

Repaired repair(std::string_view raw) {
  std::string_view body = raw;
  std::size_t base = 0;
  if (const auto fence = raw.find("```"); fence != std::string_view::npos) {
    const auto line_end = raw.find('\n', fence);
    if (line_end != std::string_view::npos) {
      const auto close = raw.find("```", line_end + 1);
      body = raw.substr(line_end + 1,
                        close == std::string_view::npos ? std::string_view::npos
                                                        : close - (line_end + 1));
      base = line_end + 1;
    }
  }
  if (const auto open = body.find_first_of("[{"); open != std::string_view::npos) {
    const char closer = body[open] == '[' ? ']' : '}';
    const auto close = body.rfind(closer);
    const std::size_t len =
        (close == std::string_view::npos || close < open) ? std::string_view::npos : close - open + 1;
    body = body.substr(open, len);
    base += open;
  }

  Repaired out;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < body.size() && std::isspace(static_cast<unsigned char>(body[j]))) ++j;
      if (j < body.size() && (body[j] == ']' || body[j] == '}')) continue;  // trailing comma
    }
    out.text.push_back(c);
    out.origin.push_back(base + i);
  }
  return out;
}

/// Offsets of the top-level elements of a JSON array (or of the top-level
/// value itself when it is not an array).
std::vector<std::size_t> element_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  std::size_t p = 0;
  while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
  if (p >= s.size()) return offsets;
  if (s[p] != '[') return {p};
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  bool expect_element = false;
  for (std::size_t i = p; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (expect_element && !std::isspace(static_cast<unsigned char>(c)) && c != ']') {
      offsets.push_back(i);
      expect_element = false;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
      if (depth == 1) expect_element = true;
    } else if (c == ']' || c == '}') {
      --depth;
    } else if (c == ',' && depth == 1) {
      expect_element = true;
    }
  }
  return offsets;
}

json validate_or_throw(json value, std::string_view parsed_text, std::string_view raw,
                       const SchemaDescriptor& schema,
                       const std::vector<std::size_t>* origin) {
  const auto issue = find_schema_issue(value, schema);
  if (!issue) return value;
  std::size_t offset = 0;
  const auto offsets = element_offsets(parsed_text);
  if (issue->element && *issue->element < offsets.size()) {
    offset = offsets[*issue->element];
  } else if (!offsets.empty()) {
    offset = offsets.front();
  }
  if (origin != nullptr && offset < origin->size()) offset = (*origin)[offset];
  throw JudgeFormatError("schema '" + schema.name + "' violated at " + issue->path + ": " +
                             issue->message,
                         std::string(raw), offset);
}

std::size_t parse_error_offset(const json::parse_error& e, std::size_t size) {
  if (size == 0) return 0;
  const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
  return std::min(at, size - 1);
}

std::string string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? std::string{} : it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ConfigError("line " + std::to_string(line) + "." + key, "expected string");
  }
  return it->get<std::string>();
}

}  // namespace

json to_json(const RunArtifact& a) {
  json claims = json::array();
  for (const auto& c : a.claims) {
    claims.push_back(json{{"claim", c.claim}, {"context", c.context}, {"source", c.source}});
  }
  return json{
      {"run_id", a.run_id},
      {"answer", a.answer},
      {"claims", claims},
      {"findings", a.findings},
      {"finding_claim", a.finding_claim},
      {"citations", a.citations},
      {"accuracy", a.accuracy ? json(*a.accuracy) : json(nullptr)},
  };
}

ReportRecord parse_report_record(std::string_view line, std::size_t line_number) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ConfigError("line " + std::to_string(line_number), std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ConfigError("line " + std::to_string(line_number), "expected object");
  ReportRecord r;
  auto required = [&](const char* key) {
    auto v = optional_string(obj, key, line_number);
    if (!v) throw ConfigError("line " + std::to_string(line_number) + "." + key, "missing field");
    return *v;
  };
  r.question_id = required("question_id");
  r.run_id = required("run_id");
  r.question = required("question");
  r.report = required("report");
  r.gold_answer = optional_string(obj, "gold_answer", line_number);
  return r;
}

std::vector<ReportRecord> read_report_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("reports", "cannot open '" + path + "'");
  std::vector<ReportRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    out.push_back(parse_report_record(line, n));
  }
  return out;
}

json parse_structured_response(std::string_view raw, const SchemaDescriptor& schema) {
  try {
    return validate_or_throw(json::parse(raw), raw, raw, schema, nullptr);
  } catch (const json::parse_error&) {
    // fall through to the repair pass
  }
  const auto repaired = repair(raw);
  json value;
  try {
    value = json::parse(repaired.text);
  } catch (const json::parse_error& e) {
    std::size_t offset = 0;
    if (!repaired.origin.empty()) {
      offset = repaired.origin[parse_error_offset(e, repaired.origin.size())];
    }
    throw JudgeFormatError("judge output is not valid JSON after repair", std::string(raw), offset);
  }
  return validate_or_throw(std::move(value), repaired.text, raw, schema, &repaired.origin);
}

std::vector<Claim> extract_claims(std::string_view question, std::string_view report,
                                  JudgeTransport& judge) {
  if (text::trim(report).empty()) throw std::invalid_argument("extract_claims: empty report");
  const auto raw = judge.complete(prompts::claim_extraction(question, report));
  const auto parsed = parse_structured_response(raw, claims_schema());
  std::vector<Claim> claims;
  claims.reserve(parsed.size());
  for (const auto& c : parsed) {
    claims.push_back(Claim{c.at("claim").get<std::string>(), string_field(c, "context"),
                           string_field(c, "source")});
  }
  return claims;
}

std::vector<std::string> decompose_atomic(std::string_view claim, JudgeTransport& judge) {
  if (text::trim(claim).empty()) throw std::invalid_argument("decompose_atomic: empty claim");
  const auto raw = judge.complete(prompts::atomic_decomposition(claim));
  return parse_structured_response(raw, atomic_facts_schema()).get<std::vector<std::string>>();
}

AnswerExtraction extract_answer(std::string_view question, std::string_view report,
                                JudgeTransport& judge) {
  if (text::trim(question).empty()) throw std::invalid_argument("extract_answer: empty question");
  const auto raw = judge.complete(prompts::answer_extraction(question, report));
  const auto parsed = parse_structured_response(raw, answer_schema());
  return AnswerExtraction{parsed.at("answer").get<std::string>(),
                          string_field(parsed, "supporting_context")};
}

bool parse_verdict(std::string_view raw) {
  std::string v = text::normalize(raw);
  while (!v.empty() && !std::isalpha(static_cast<unsigned char>(v.front()))) v.erase(v.begin());
  if (v.rfind("yes", 0) == 0) return true;
  if (v.rfind("no", 0) == 0) return false;
  throw JudgeFormatError("expected a yes/no verdict", std::string(raw), 0);
}

bool grade_accuracy(std::string_view extracted, std::string_view gold, JudgeTransport& judge) {
  if (text::trim(gold).empty()) throw std::invalid_argument("grade_accuracy: empty gold answer");
  if (text::trim(extracted) == text::trim(gold)) return true;
  if (text::trim(extracted).empty()) return false;
  return parse_verdict(judge.complete(prompts::answer_equivalence(extracted, gold)));
}

std::vector<std::string> scan_urls(std::string_view text) {
  static const std::regex url_re(R"(https?://[^\s<>"'\)\]]+)", std::regex::icase);
  std::vector<std::string> urls;
  const std::string s(text);
  for (std::sregex_iterator it(s.begin(), s.end(), url_re), end; it != end; ++it) {
    std::string url = it->str();
    while (!url.empty() && std::string_view(".,;:!?").find(url.back()) != std::string_view::npos) {
      url.pop_back();
    }
    urls.push_back(std::move(url));
  }
  return urls;
}

RunArtifact extract_run(const ReportRecord& record, JudgeTransport& judge,
                        const ExtractionOptions& options) {
  RunArtifact artifact;
  artifact.run_id = record.run_id;
  if (text::trim(record.report).empty()) return artifact;

  artifact.claims = extract_claims(record.question, record.report, judge);

  std::vector<std::vector<std::string>> per_claim(artifact.claims.size());
  parallel_for(artifact.claims.size(), static_cast<std::size_t>(std::max(1, options.max_in_flight)),
               [&](std::size_t i) { per_claim[i] = decompose_atomic(artifact.claims[i].claim, judge); });
  for (std::size_t i = 0; i < per_claim.size(); ++i) {
    for (auto& f : per_claim[i]) {
      artifact.findings.push_back(std::move(f));
      artifact.finding_claim.push_back(i);
    }
  }

  artifact.answer = extract_answer(record.question, record.report, judge).answer;

  for (const auto& c : artifact.claims) {
    if (!text::trim(c.source).empty()) artifact.citations.emplace_back(text::trim(c.source));
  }
  for (auto& url : scan_urls(record.report)) artifact.citations.push_back(std::move(url));

  if (record.gold_answer && !text::trim(*record.gold_answer).empty()) {
    artifact.accuracy = grade_accuracy(artifact.answer, *record.gold_answer, judge);
  }
  return artifact;
}

}  // namespace runvar
