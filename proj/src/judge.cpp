#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "runvar/judge.hpp"

#include <cstdlib>
#include <map>
#include <regex>
#include <thread>

#include "runvar/error.hpp"
#include "runvar/prompts.hpp"
#include "runvar/text.hpp"

namespace runvar {

using nlohmann::json;

json chat_request_body(std::string_view model, std::string_view prompt) {
  return json{
      {"model", std::string(model)},
      {"messages", json::array({json{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", 0},
      {"top_p", 1},
      {"n", 1},
  };
}

std::string chat_response_content(std::string_view body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    throw JudgeFormatError("judge response is not JSON", std::string(body),
                           e.byte > 0 ? e.byte - 1 : 0);
  }
  const auto* content = [&]() -> const json* {
    if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty()) {
      return nullptr;
    }
    const auto& choice = parsed["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content")) return nullptr;
    return &choice["message"]["content"];
  }();
  if (content == nullptr || !content->is_string()) {
    throw JudgeFormatError("judge response lacks choices[0].message.content", std::string(body), 0);
  }
  return content->get<std::string>();
}

// ---------------------------------------------------------------------------
// HttpJudge

HttpJudge::HttpJudge(JudgeSettings settings) : settings_(std::move(settings)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(settings_.endpoint, m, url_re)) {
    throw ConfigError("judge.endpoint", "expected http(s)://host[:port]/path, got '" +
                                            settings_.endpoint + "'");
  }
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
  if (!settings_.token_env.empty()) {
    if (const char* token = std::getenv(settings_.token_env.c_str())) token_ = token;
  }
}

std::string HttpJudge::complete(std::string_view prompt) {
  const std::string body = chat_request_body(settings_.model, prompt).dump();
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(settings_.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(settings_.timeout - secs);
  std::string last_error;
  const int attempts = std::max(1, settings_.max_retries + 1);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
    httplib::Client client(base_);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return chat_response_content(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status >= 400 && res->status < 500 && res->status != 408 && res->status != 429) {
      break;  // client errors are not transient
    }
  }
  throw OracleUnavailable("judge at " + settings_.endpoint + " unavailable: " + last_error);
}

// ---------------------------------------------------------------------------
// RuleBasedJudge

namespace {

struct ReportParts {
  std::vector<std::string> body;  // lines that are neither references nor the answer line
  std::map<std::string, std::string> references;
  std::string answer_line;
};

std::string_view after(std::string_view s, std::string_view marker) {
  const auto pos = s.find(marker);
  return pos == std::string_view::npos ? std::string_view{} : s.substr(pos + marker.size());
}

/// Splits the prompt inputs appended after a template.
std::pair<std::string, std::string> question_and_report(std::string_view prompt) {
  const auto q_and_rest = after(prompt, prompts::kQuestionHeading);
  const auto report_pos = q_and_rest.find(prompts::kReportHeading);
  const auto question = text::trim(q_and_rest.substr(0, report_pos));
  const auto report = report_pos == std::string_view::npos
                          ? std::string_view{}
                          : q_and_rest.substr(report_pos + prompts::kReportHeading.size());
  return {std::string(question), std::string(text::trim(report))};
}

ReportParts split_report(std::string_view report) {
  static const std::regex ref_re(R"(^\s*\[(\d+)\]\s*(\S+)\s*$)");
  ReportParts parts;
  for (const auto& line : text::split_lines(report)) {
    std::smatch m;
    const auto trimmed = text::trim(line);
    if (std::regex_match(line, m, ref_re)) {
      parts.references[m[1].str()] = m[2].str();
    } else if (text::starts_with_icase(trimmed, "answer:")) {
      parts.answer_line = std::string(trimmed);
    } else if (text::to_lower(trimmed) == "references" || trimmed.starts_with('#')) {
      continue;  // headings carry no claims
    } else if (!trimmed.empty()) {
      parts.body.emplace_back(trimmed);
    }
  }
  return parts;
}

std::vector<std::string> sentences(const std::vector<std::string>& lines) {
  std::string joined;
  for (const auto& l : lines) {
    if (!joined.empty()) joined.push_back(' ');
    joined += l;
  }
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < joined.size(); ++i) {
    current.push_back(joined[i]);
    const char c = joined[i];
    const bool boundary = (c == '.' || c == '!' || c == '?') &&
                          (i + 1 == joined.size() || joined[i + 1] == ' ');
    if (boundary) {
      if (auto t = text::trim(current); !t.empty()) out.emplace_back(t);
      current.clear();
    }
  }
  if (auto t = text::trim(current); !t.empty()) out.emplace_back(t);
  return out;
}

std::string collapse(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : text::trim(s)) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

json claims_for(std::string_view report) {
  static const std::regex trailing_markers_re(R"(((\s*\[\d+\])+)\s*([.!?]?)$)");
  static const std::regex marker_re(R"(\[(\d+)\])");
  static const std::regex url_re(R"(\(?\s*(https?://[^\s\)\]]+)\s*\)?)");
  const auto parts = split_report(report);
  json claims = json::array();
  for (const auto& sentence : sentences(parts.body)) {
    std::string source;
    std::string claim = sentence;
    std::smatch m;
    if (std::regex_search(sentence, m, trailing_markers_re)) {
      std::smatch first;
      const std::string markers = m[1].str();
      if (std::regex_search(markers, first, marker_re)) {
        if (auto it = parts.references.find(first[1].str()); it != parts.references.end()) {
          source = it->second;
        }
      }
      claim = sentence.substr(0, static_cast<std::size_t>(m.position(0))) + m[3].str();
    }
    if (std::regex_search(claim, m, url_re)) {
      std::string url = m[1].str();
      while (!url.empty() && (url.back() == '.' || url.back() == ',')) url.pop_back();
      if (source.empty()) source = url;
      claim = std::regex_replace(claim, url_re, "");
    }
    claim = collapse(std::regex_replace(claim, marker_re, ""));
    while (!claim.empty() && (claim.back() == ' ' || claim.back() == ',')) claim.pop_back();
    if (!claim.empty() && claim.back() != '.' && claim.back() != '!' && claim.back() != '?') {
      claim.push_back('.');
    }
    if (claim.size() <= 1) continue;
    claims.push_back(json{{"claim", claim}, {"context", sentence}, {"source", source}});
  }
  return claims;
}

json atomic_facts_for(std::string_view claim) {
  std::string body(text::trim(claim));
  while (!body.empty() && (body.back() == '.' || body.back() == '!' || body.back() == '?')) {
    body.pop_back();
  }
  static const std::regex split_re(R"(,\s+and\s+|;\s+|\s+and\s+)");
  json facts = json::array();
  std::sregex_token_iterator it(body.begin(), body.end(), split_re, -1), end;
  for (; it != end; ++it) {
    std::string piece = collapse(it->str());
    if (piece.empty()) continue;
    piece[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(piece[0])));
    facts.push_back(piece + ".");
  }
  if (facts.empty() && !body.empty()) facts.push_back(body + ".");
  return facts;
}

json answer_for(std::string_view question, std::string_view report) {
  const auto parts = split_report(report);
  std::string answer;
  std::string context;
  if (!parts.answer_line.empty()) {
    context = parts.answer_line;
    answer = std::string(text::trim(std::string_view(parts.answer_line).substr(7)));
  } else {
    for (const auto& s : sentences(parts.body)) {
      const auto lower = text::to_lower(s);
      const auto pos = lower.find("the answer is ");
      if (pos == std::string::npos) continue;
      answer = s.substr(pos + 14);
      context = s;
      break;
    }
  }
  while (!answer.empty() && (answer.back() == '.' || answer.back() == ' ')) answer.pop_back();
  return json{{"question", std::string(question)}, {"answer", answer}, {"supporting_context", context}};
}

std::string equivalence_verdict(std::string_view prompt, std::string_view label) {
  std::string a;
  std::string b;
  for (const auto& line : text::split_lines(prompt)) {
    if (line.rfind(std::string(label) + " A: ", 0) == 0) a = line.substr(label.size() + 4);
    if (line.rfind(std::string(label) + " B: ", 0) == 0) b = line.substr(label.size() + 4);
  }
  return text::normalize(a) == text::normalize(b) ? "yes" : "no";
}

bool has_prefix(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

}  // namespace

std::string RuleBasedJudge::complete(std::string_view prompt) {
  if (has_prefix(prompt, prompts::claim_extraction_template())) {
    return claims_for(question_and_report(prompt).second).dump(2);
  }
  if (has_prefix(prompt, prompts::atomic_decomposition_template())) {
    return atomic_facts_for(prompt.substr(prompts::atomic_decomposition_template().size())).dump(2);
  }
  if (has_prefix(prompt, prompts::answer_extraction_template())) {
    const auto [question, report] = question_and_report(prompt);
    return answer_for(question, report).dump(2);
  }
  if (has_prefix(prompt, prompts::kAnswerEquivalenceLead)) return equivalence_verdict(prompt, "Answer");
  if (has_prefix(prompt, prompts::kFindingEquivalenceLead)) return equivalence_verdict(prompt, "Finding");
  return "Unrecognized request.";
}

// ---------------------------------------------------------------------------

ThrottledJudge::ThrottledJudge(JudgeTransport& inner, int max_in_flight)
    : inner_(inner), slots_(std::max(1, max_in_flight)) {}

std::string ThrottledJudge::complete(std::string_view prompt) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_.complete(prompt);
}

std::unique_ptr<JudgeTransport> make_judge(const JudgeSettings& settings) {
  if (settings.endpoint == "mock") return std::make_unique<RuleBasedJudge>();
  return std::make_unique<HttpJudge>(settings);
}

}  // namespace runvar
