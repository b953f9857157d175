#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "runvar/canonical.hpp"
#include "runvar/error.hpp"
#include "runvar/text.hpp"

namespace runvar {

namespace {

bool is_tracking_param(std::string_view name) {
  const auto lower = text::to_lower(name);
  return lower.rfind("utm_", 0) == 0 || lower == "gclid" || lower == "fbclid";
}

bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
  });
}

}  // namespace

std::string normalize_url(std::string_view raw) {
  const std::string_view url = text::trim(raw);
  if (url.empty()) throw MalformedUrl(std::string(raw), "empty");
  if (std::any_of(url.begin(), url.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    throw MalformedUrl(std::string(raw), "contains whitespace");
  }

  const auto sep = url.find("://");
  if (sep == std::string_view::npos) throw MalformedUrl(std::string(raw), "missing scheme");
  const std::string scheme = text::to_lower(url.substr(0, sep));
  if (!valid_scheme(scheme)) throw MalformedUrl(std::string(raw), "invalid scheme");

  std::string_view rest = url.substr(sep + 3);
  rest = rest.substr(0, rest.find('#'));

  const auto authority_end = rest.find_first_of("/?");
  const std::string_view authority = rest.substr(0, authority_end);
  std::string_view path_and_query =
      authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);

  std::string userinfo;
  std::string_view hostport = authority;
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    userinfo = std::string(authority.substr(0, at + 1));
    hostport = authority.substr(at + 1);
  }

  std::string_view host = hostport;
  std::string_view port;
  if (!hostport.empty() && hostport.front() == '[') {
    const auto close = hostport.find(']');
    if (close == std::string_view::npos) throw MalformedUrl(std::string(raw), "unterminated IPv6 host");
    host = hostport.substr(0, close + 1);
    const auto tail = hostport.substr(close + 1);
    if (!tail.empty()) {
      if (tail.front() != ':') throw MalformedUrl(std::string(raw), "junk after IPv6 host");
      port = tail.substr(1);
    }
  } else if (const auto colon = hostport.rfind(':'); colon != std::string_view::npos) {
    host = hostport.substr(0, colon);
    port = hostport.substr(colon + 1);
  }
  if (host.empty()) throw MalformedUrl(std::string(raw), "missing host");
  if (!std::all_of(port.begin(), port.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw MalformedUrl(std::string(raw), "non-numeric port");
  }

  std::string out = scheme + "://" + userinfo + text::to_lower(host);
  const bool default_port = (scheme == "http" && port == "80") || (scheme == "https" && port == "443");
  if (!port.empty() && !default_port) {
    out += ':';
    out += port;
  }

  const auto qmark = path_and_query.find('?');
  std::string_view path = path_and_query.substr(0, qmark);
  while (!path.empty() && path.back() == '/') path.remove_suffix(1);
  out += path;

  if (qmark != std::string_view::npos) {
    std::vector<std::string> params;
    std::string_view query = path_and_query.substr(qmark + 1);
    while (true) {
      const auto amp = query.find('&');
      const auto param = query.substr(0, amp);
      const auto name = param.substr(0, param.find('='));
      if (!param.empty() && !is_tracking_param(name)) params.emplace_back(param);
      if (amp == std::string_view::npos) break;
      query.remove_prefix(amp + 1);
    }
    std::stable_sort(params.begin(), params.end(), [](const std::string& a, const std::string& b) {
      return std::string_view(a).substr(0, a.find('=')) < std::string_view(b).substr(0, b.find('='));
    });
    for (std::size_t i = 0; i < params.size(); ++i) {
      out += i == 0 ? '?' : '&';
      out += params[i];
    }
  }
  return out;
}

}  // namespace runvar
