#include "runvar/table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "runvar/error.hpp"

namespace runvar {

namespace {

bool needs_quotes(std::string_view cell) {
  return cell.find_first_of(",\"\n\r") != std::string_view::npos;
}

void write_cell(std::string& out, std::string_view cell) {
  if (!needs_quotes(cell)) {
    out += cell;
    return;
  }
  out += '"';
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void write_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    write_cell(out, cells[i]);
  }
  out += '\n';
}

std::vector<std::vector<std::string>> parse_records(std::string_view csv) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool quoted = false, any = false;
  std::size_t line = 1;
  auto end_record = [&] {
    record.push_back(std::move(cell));
    cell.clear();
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
    any = false;
  };
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < csv.size() && csv[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cell += c;
      }
      continue;
    }
    any = true;
    switch (c) {
      case '"':
        quoted = true;
        break;
      case ',':
        record.push_back(std::move(cell));
        cell.clear();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        cell += c;
    }
  }
  if (quoted) throw ConfigError(fmt::format("line {}", line), "unterminated quoted cell");
  if (any || !cell.empty() || !record.empty()) end_record();
  return records;
}

std::optional<double> parse_number(std::string_view s) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return x;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs) out += (out.empty() ? "" : ", ") + x;
  return out;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw ConfigError(std::string(name), "unknown column; valid columns are " + join(columns));
  }
  return static_cast<std::size_t>(it - columns.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::string Table::to_csv() const {
  std::string out;
  write_line(out, columns);
  for (const auto& row : rows) write_line(out, row);
  return out;
}

Table Table::from_csv(std::string_view csv) {
  auto records = parse_records(csv);
  if (records.empty()) throw ConfigError("header", "table has no header line");
  Table t;
  t.columns = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.columns.size()) {
      throw ConfigError(fmt::format("row {}", r),
                        fmt::format("expected {} cells, found {}", t.columns.size(), records[r].size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

Table Table::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open table file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

std::string format_number(double x) { return fmt::format("{}", x); }

Table aggregate(const Table& input, const std::vector<std::string>& group_by) {
  std::vector<std::size_t> keys;
  for (const auto& k : group_by) {
    if (!input.has_column(k)) {
      throw ConfigError("group_by." + k, "unknown group key; valid keys are " + join(input.columns));
    }
    keys.push_back(input.column(k));
  }

  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < input.columns.size(); ++c) {
    if (std::find(keys.begin(), keys.end(), c) != keys.end()) continue;
    const bool all_numeric = std::all_of(input.rows.begin(), input.rows.end(), [&](const auto& row) {
      return row[c] == "null" || parse_number(row[c]).has_value();
    });
    if (all_numeric && !input.rows.empty()) numeric.push_back(c);
  }
  const bool derive_avg = input.has_column("tv_answer") && input.has_column("tv_finding") &&
                          input.has_column("tv_citation") && !input.has_column("avg_tv");

  struct Accumulator {
    std::vector<long double> sum;
    std::vector<std::size_t> count;
    std::size_t rows = 0;
  };
  std::vector<std::vector<std::string>> order;
  std::map<std::vector<std::string>, Accumulator> groups;
  const std::size_t n_out = numeric.size() + (derive_avg ? 1 : 0);
  for (const auto& row : input.rows) {
    std::vector<std::string> key;
    for (std::size_t k : keys) key.push_back(row[k]);
    auto [it, inserted] = groups.try_emplace(key, Accumulator{std::vector<long double>(n_out, 0.0L),
                                                              std::vector<std::size_t>(n_out, 0)});
    if (inserted) order.push_back(key);
    auto& acc = it->second;
    ++acc.rows;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      if (const auto x = parse_number(row[numeric[i]])) {
        acc.sum[i] += *x;
        ++acc.count[i];
      }
    }
    if (derive_avg) {
      const auto a = parse_number(row[input.column("tv_answer")]);
      const auto f = parse_number(row[input.column("tv_finding")]);
      const auto c = parse_number(row[input.column("tv_citation")]);
      if (a && f && c) {
        acc.sum.back() += (*a + *f + *c) / 3.0;
        ++acc.count.back();
      }
    }
  }

  Table out;
  out.columns = group_by;
  for (std::size_t c : numeric) out.columns.push_back(input.columns[c]);
  if (derive_avg) out.columns.push_back("avg_tv");
  out.columns.push_back("n_rows");
  for (const auto& key : order) {
    const auto& acc = groups.at(key);
    std::vector<std::string> row = key;
    for (std::size_t i = 0; i < n_out; ++i) {
      row.push_back(acc.count[i] ? format_number(static_cast<double>(acc.sum[i] / acc.count[i])) : "null");
    }
    row.push_back(std::to_string(acc.rows));
    out.rows.push_back(std::move(row));
  }
  return out;
}

Table ResultsTable::to_table() const {
  Table t;
  t.columns = key_columns;
  t.columns.insert(t.columns.end(), kMetricColumns.begin(), kMetricColumns.end());
  for (const auto& r : rows) {
    if (r.keys.size() != key_columns.size()) {
      throw DimensionMismatch(fmt::format("row has {} keys, table has {}", r.keys.size(), key_columns.size()));
    }
    auto cells = r.keys;
    for (double x : {r.tv_answer, r.tv_finding, r.tv_citation, r.support_tv_finding, r.support_tv_citation,
                     r.mean_findings, r.mean_citations}) {
      cells.push_back(format_number(x));
    }
    cells.push_back(r.accuracy ? format_number(*r.accuracy) : "null");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

ResultsTable ResultsTable::from_table(const Table& table) {
  const std::size_t n_metrics = kMetricColumns.size();
  if (table.columns.size() < n_metrics ||
      !std::equal(kMetricColumns.begin(), kMetricColumns.end(), table.columns.end() - n_metrics)) {
    throw ConfigError("header", "results tables end with the columns " + join(kMetricColumns));
  }
  ResultsTable out;
  const std::size_t n_keys = table.columns.size() - n_metrics;
  out.key_columns.assign(table.columns.begin(), table.columns.begin() + n_keys);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    auto number = [&](std::size_t c) {
      const auto x = parse_number(cells[c]);
      if (!x) throw ConfigError(fmt::format("row {}.{}", r + 1, table.columns[c]), "not a number: " + cells[c]);
      return *x;
    };
    ResultRow row;
    row.keys.assign(cells.begin(), cells.begin() + n_keys);
    row.tv_answer = number(n_keys);
    row.tv_finding = number(n_keys + 1);
    row.tv_citation = number(n_keys + 2);
    row.support_tv_finding = number(n_keys + 3);
    row.support_tv_citation = number(n_keys + 4);
    row.mean_findings = number(n_keys + 5);
    row.mean_citations = number(n_keys + 6);
    if (cells[n_keys + 7] != "null") row.accuracy = number(n_keys + 7);
    out.rows.push_back(std::move(row));
  }
  return out;
}

ResultRow make_row(std::vector<std::string> keys, const TvResult& answer, const TvResult& finding,
                   const TvResult& citation, std::optional<double> accuracy) {
  ResultRow r;
  r.keys = std::move(keys);
  r.tv_answer = answer.tv;
  r.tv_finding = finding.tv;
  r.tv_citation = citation.tv;
  r.support_tv_finding = finding.support_tv;
  r.support_tv_citation = citation.support_tv;
  r.mean_findings = finding.mean_support;
  r.mean_citations = citation.mean_support;
  r.accuracy = accuracy;
  return r;
}

ResultRow average_row(const std::vector<ResultRow>& rows, std::vector<std::string> keys) {
  ResultRow out;
  out.keys = std::move(keys);
  if (rows.empty()) return out;
  long double s[7] = {};
  long double acc = 0.0L;
  std::size_t n_acc = 0;
  for (const auto& r : rows) {
    const double xs[7] = {r.tv_answer,           r.tv_finding,    r.tv_citation,   r.support_tv_finding,
                          r.support_tv_citation, r.mean_findings, r.mean_citations};
    for (int i = 0; i < 7; ++i) s[i] += xs[i];
    if (r.accuracy) {
      acc += *r.accuracy;
      ++n_acc;
    }
  }
  const long double n = static_cast<long double>(rows.size());
  double* fields[7] = {&out.tv_answer,           &out.tv_finding,    &out.tv_citation,   &out.support_tv_finding,
                       &out.support_tv_citation, &out.mean_findings, &out.mean_citations};
  for (int i = 0; i < 7; ++i) *fields[i] = static_cast<double>(s[i] / n);
  if (n_acc) out.accuracy = static_cast<double>(acc / n_acc);
  return out;
}

}  // namespace runvar
