#pragma once

// Comma-separated result tables and grouped means over them.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "runvar/metrics.hpp"

namespace runvar {

/// A header plus rows of raw cell text.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Throws ConfigError naming the valid columns.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  std::string to_csv() const;
  static Table from_csv(std::string_view csv);
  static Table read(const std::string& path);

  friend bool operator==(const Table&, const Table&) = default;
};

/// Shortest text that parses back to exactly `x`.
std::string format_number(double x);

/// Grouped means. Key columns come first, in the order given; every other
/// column that holds only numbers (or "null") is averaged, ignoring nulls.
/// With tv_answer, tv_finding and tv_citation present, avg_tv (their mean)
/// is added. An empty `group_by` yields a single row over all input rows.
/// Throws ConfigError for an unknown key, listing the valid ones.
Table aggregate(const Table& input, const std::vector<std::string>& group_by);

/// One row of a results table.
struct ResultRow {
  std::vector<std::string> keys;
  double tv_answer = 0.0;
  double tv_finding = 0.0;
  double tv_citation = 0.0;
  double support_tv_finding = 0.0;
  double support_tv_citation = 0.0;
  double mean_findings = 0.0;
  double mean_citations = 0.0;
  std::optional<double> accuracy;  // written as null when absent

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Metric columns, in output order, following the key columns.
inline const std::vector<std::string> kMetricColumns = {
    "tv_answer",     "tv_finding",     "tv_citation", "support_tv_finding", "support_tv_citation",
    "mean_findings", "mean_citations", "accuracy"};

struct ResultsTable {
  std::vector<std::string> key_columns;
  std::vector<ResultRow> rows;

  Table to_table() const;
  static ResultsTable from_table(const Table& table);
  std::string to_csv() const { return to_table().to_csv(); }
  static ResultsTable from_csv(std::string_view csv) { return from_table(Table::from_csv(csv)); }

  friend bool operator==(const ResultsTable&, const ResultsTable&) = default;
};

ResultRow make_row(std::vector<std::string> keys, const TvResult& answer, const TvResult& finding,
                   const TvResult& citation, std::optional<double> accuracy);

/// Unweighted mean of `rows`, labelled `keys`. Accuracy averages the rows
/// that have one.
ResultRow average_row(const std::vector<ResultRow>& rows, std::vector<std::string> keys);

}  // namespace runvar
