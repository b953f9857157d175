#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <doctest.h>

#include "runvar/error.hpp"
#include "runvar/fixtures.hpp"
#include "runvar/harness.hpp"

using namespace runvar;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("runvar-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

double cell(const Table& t, std::size_t row, std::string_view column) {
  return std::stod(t.rows[row][t.column(column)]);
}

std::size_t find_row(const Table& t, std::string_view column, std::string_view value) {
  const auto c = t.column(column);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][c] == value) return i;
  }
  FAIL("row not found: " << value);
  return 0;
}

std::string config_error_path(const json& j, Mode mode) {
  try {
    config_from_json(j, mode);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

RunConfig evaluate_config(const std::string& reports) {
  return config_from_json(json{{"reports", reports}}, Mode::Evaluate);
}

}  // namespace

TEST_CASE("csv round trip with quoting") {
  Table t;
  t.columns = {"name", "value"};
  t.rows = {{"plain", "1"}, {"with, comma", "2.5"}, {"say \"hi\"", "null"}, {"line\nbreak", "-3"}};
  const auto csv = t.to_csv();
  CHECK(Table::from_csv(csv) == t);
  CHECK(csv.starts_with("name,value\nplain,1\n\"with, comma\",2.5\n\"say \"\"hi\"\"\",null\n"));
}

TEST_CASE("format_number is shortest round trip") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(2.0 / 3.0) == "0.6666666666666666");
  CHECK(format_number(3) == "3");
  CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("results table round trip") {
  ResultsTable r;
  r.key_columns = {"question_id"};
  r.rows.push_back(make_row({"q1"}, {0.25, 0.0, 2, 0.0}, {0.5, 1.0, 2, 3.0}, {0.125, 0.0, 2, 2.0}, 0.5));
  r.rows.push_back(make_row({"q2"}, {0.0, 0.0, 3, 1.0}, {0.1, 2.0, 3, 4.0}, {0.2, 0.5, 3, 1.5}, std::nullopt));
  const auto back = ResultsTable::from_csv(r.to_csv());
  CHECK(back == r);
  CHECK(r.to_table().rows[1][r.to_table().column("accuracy")] == "null");
}

TEST_CASE("average row is the unweighted mean") {
  std::vector<ResultRow> rows;
  double sum_finding = 0.0, sum_acc = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double x = 0.1 * i + 0.013;
    rows.push_back(make_row({"q"}, {x, 0, 1, 2}, {x * x, 0, 1, 2}, {1 - x, 0, 1, 2},
                            i % 2 ? std::optional<double>(x) : std::nullopt));
    sum_finding += x * x;
    if (i % 2) sum_acc += x;
  }
  const auto avg = average_row(rows, {"__average__"});
  CHECK(std::fabs(avg.tv_finding - sum_finding / 7) <= 1e-12);
  REQUIRE(avg.accuracy);
  CHECK(std::fabs(*avg.accuracy - sum_acc / 3) <= 1e-12);
}

TEST_CASE("aggregate reproduces the published summaries") {
  const auto findings = cmd_aggregate("fixture:ablation", {});
  REQUIRE(findings.rows.size() == 1);
  CHECK(std::round(cell(findings, 0, "tv_finding") * 100) / 100 == doctest::Approx(0.76));
  CHECK(std::round(cell(findings, 0, "tv_citation") * 100) / 100 == doctest::Approx(0.44));
  CHECK(cell(findings, 0, "n_rows") == 24);

  const auto fvc = fixture_table("findings_vs_citations");
  CHECK(fvc.rows[0][fvc.column("findings")] == "0.76");
  CHECK(fvc.rows[0][fvc.column("citations")] == "0.44");

  const auto mitigation = cmd_aggregate("fixture:mitigation", {"method"});
  const auto base = find_row(mitigation, "method", "Baseline");
  const auto comb = find_row(mitigation, "method", "Comb.");
  CHECK(std::round(cell(mitigation, base, "avg_tv") * 100) / 100 == doctest::Approx(0.69));
  CHECK(std::round(cell(mitigation, comb, "avg_tv") * 100) / 100 == doctest::Approx(0.47));
  CHECK(cell(mitigation, comb, "accuracy") > cell(mitigation, base, "accuracy"));

  const auto by_lambda = cmd_aggregate("fixture:ablation", {"lambda"});
  CHECK(by_lambda.rows.size() == 2);
}

TEST_CASE("aggregate rejects unknown keys") {
  try {
    cmd_aggregate("fixture:ablation", {"temperature"});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "group_by.temperature");
    CHECK(std::string(e.what()).find("lambda") != std::string::npos);
  }
  CHECK_THROWS_AS(cmd_aggregate("fixture:nope", {}), ConfigError);
}

TEST_CASE("evaluate on identical reports gives zero variance") {
  TempDir dir("identical");
  std::ifstream in(RUNVAR_TEST_DATA "/answers_aab.jsonl");
  std::string first;
  std::getline(in, first);
  auto second = json::parse(first);
  second["run_id"] = "copy";
  {
    std::ofstream out(dir.path / "same.jsonl");
    out << first << "\n" << second.dump() << "\n";
  }
  const auto result = cmd_evaluate(evaluate_config((dir.path / "same.jsonl").string()));
  const auto& t = result.table;
  REQUIRE(t.rows.size() == 2);
  for (const char* c : {"tv_answer", "tv_finding", "tv_citation"}) CHECK(cell(t, 0, c) == 0.0);
  CHECK(cell(t, 0, "accuracy") == 1.0);
}

TEST_CASE("evaluate on two agreeing runs and one dissenter") {
  const auto result = cmd_evaluate(evaluate_config(RUNVAR_TEST_DATA "/answers_aab.jsonl"));
  const auto& t = result.table;
  CHECK(cell(t, 0, "tv_answer") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(cell(t, 0, "accuracy") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t.rows.back()[0] == "__average__");
}

TEST_CASE("evaluate on the corpus") {
  const auto result = cmd_evaluate(evaluate_config(RUNVAR_TEST_DATA "/corpus.jsonl"));
  const auto& t = result.table;
  REQUIRE(t.rows.size() == 4);
  const auto open = find_row(t, "question_id", "q-trend");
  CHECK(t.rows[open][t.column("accuracy")] == "null");
  const auto avg = find_row(t, "question_id", "__average__");
  for (const char* c : {"tv_answer", "tv_finding", "tv_citation"}) {
    const double mean = (cell(t, 0, c) + cell(t, 1, c) + cell(t, 2, c)) / 3;
    CHECK(std::fabs(cell(t, avg, c) - mean) <= 1e-12);
  }
  CHECK(result.metadata.contains("input_sha256"));
}

TEST_CASE("config errors carry field paths") {
  CHECK(config_error_path(json{{"n_runs", 1}}, Mode::Simulate) == "n_runs");
  CHECK(config_error_path(json{{"colour", 1}}, Mode::Simulate) == "colour");
  CHECK(config_error_path(json{{"reports", "/no/such/file.jsonl"}}, Mode::Evaluate) == "reports");
  CHECK(config_error_path(json{{"world", "galaxy"}}, Mode::Simulate) == "world");
  CHECK(config_error_path(json{{"temperature", {{"query", {1, -1, 0}}}}}, Mode::Simulate) == "temperature.query[1]");
  CHECK(config_error_path(json{{"decompose", {{"method", "guess"}}}}, Mode::Decompose) == "decompose.method");
  CHECK(config_error_path(json{{"mitigate", {{"gamma", 2.0}}}}, Mode::Mitigate).starts_with("mitigate."));
  CHECK(config_error_path(json{{"aggregate", {{"input", "fixture:none"}}}}, Mode::Aggregate) == "aggregate.input");
  CHECK(config_error_path(json::object(), Mode::Simulate) == "<none>");
}

TEST_CASE("config hash depends only on result-affecting fields") {
  const auto a = config_from_json(json{{"seed", 3}, {"n_runs", 5}}, Mode::Simulate);
  const auto b = config_from_json(json{{"seed", 3}, {"n_runs", 5}, {"out", "elsewhere"}, {"max_workers", 7}},
                                  Mode::Simulate);
  const auto c = config_from_json(json{{"seed", 4}, {"n_runs", 5}}, Mode::Simulate);
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  const auto uniform = config_from_json(json{{"temperature", 0.5}}, Mode::Simulate);
  const auto spelled = config_from_json(
      json{{"temperature", {{"query", {0.5, 0.5, 0.5}}, {"sum", {0.5, 0.5, 0.5}}, {"update", {0.5, 0.5, 0.5}}}}},
      Mode::Simulate);
  CHECK(config_hash(uniform) == config_hash(spelled));
}

TEST_CASE("outputs are suffixed and replays are byte-identical") {
  TempDir dir("outputs");
  auto cfg = config_from_json(json{{"seed", 9}, {"n_runs", 6}, {"temperature", 1.0}, {"out", dir.path.string()}},
                              Mode::Simulate);
  const auto first = write_outputs(cfg, run_command(cfg));
  cfg.max_workers = 3;
  const auto second = write_outputs(cfg, run_command(cfg));
  CHECK(first.filename().string() == "simulate-" + config_hash(cfg));
  CHECK(second.filename().string() == first.filename().string() + ".1");
  for (const char* f : {"results.csv", "records.jsonl", "meta.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(first / f));
    CHECK(slurp(first / f) == slurp(second / f));
  }
  const auto meta = json::parse(slurp(first / "meta.json"));
  CHECK(meta["config_hash"] == config_hash(cfg));
  CHECK(meta["mode"] == "simulate");
}

TEST_CASE("ablate and decompose commands") {
  const auto ablate = config_from_json(json{{"n_runs", 3}, {"seed", 1}}, Mode::Ablate);
  const auto grid = run_command(ablate).table;
  CHECK(grid.rows.size() == 24);
  CHECK(grid.columns[0] == "lambda");
  CHECK(grid.columns[1] == "step");
  CHECK(grid.columns[2] == "module");
  CHECK(grid.rows[3][1] == "2");
  CHECK(grid.rows[9][1] == "combined");

  const auto decompose = config_from_json(json{{"world", "tiny"}}, Mode::Decompose);
  const auto d = run_command(decompose).table;
  REQUIRE(d.rows.size() == 2);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    CHECK(cell(d, i, "residual") <= 1e-9);
    CHECK(cell(d, i, "delta_residual") <= 1e-9);
  }
}

TEST_CASE("mitigate command lists every variant") {
  const auto cfg = config_from_json(json{{"n_runs", 4}, {"seed", 2}}, Mode::Mitigate);
  const auto result = run_command(cfg);
  const auto& t = result.table;
  REQUIRE(t.rows.size() == 6);
  CHECK(t.rows.front()[0] == "baseline");
  CHECK(t.rows.back()[0] == "combined");
  const auto& avg = result.metadata["average_tv"];
  const double base = avg["baseline"].get<double>(), comb = avg["combined"].get<double>();
  const auto& reduction = result.metadata["combined_reduction"];
  CHECK(reduction["absolute"].get<double>() == doctest::Approx(base - comb));
  CHECK(reduction["relative"].get<double>() == doctest::Approx((base - comb) / base));
}

TEST_CASE("mode names") {
  for (auto m : {Mode::Evaluate, Mode::Simulate, Mode::Decompose, Mode::Ablate, Mode::Mitigate, Mode::Aggregate}) {
    CHECK(mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(mode_from_string("train"), ConfigError);
}
