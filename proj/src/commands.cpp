#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "runvar/canonical.hpp"
#include "runvar/error.hpp"
#include "runvar/extraction.hpp"
#include "runvar/fixtures.hpp"
#include "runvar/harness.hpp"
#include "runvar/parallel.hpp"
#include "runvar/prompts.hpp"

namespace runvar {

using nlohmann::json;

namespace {

std::size_t workers(const RunConfig& c) { return c.max_workers ? c.max_workers : hardware_workers(); }

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::optional<double> sim_accuracy(const sim::WorldSpec& world, const sim::EnsembleMetrics& m) {
  if (world.gold_answer.empty()) return std::nullopt;
  return m.accuracy;
}

ResultRow sim_row(std::vector<std::string> keys, const sim::WorldSpec& world, const sim::EnsembleMetrics& m) {
  return make_row(std::move(keys), m.answer, m.finding, m.citation, sim_accuracy(world, m));
}

void add_trajectories(CommandResult& out, const json& tags, const std::vector<sim::TrajectoryRecord>& runs) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    json line = tags;
    line["type"] = "trajectory";
    line["run"] = i;
    line["trajectory"] = sim::to_json(runs[i]);
    out.records.push_back(std::move(line));
  }
}

std::string step_label(int step) { return step == sim::kCombined ? "combined" : std::to_string(step); }

struct QuestionResult {
  std::optional<ResultRow> row;
  std::vector<json> records;
  std::vector<std::string> warnings;
};

QuestionResult evaluate_question(const std::string& question_id, const std::vector<ReportRecord>& runs,
                                 JudgeTransport& judge, const JudgeSettings& settings) {
  QuestionResult out;
  if (runs.size() < 2) {
    auto msg = fmt::format("question {}: {} run(s), at least 2 are required; skipped", question_id, runs.size());
    out.records.push_back(json{{"type", "warning"}, {"question_id", question_id}, {"message", msg}});
    out.warnings.push_back(std::move(msg));
    return out;
  }
  ExtractionOptions options;
  options.max_in_flight = settings.max_in_flight;
  std::vector<RunArtifact> artifacts;
  for (const auto& r : runs) artifacts.push_back(extract_run(r, judge, options));

  std::vector<std::string> answers;
  std::vector<std::vector<std::string>> findings, citations;
  for (const auto& a : artifacts) {
    answers.push_back(a.answer);
    findings.push_back(a.findings);
    citations.push_back(a.citations);
  }
  EquivalenceOracle answer_oracle(judge, ItemKind::Answer);
  EquivalenceOracle finding_oracle(judge, ItemKind::Finding);
  const auto answer_sp = answer_space(answers, answer_oracle);
  const auto finding_sp = cluster_findings(findings, finding_oracle);
  const auto citation_sp = canonicalize_citations(citations);
  for (const auto& w : citation_sp.warnings) {
    const auto msg = fmt::format("question {}: {}", question_id, w);
    out.records.push_back(json{{"type", "warning"}, {"question_id", question_id}, {"message", msg}});
    out.warnings.push_back(msg);
  }

  std::optional<double> accuracy;
  std::size_t graded = 0, correct = 0;
  for (const auto& a : artifacts) {
    if (a.accuracy) {
      ++graded;
      correct += *a.accuracy;
    }
  }
  if (graded) accuracy = static_cast<double>(correct) / static_cast<double>(graded);

  const auto answer_vs = build_vectors(answer_sp);
  const auto finding_vs = build_vectors(finding_sp);
  const auto citation_vs = build_vectors(citation_sp.space);
  out.row = make_row({question_id}, summarize(answer_vs), summarize(finding_vs), summarize(citation_vs), accuracy);

  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    out.records.push_back(json{{"type", "run"},
                               {"question_id", question_id},
                               {"answer_id", answer_sp.assignments[i].front()},
                               {"finding_ids", finding_sp.assignments[i]},
                               {"citation_ids", citation_sp.space.assignments[i]},
                               {"artifact", to_json(artifacts[i])}});
  }
  auto reps = [](const CanonicalSpace& s) {
    json items = json::array();
    for (const auto& item : s.items) items.push_back(item.representative);
    return items;
  };
  out.records.push_back(json{{"type", "question"},
                             {"question_id", question_id},
                             {"answers", reps(answer_sp)},
                             {"findings", reps(finding_sp)},
                             {"citations", reps(citation_sp.space)}});
  return out;
}

}  // namespace

CommandResult cmd_evaluate(const RunConfig& config) {
  const auto reports = read_report_file(config.reports);
  std::vector<std::string> order;
  std::map<std::string, std::vector<ReportRecord>> by_question;
  for (const auto& r : reports) {
    auto [it, inserted] = by_question.try_emplace(r.question_id);
    if (inserted) order.push_back(r.question_id);
    it->second.push_back(r);
  }

  const auto inner = make_judge(config.judge);
  ThrottledJudge judge(*inner, config.judge.max_in_flight);
  std::vector<QuestionResult> results(order.size());
  parallel_for(order.size(), workers(config), [&](std::size_t i) {
    results[i] = evaluate_question(order[i], by_question.at(order[i]), judge, config.judge);
  });

  CommandResult out;
  ResultsTable table;
  table.key_columns = {"question_id"};
  for (auto& r : results) {
    if (r.row) table.rows.push_back(*r.row);
    for (auto& rec : r.records) out.records.push_back(std::move(rec));
    for (auto& w : r.warnings) out.warnings.push_back(std::move(w));
  }
  if (!table.rows.empty()) {
    auto avg = average_row(table.rows, {"__average__"});
    table.rows.push_back(std::move(avg));
  }
  out.table = table.to_table();
  out.metadata["input_sha256"] = file_sha256(config.reports);
  out.metadata["questions"] = order.size();
  out.metadata["prompts_version"] = prompts::kVersion;
  const bool deterministic = judge.deterministic();
  out.metadata["judge"] = json{{"endpoint", config.judge.endpoint},
                               {"model", config.judge.model},
                               {"deterministic", deterministic},
                               {"note", deterministic ? "judge is rule-based; outputs replay exactly"
                                                      : "judge responses are outside the replay guarantee"}};
  return out;
}

CommandResult cmd_simulate(const RunConfig& config) {
  const auto runs = sim::run_ensemble(config.world, config.policy, config.n_runs, config.seed, {}, workers(config));
  CommandResult out;
  ResultsTable table;
  table.key_columns = {"world"};
  table.rows.push_back(sim_row({config.world_name}, config.world, sim::measure(config.world, runs)));
  out.table = table.to_table();
  add_trajectories(out, json::object(), runs);
  return out;
}

CommandResult cmd_ablate(const RunConfig& config) {
  const auto& a = config.ablation;
  const auto cells = sim::ablation_grid(config.world, config.policy, a.modules, a.steps, a.lambdas, config.n_runs,
                                        config.seed, workers(config));
  CommandResult out;
  ResultsTable table;
  table.key_columns = {"lambda", "step", "module"};
  for (const auto& cell : cells) {
    const std::string lambda = format_number(cell.lambda), step = step_label(cell.step);
    const std::string module(sim::to_string(cell.module));
    table.rows.push_back(sim_row({lambda, step, module}, config.world, cell.metrics));
    add_trajectories(out, json{{"lambda", cell.lambda}, {"step", step}, {"module", module}}, cell.runs);
  }
  out.table = table.to_table();
  return out;
}

CommandResult cmd_decompose(const RunConfig& config) {
  const auto& d = config.decompose;
  CommandResult out;
  out.table.columns = {"step",      "method",      "tv_total",     "tv_propagated", "tv_intrinsic",
                       "delta_query", "delta_sum", "delta_update", "residual",      "delta_residual",
                       "samples",   "se_total",    "se_propagated", "se_intrinsic", "se_delta_query",
                       "se_delta_sum", "se_delta_update"};
  for (int t : d.steps) {
    const auto r = d.method == DecompositionMethod::ExactEnumeration
                       ? decompose_exact(config.world, config.policy, t, d.outcome_limit)
                       : decompose_mc(config.world, config.policy, t, d.n_outer, d.n_inner, config.seed);
    const auto& x = r.terms;
    std::vector<std::string> row{std::to_string(t),
                                 r.method == DecompositionMethod::ExactEnumeration ? "exact" : "monte_carlo"};
    for (double v : {x.total, x.propagated, x.intrinsic, x.delta_query, x.delta_sum, x.delta_update, r.residual,
                     r.delta_residual}) {
      row.push_back(format_number(v));
    }
    row.push_back(std::to_string(r.method == DecompositionMethod::ExactEnumeration ? r.outcomes : r.samples));
    if (r.standard_errors) {
      const auto& se = *r.standard_errors;
      for (double v : {se.total, se.propagated, se.intrinsic, se.delta_query, se.delta_sum, se.delta_update}) {
        row.push_back(format_number(v));
      }
    } else {
      row.insert(row.end(), 6, "null");
    }
    out.table.rows.push_back(std::move(row));
    json rec = to_json(r);
    rec["type"] = "decomposition";
    out.records.push_back(std::move(rec));
  }
  return out;
}

CommandResult cmd_mitigate(const RunConfig& config) {
  sim::PolicyConfig cfg = config.policy;
  cfg.schedule.set_all(config.mitigate.lambda);
  const auto& base = config.mitigate.config;
  auto only = [&](bool intersection, bool sum, bool update) {
    MitigationConfig m = base;
    m.query_intersection = intersection;
    m.structured_sum = sum;
    m.structured_update = update;
    return m;
  };
  const std::vector<std::pair<std::string, std::optional<MitigationConfig>>> variants{
      {"baseline", std::nullopt},
      {"structured_sum", only(false, true, false)},
      {"structured_update", only(false, false, true)},
      {"structured_combined", only(false, true, true)},
      {"query_intersection", only(true, false, false)},
      {"combined", only(true, true, true)},
  };

  CommandResult out;
  ResultsTable table;
  table.key_columns = {"method"};
  json avg = json::object();
  for (const auto& [name, m] : variants) {
    const auto runs = m ? run_mitigated_ensemble(config.world, cfg, *m, config.n_runs, config.seed, workers(config))
                        : sim::run_ensemble(config.world, cfg, config.n_runs, config.seed, {}, workers(config));
    const auto metrics = sim::measure(config.world, runs);
    table.rows.push_back(sim_row({name}, config.world, metrics));
    avg[name] = metrics.average_tv();
    add_trajectories(out, json{{"method", name}}, runs);
  }
  out.table = table.to_table();
  out.metadata["average_tv"] = avg;
  const double before = avg["baseline"].get<double>(), after = avg["combined"].get<double>();
  out.metadata["combined_reduction"] =
      json{{"absolute", before - after}, {"relative", before > 0.0 ? (before - after) / before : 0.0}};
  return out;
}

Table cmd_aggregate(const std::string& input, const std::vector<std::string>& group_by) {
  const Table table = input.starts_with("fixture:") ? fixture_table(std::string_view(input).substr(8))
                                                    : Table::read(input);
  return aggregate(table, group_by);
}

CommandResult run_command(const RunConfig& config) {
  switch (config.mode) {
    case Mode::Evaluate: return cmd_evaluate(config);
    case Mode::Simulate: return cmd_simulate(config);
    case Mode::Ablate: return cmd_ablate(config);
    case Mode::Decompose: return cmd_decompose(config);
    case Mode::Mitigate: return cmd_mitigate(config);
    case Mode::Aggregate: {
      CommandResult out;
      out.table = cmd_aggregate(config.aggregate.input, config.aggregate.group_by);
      return out;
    }
  }
  throw ConfigError("mode", "unhandled mode");
}

std::filesystem::path write_outputs(const RunConfig& config, const CommandResult& result) {
  namespace fs = std::filesystem;
  const auto hash = config_hash(config);
  const fs::path root(config.out_dir);
  fs::create_directories(root);
  const std::string stem = fmt::format("{}-{}", to_string(config.mode), hash);
  fs::path dir = root / stem;
  // create_directory reports whether it made the directory, so concurrent
  // writers never share one.
  for (int k = 1; !fs::create_directory(dir); ++k) dir = root / fmt::format("{}.{}", stem, k);

  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    f << text;
    if (!f) throw Error(fmt::format("cannot write {}", (dir / name).string()));
  };
  write("results.csv", result.table.to_csv());
  std::string lines;
  for (const auto& r : result.records) lines += r.dump() + "\n";
  write("records.jsonl", lines);

  json meta = result.metadata;
  meta["mode"] = to_string(config.mode);
  meta["config_hash"] = hash;
  meta["seed"] = config.seed;
  meta["config"] = to_json(config);
  meta["warnings"] = result.warnings;
  meta["files"] = {"results.csv", "records.jsonl"};
  write("meta.json", meta.dump(2) + "\n");
  return dir;
}

}  // namespace runvar
