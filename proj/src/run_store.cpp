// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/run_store.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>
#include <tuple>
#include <unistd.h>

#include "ape/errors.hpp"
#include "ape/tap_dynamics.hpp"
#include "ape/text_metrics.hpp"
#include "csv.hpp"

namespace fs = std::filesystem;

namespace ape {
namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kBaselineFile = "baseline.json";
constexpr const char* kIterationsCsv = "iterations.csv";
constexpr const char* kIterationsJsonl = "iterations.jsonl";

void append_durably(const fs::path& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw DataError(fmt::format("cannot open '{}' for appending", path.string()));
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw DataError(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError(fmt::format("cannot move '{}' into place: {}", path.string(), ec.message()));
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

std::string num(double v) { return fmt::format("{}", v); }

std::string csv_row(const IterationRecord& r) {
  std::string ids;
  for (std::size_t i = 0; i < r.batch_ids.size(); ++i) {
    if (i) ids.push_back(';');
    ids += r.batch_ids[i];
  }
  return csv::join_row({std::to_string(r.iteration), ids, num(r.s_before), num(r.s_after_candidate), num(r.delta_s),
                        num(r.theta), r.accepted ? "true" : "false", r.checkpoint_ref, num(r.wall_time_s)});
}

// Reads iterations.jsonl, ignoring a torn final line left by a crash.
std::vector<IterationRecord> read_iterations(const fs::path& path) {
  std::vector<IterationRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const std::size_t end = content.find('\n', pos);
    const bool terminated = end != std::string::npos;
    const std::string line = content.substr(pos, terminated ? end - pos : std::string::npos);
    pos = terminated ? end + 1 : content.size();
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(iteration_record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (!terminated) {
        spdlog::warn("ignoring incomplete final line in '{}'", path.string());
        break;
      }
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(fmt::format("{} '{}' is not an integer", what, text));
  }
  return value;
}

}  // namespace

RunStore RunStore::create(const fs::path& dir, const json& config_doc) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create run directory '{}': {}", dir.string(), ec.message()));
  if (fs::exists(dir / kBaselineFile) || fs::exists(dir / kIterationsJsonl)) {
    throw DataError(fmt::format("'{}' already holds a run", dir.string()));
  }
  write_atomically(dir / kConfigFile, config_doc.dump(2) + "\n");
  write_atomically(dir / kIterationsCsv, std::string(kIterationsCsvHeader) + "\n");
  write_atomically(dir / kIterationsJsonl, "");
  return RunStore(dir);
}

RunStore RunStore::open(const fs::path& dir) {
  if (!fs::exists(dir / kConfigFile)) throw DataError(fmt::format("'{}' is not a run directory", dir.string()));
  RunStore store(dir);
  const auto existing = read_iterations(dir / kIterationsJsonl);
  if (!existing.empty()) store.last_iteration_ = existing.back().iteration;
  return store;
}

void RunStore::on_baseline(const PerformanceState& baseline) {
  write_atomically(dir_ / kBaselineFile, to_json(baseline).dump(2) + "\n");
}

void RunStore::persist_iteration(const IterationRecord& record) {
  if (record.iteration <= last_iteration_) {
    throw DataError(fmt::format("iteration {} is already logged in '{}'", record.iteration, dir_.string()));
  }
  append_durably(dir_ / kIterationsCsv, csv_row(record) + "\n");
  append_durably(dir_ / kIterationsJsonl, to_json(record).dump() + "\n");
  last_iteration_ = record.iteration;
}

RunRecord load_run(const fs::path& dir) {
  if (!fs::exists(dir / kBaselineFile)) {
    throw DataError(fmt::format("run directory '{}' has no baseline (baseline.json missing)", dir.string()));
  }
  RunRecord record;
  if (fs::exists(dir / kConfigFile)) {
    record.config = run_config_from_json(read_json_file(dir / kConfigFile), {"learner", "data"});
  }
  record.baseline = performance_state_from_json(read_json_file(dir / kBaselineFile));
  record.iterations = read_iterations(dir / kIterationsJsonl);
  derive_outcome(record);
  return record;
}

std::vector<std::string> split_batch_ids(std::string_view field) {
  std::vector<std::string> out;
  if (field.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = field.find(';', pos);
    out.emplace_back(field.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::vector<PerformanceState> retained_history(const RunRecord& record) {
  std::vector<PerformanceState> history{record.baseline};
  for (const auto& it : record.iterations) {
    PerformanceState next = history.back();
    if (it.accepted && it.candidate) next = {it.iteration, it.s_after_candidate, *it.candidate};
    history.push_back(next);
  }
  return history;
}

ReportBundle build_report(const RunRecord& record) {
  if (record.iterations.empty()) throw DataError("report needs at least one iteration");
  ReportBundle report;
  report.baseline_s = record.baseline.s_value;
  report.final_s = record.final_state.s_value;
  report.iterations = static_cast<int>(record.iterations.size());
  report.accepted_count = record.accepted_count;

  const MetricsSnapshot& base = record.baseline.snapshot;
  const MetricsSnapshot& fin = record.final_state.snapshot;
  for (Metric m : {Metric::kBleu, Metric::kRouge1, Metric::kBertScore, Metric::kPerplexity}) {
    auto b = base.get(m);
    auto f = fin.get(m);
    if (!b || !f) continue;
    MetricRow row{std::string(to_string(m)), *b, *f, std::nullopt, lower_is_better(m)};
    if (b->mean != 0.0) row.improvement_pct = metrics::improvement_pct(b->mean, f->mean, row.lower_is_better);
    report.table.push_back(row);
  }

  const auto history = retained_history(record);
  std::vector<double> s_series;
  for (const auto& state : history) s_series.push_back(state.s_value);

  auto add_series = [&](std::string name, auto&& pick) {
    std::vector<double> values;
    for (const auto& state : history) {
      std::optional<double> v = pick(state.snapshot);
      if (!v) return;
      values.push_back(*v);
    }
    report.series_columns.push_back(std::move(name));
    report.series_normalized.push_back(metrics::minmax_normalize(values));
  };
  report.series_columns.push_back("s");
  report.series_normalized.push_back(metrics::minmax_normalize(s_series));
  auto mean_of = [](Metric m) {
    return [m](const MetricsSnapshot& s) -> std::optional<double> {
      auto v = s.get(m);
      return v ? std::optional<double>(v->mean) : std::nullopt;
    };
  };
  add_series("bleu", mean_of(Metric::kBleu));
  add_series("rouge1_f1", mean_of(Metric::kRouge1));
  add_series("bertscore_f1", mean_of(Metric::kBertScore));
  add_series("perplexity", mean_of(Metric::kPerplexity));

  for (const auto& it : record.iterations) {
    report.timeline.push_back({it.iteration, it.delta_s, it.theta, it.accepted, it.error.has_value()});
  }

  try {
    report.k_hat = tap::fit_k(s_series, record.config.tap.s_max, record.config.tap.dt);
  } catch (const DomainError& e) {
    spdlog::debug("no rate constant fitted: {}", e.what());
  }
  return report;
}

ReportBundle build_report(const fs::path& run_dir) { return build_report(load_run(run_dir)); }

json to_json(const ReportBundle& r) {
  json table = json::array();
  for (const auto& row : r.table) {
    table.push_back({{"metric", row.metric},
                     {"baseline", to_json(row.baseline)},
                     {"final", to_json(row.final_value)},
                     {"improvement_pct", row.improvement_pct ? json(*row.improvement_pct) : json(nullptr)},
                     {"direction", row.lower_is_better ? "reduction" : "increase"}});
  }
  json series = json::object();
  for (std::size_t i = 0; i < r.series_columns.size(); ++i) series[r.series_columns[i]] = r.series_normalized[i];
  json timeline = json::array();
  for (const auto& t : r.timeline) {
    timeline.push_back({{"iteration", t.iteration},
                        {"delta_s", t.delta_s},
                        {"theta", t.theta},
                        {"accepted", t.accepted},
                        {"failed", t.failed}});
  }
  return {{"baseline_s", r.baseline_s},
          {"final_s", r.final_s},
          {"iterations", r.iterations},
          {"accepted_count", r.accepted_count},
          {"k_hat", r.k_hat ? json(*r.k_hat) : json(nullptr)},
          {"table", table},
          {"series_normalized", series},
          {"timeline", timeline}};
}

void write_report(const fs::path& dir, const ReportBundle& report) {
  write_atomically(dir / "report.json", to_json(report).dump(2) + "\n");
  std::string csv_text = csv::join_row(report.series_columns) + "\n";
  const std::size_t rows = report.series_normalized.empty() ? 0 : report.series_normalized.front().size();
  for (std::size_t t = 0; t < rows; ++t) {
    std::vector<std::string> fields;
    for (const auto& column : report.series_normalized) fields.push_back(num(column[t]));
    csv_text += csv::join_row(fields) + "\n";
  }
  write_atomically(dir / "series_normalized.csv", csv_text);
}

// ---------------------------------------------------------------------------
// Ratings

namespace {

constexpr Criterion kCriteria[] = {Criterion::kInformativeness, Criterion::kFluency, Criterion::kFactualAccuracy,
                                   Criterion::kCoherence, Criterion::kRelevance};

Criterion criterion_from_string(std::string_view name) {
  for (Criterion c : kCriteria) {
    if (to_string(c) == name) return c;
  }
  throw DataError(fmt::format("unknown rating criterion '{}'", name));
}

RatingPhase phase_from_string(std::string_view name) {
  if (name == "baseline") return RatingPhase::kBaseline;
  if (name == "final") return RatingPhase::kFinal;
  throw DataError(fmt::format("unknown rating phase '{}'", name));
}

}  // namespace

std::string_view to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::kInformativeness: return "informativeness";
    case Criterion::kFluency: return "fluency";
    case Criterion::kFactualAccuracy: return "factual_accuracy";
    case Criterion::kCoherence: return "coherence";
    case Criterion::kRelevance: return "relevance";
  }
  return "?";
}

std::string_view to_string(RatingPhase phase) { return phase == RatingPhase::kBaseline ? "baseline" : "final"; }

RatingsTable::RatingsTable(std::vector<Rating> rows) : rows_(std::move(rows)) {
  std::set<std::tuple<std::string, std::string, RatingPhase, Criterion>> seen;
  for (const auto& r : rows_) {
    if (r.score < 1 || r.score > 5) {
      throw DataError(fmt::format("rating {} for article '{}' by '{}' is outside 1..5", r.score, r.article_id, r.rater_id));
    }
    if (!seen.emplace(r.article_id, r.rater_id, r.phase, r.criterion).second) {
      throw DataError(fmt::format("duplicate rating: article '{}', rater '{}', {} {}", r.article_id, r.rater_id,
                                  to_string(r.phase), to_string(r.criterion)));
    }
  }
}

RatingsTable load_ratings_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open ratings file '{}'", path.string()));
  std::vector<std::string> fields;
  if (!csv::read_row(in, fields) || csv::join_row(fields) != kRatingsCsvHeader) {
    throw DataError(fmt::format("'{}' must start with the header '{}'", path.string(), kRatingsCsvHeader));
  }
  std::vector<Rating> rows;
  std::size_t line = 1;
  while (csv::read_row(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 5) throw DataError(fmt::format("{}:{}: expected 5 fields, got {}", path.string(), line, fields.size()));
    try {
      const int score = parse_int(fields[4], "score");
      if (score < 1 || score > 5) throw DataError(fmt::format("score {} is outside 1..5", score));
      rows.push_back({fields[0], fields[1], phase_from_string(fields[2]), criterion_from_string(fields[3]), score});
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line, e.what()));
    }
  }
  return RatingsTable(std::move(rows));
}

void save_ratings_csv(const RatingsTable& table, const fs::path& path) {
  std::string text = std::string(kRatingsCsvHeader) + "\n";
  for (const auto& r : table.rows()) {
    text += csv::join_row({r.article_id, r.rater_id, std::string(to_string(r.phase)),
                           std::string(to_string(r.criterion)), std::to_string(r.score)}) +
            "\n";
  }
  write_atomically(path, text);
}

std::vector<CriterionSummary> aggregate_ratings(const RatingsTable& table) {
  std::map<std::pair<Criterion, RatingPhase>, std::vector<double>> cells;
  std::set<Criterion> present;
  for (const auto& r : table.rows()) {
    cells[{r.criterion, r.phase}].push_back(r.score);
    present.insert(r.criterion);
  }
  if (present.empty()) throw DataError("ratings table is empty");

  std::vector<CriterionSummary> out;
  for (Criterion c : kCriteria) {
    if (!present.contains(c)) continue;
    for (RatingPhase p : {RatingPhase::kBaseline, RatingPhase::kFinal}) {
      if (cells[{c, p}].empty()) {
        throw DataError(fmt::format("no ratings in cell ({}, {})", to_string(p), to_string(c)));
      }
    }
    const auto& base = cells[{c, RatingPhase::kBaseline}];
    const auto& fin = cells[{c, RatingPhase::kFinal}];
    const MeanStd b = metrics::corpus_stats(base);
    const MeanStd f = metrics::corpus_stats(fin);
    CriterionSummary s{c};
    s.n_baseline = base.size();
    s.n_final = fin.size();
    s.baseline_mean = b.mean;
    s.baseline_std = b.std;
    s.final_mean = f.mean;
    s.final_std = f.std;
    s.final_standard_error = f.std / std::sqrt(static_cast<double>(fin.size()));
    s.improvement_pct = metrics::improvement_pct(b.mean, f.mean, false);
    out.push_back(s);
  }
  return out;
}

json to_json(const std::vector<CriterionSummary>& summaries) {
  json out = json::array();
  for (const auto& s : summaries) {
    out.push_back({{"criterion", to_string(s.criterion)},
                   {"n_baseline", s.n_baseline},
                   {"n_final", s.n_final},
                   {"baseline_mean", s.baseline_mean},
                   {"baseline_std", s.baseline_std},
                   {"final_mean", s.final_mean},
                   {"final_std", s.final_std},
                   {"final_standard_error", s.final_standard_error},
                   {"improvement_pct", s.improvement_pct}});
  }
  return out;
}

void write_ratings_summary(const fs::path& dir, const std::vector<CriterionSummary>& summaries) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_atomically(dir / "ratings_summary.json", to_json(summaries).dump(2) + "\n");
  std::string text =
      "criterion,n_baseline,n_final,baseline_mean,baseline_std,final_mean,final_std,final_standard_error,"
      "improvement_pct\n";
  for (const auto& s : summaries) {
    text += csv::join_row({std::string(to_string(s.criterion)), std::to_string(s.n_baseline),
                           std::to_string(s.n_final), num(s.baseline_mean), num(s.baseline_std), num(s.final_mean),
                           num(s.final_std), num(s.final_standard_error), num(s.improvement_pct)}) +
            "\n";
  }
  write_atomically(dir / "ratings_summary.csv", text);
}

}  // namespace ape
