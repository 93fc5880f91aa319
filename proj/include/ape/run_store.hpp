// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run directory layout:
//   config.json          full configuration document the run was started with
//   baseline.json        PerformanceState before the first iteration
//   iterations.csv       one row per iteration (header below)
//   iterations.jsonl     the same records, lossless, one JSON object per line
//   report.json          written by build/write_report
//   series_normalized.csv
//
// One writer per directory; readers only ever see flushed lines.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ape/controller.hpp"
#include "ape/serialization.hpp"

namespace ape {

inline constexpr std::string_view kIterationsCsvHeader =
    "iteration,batch_ids,s_before,s_candidate,delta_s,theta,accepted,checkpoint,wall_time_s";

class RunStore : public RunSink {
 public:
  /// Creates `dir` (which must not already hold a run) and writes config.json.
  static RunStore create(const std::filesystem::path& dir, const json& config_doc);
  /// Reopens an existing run for appending.
  static RunStore open(const std::filesystem::path& dir);

  void on_baseline(const PerformanceState& baseline) override;
  void on_iteration(const IterationRecord& record) override { persist_iteration(record); }

  /// Appends one CSV row and one JSON line, flushed to disk before returning.
  void persist_iteration(const IterationRecord& record);

  /// Number the next persisted iteration must carry.
  int next_iteration() const noexcept { return last_iteration_ + 1; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path dir_;
  int last_iteration_ = 0;
};

/// Reads a (possibly partial) run back. Throws DataError when the baseline
/// is missing.
RunRecord load_run(const std::filesystem::path& dir);

/// Splits a ';'-joined batch id list as stored in iterations.csv.
std::vector<std::string> split_batch_ids(std::string_view field);

struct MetricRow {
  std::string metric;
  MeanStd baseline;
  MeanStd final_value;
  /// Absent when the baseline mean is zero.
  std::optional<double> improvement_pct;
  bool lower_is_better = false;
};

struct TimelineEntry {
  int iteration = 0;
  double delta_s = 0.0;
  double theta = 0.0;
  bool accepted = false;
  bool failed = false;
};

struct ReportBundle {
  double baseline_s = 0.0;
  double final_s = 0.0;
  int iterations = 0;
  int accepted_count = 0;
  std::vector<MetricRow> table;
  /// Column names and min-max normalized retained series (t = 0..T).
  std::vector<std::string> series_columns;
  std::vector<std::vector<double>> series_normalized;
  std::vector<TimelineEntry> timeline;
  /// Rate constant fitted to the retained S series, when well defined.
  std::optional<double> k_hat;
};

/// Retained metric values after each iteration, index 0 being the baseline.
std::vector<PerformanceState> retained_history(const RunRecord& record);

ReportBundle build_report(const RunRecord& record);
ReportBundle build_report(const std::filesystem::path& run_dir);

json to_json(const ReportBundle& report);
/// Writes report.json and series_normalized.csv into `dir`.
void write_report(const std::filesystem::path& dir, const ReportBundle& report);

// ---------------------------------------------------------------------------
// Human ratings

enum class RatingPhase { kBaseline, kFinal };
enum class Criterion { kInformativeness, kFluency, kFactualAccuracy, kCoherence, kRelevance };

std::string_view to_string(Criterion criterion);
std::string_view to_string(RatingPhase phase);

struct Rating {
  std::string article_id;
  std::string rater_id;
  RatingPhase phase = RatingPhase::kBaseline;
  Criterion criterion = Criterion::kInformativeness;
  int score = 1;
};

/// Scores are integers in [1, 5]; (article, rater, phase, criterion) is unique.
class RatingsTable {
 public:
  explicit RatingsTable(std::vector<Rating> rows);
  const std::vector<Rating>& rows() const noexcept { return rows_; }

 private:
  std::vector<Rating> rows_;
};

inline constexpr std::string_view kRatingsCsvHeader = "article_id,rater_id,phase,criterion,score";

RatingsTable load_ratings_csv(const std::filesystem::path& path);
void save_ratings_csv(const RatingsTable& table, const std::filesystem::path& path);

struct CriterionSummary {
  Criterion criterion;
  std::size_t n_baseline = 0;
  std::size_t n_final = 0;
  double baseline_mean = 0.0;
  double baseline_std = 0.0;
  double final_mean = 0.0;
  double final_std = 0.0;
  /// final_std / sqrt(n_final)
  double final_standard_error = 0.0;
  double improvement_pct = 0.0;
};

/// One summary per criterion present in the table, in enum order. Every
/// present criterion needs ratings in both phases.
std::vector<CriterionSummary> aggregate_ratings(const RatingsTable& table);

json to_json(const std::vector<CriterionSummary>& summaries);
void write_ratings_summary(const std::filesystem::path& dir, const std::vector<CriterionSummary>& summaries);

}  // namespace ape
