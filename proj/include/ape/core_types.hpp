// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared vocabulary: corpus records, run configuration, metric snapshots and
// per-iteration records. Everything here is an immutable value once built.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ape {

struct Example {
  std::string id;
  std::string article;
  std::string reference;

  bool operator==(const Example&) const = default;
};

enum class Split { kTrain, kTest, kValidation };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

/// Ordered, id-unique collection of examples. Construction validates every
/// record; duplicates are rejected rather than dropped.
class Corpus {
 public:
  Corpus(Split split, std::vector<Example> examples);

  Split split() const noexcept { return split_; }
  const std::vector<Example>& examples() const noexcept { return examples_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }

  /// nullptr when the id is not part of this corpus.
  const Example* find(std::string_view id) const;
  const Example& at(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  Split split_;
  std::vector<Example> examples_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Throws DataError naming the first shared id.
void require_disjoint(const Corpus& a, const Corpus& b);

struct TapParams {
  double k = 0.1;
  double s_max = 1.0;
  double dt = 1.0;

  void validate() const;
  bool operator==(const TapParams&) const = default;
};

enum class Metric { kBleu, kRouge1, kBertScore, kPerplexity };

std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view name);
constexpr bool lower_is_better(Metric metric) { return metric == Metric::kPerplexity; }

/// Nonnegative weights over metrics. Defaults to BLEU alone.
class ObjectiveSpec {
 public:
  ObjectiveSpec();
  explicit ObjectiveSpec(std::map<Metric, double> weights);

  const std::map<Metric, double>& weights() const noexcept { return weights_; }
  bool uses(Metric metric) const;
  bool operator==(const ObjectiveSpec&) const = default;

 private:
  std::map<Metric, double> weights_;
};

enum class AcceptanceMode { kLogisticThreshold, kFixedRelative };
enum class SelectionStrategy { kRandom, kDeficiency };

std::string_view to_string(AcceptanceMode mode);
std::string_view to_string(SelectionStrategy strategy);

struct AcceptanceRule {
  AcceptanceMode mode = AcceptanceMode::kFixedRelative;
  /// fixed_relative: required gain as a fraction of the previous S.
  double min_rel_gain = 0.02;
  /// logistic_threshold: compare against theta * (1 - margin). 0 is the strict rule.
  double margin = 0.0;

  bool operator==(const AcceptanceRule&) const = default;
};

/// Forwarded verbatim to the learner; never interpreted by the harness.
struct Hyperparams {
  int epochs = 3;
  double learning_rate = 3e-6;
  int grad_accum_steps = 4;
  double label_smoothing = 0.0;

  bool operator==(const Hyperparams&) const = default;
};

struct RunConfig {
  int iterations = 17;
  int delta_d = 200;
  Hyperparams hyperparams;
  AcceptanceRule acceptance;
  ObjectiveSpec objective;
  SelectionStrategy selection = SelectionStrategy::kRandom;
  std::uint64_t seed = 0;
  TapParams tap;

  /// Throws ConfigError. `allow_empty_run` admits iterations == 0.
  void validate(bool allow_empty_run = false) const;
  bool operator==(const RunConfig&) const = default;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const MeanStd&) const = default;
};

struct MetricsSnapshot {
  MeanStd bleu;
  MeanStd rouge1_f1;
  std::optional<MeanStd> bertscore_f1;
  std::optional<MeanStd> perplexity;
  std::size_t n_examples = 0;

  std::optional<MeanStd> get(Metric metric) const;
  void validate() const;
  bool operator==(const MetricsSnapshot&) const = default;
};

struct PerformanceState {
  int iteration = 0;
  double s_value = 0.0;
  MetricsSnapshot snapshot;

  bool operator==(const PerformanceState&) const = default;
};

struct IterationRecord {
  int iteration = 0;
  std::vector<std::string> batch_ids;
  double s_before = 0.0;
  double s_after_candidate = 0.0;
  double delta_s = 0.0;
  double theta = 0.0;
  bool accepted = false;
  std::string checkpoint_ref;
  double wall_time_s = 0.0;
  /// Candidate metrics; absent when the iteration failed before evaluation.
  std::optional<MetricsSnapshot> candidate;
  std::optional<std::string> error;
  /// Set when rollback verification ran after a rejection.
  std::optional<bool> rollback_exact;

  bool operator==(const IterationRecord&) const = default;
};

/// S = sum(w_i * m_i) / sum(w_i) where perplexity contributes 1/perplexity.
/// Throws DataError when a weighted metric is missing from the snapshot.
double aggregate_objective(const MetricsSnapshot& snapshot, const ObjectiveSpec& spec);

/// Same weighting applied to a single example's metric values.
double aggregate_objective(const std::map<Metric, double>& values, const ObjectiveSpec& spec);

}  // namespace ape
