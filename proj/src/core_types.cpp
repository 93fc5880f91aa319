// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/core_types.hpp"

#include <cctype>
#include <cmath>
#include <fmt/format.h>

#include "ape/errors.hpp"

namespace ape {
namespace {

bool is_blank(std::string_view text) {
  for (unsigned char c : text) {
    if (!std::isspace(c)) return false;
  }
  return true;
}

double metric_term(Metric metric, double mean) {
  if (metric == Metric::kPerplexity) {
    if (!(mean >= 1.0)) throw DomainError(fmt::format("perplexity {} is below 1", mean));
    return 1.0 / mean;
  }
  return mean;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kValidation: return "validation";
  }
  return "?";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  if (name == "validation") return Split::kValidation;
  throw ConfigError(fmt::format("unknown split '{}'", name));
}

Corpus::Corpus(Split split, std::vector<Example> examples)
    : split_(split), examples_(std::move(examples)) {
  index_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const Example& ex = examples_[i];
    if (ex.id.empty()) throw DataError(fmt::format("example #{} has an empty id", i + 1));
    if (is_blank(ex.article)) throw DataError(fmt::format("example '{}' has an empty article", ex.id));
    if (is_blank(ex.reference)) throw DataError(fmt::format("example '{}' has an empty reference", ex.id));
    if (!index_.emplace(ex.id, i).second) {
      throw DataError(fmt::format("duplicate example id '{}' in {} corpus", ex.id, to_string(split)));
    }
  }
}

const Example* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &examples_[it->second];
}

const Example& Corpus::at(std::string_view id) const {
  if (const Example* ex = find(id)) return *ex;
  throw DataError(fmt::format("unknown example id '{}'", id));
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(examples_.size());
  for (const auto& ex : examples_) out.push_back(ex.id);
  return out;
}

void require_disjoint(const Corpus& a, const Corpus& b) {
  for (const auto& ex : a.examples()) {
    if (b.find(ex.id) != nullptr) {
      throw DataError(fmt::format("example id '{}' appears in both the {} and {} corpora", ex.id,
                                  to_string(a.split()), to_string(b.split())));
    }
  }
}

void TapParams::validate() const {
  if (!(k > 0.0)) throw ConfigError(fmt::format("tap.k must be > 0 (got {})", k));
  if (!(s_max > 0.0)) throw ConfigError(fmt::format("tap.s_max must be > 0 (got {})", s_max));
  if (!(dt > 0.0)) throw ConfigError(fmt::format("tap.dt must be > 0 (got {})", dt));
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kBleu: return "bleu";
    case Metric::kRouge1: return "rouge1";
    case Metric::kBertScore: return "bertscore";
    case Metric::kPerplexity: return "perplexity";
  }
  return "?";
}

Metric metric_from_string(std::string_view name) {
  if (name == "bleu") return Metric::kBleu;
  if (name == "rouge1") return Metric::kRouge1;
  if (name == "bertscore") return Metric::kBertScore;
  if (name == "perplexity") return Metric::kPerplexity;
  throw ConfigError(fmt::format("unknown metric '{}'", name));
}

ObjectiveSpec::ObjectiveSpec() : weights_{{Metric::kBleu, 1.0}} {}

ObjectiveSpec::ObjectiveSpec(std::map<Metric, double> weights) : weights_(std::move(weights)) {
  double total = 0.0;
  for (const auto& [metric, w] : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError(fmt::format("objective weight for {} must be a nonnegative number", to_string(metric)));
    }
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("objective weights are all zero");
}

bool ObjectiveSpec::uses(Metric metric) const {
  auto it = weights_.find(metric);
  return it != weights_.end() && it->second > 0.0;
}

std::string_view to_string(AcceptanceMode mode) {
  return mode == AcceptanceMode::kLogisticThreshold ? "logistic_threshold" : "fixed_relative";
}

std::string_view to_string(SelectionStrategy strategy) {
  return strategy == SelectionStrategy::kRandom ? "random" : "deficiency";
}

void RunConfig::validate(bool allow_empty_run) const {
  if (iterations < (allow_empty_run ? 0 : 1)) {
    throw ConfigError(fmt::format("iterations must be >= {} (got {})", allow_empty_run ? 0 : 1, iterations));
  }
  if (delta_d < 1) throw ConfigError(fmt::format("delta_d must be >= 1 (got {})", delta_d));
  if (!(hyperparams.label_smoothing >= 0.0 && hyperparams.label_smoothing < 1.0)) {
    throw ConfigError(fmt::format("label_smoothing must lie in [0, 1) (got {})", hyperparams.label_smoothing));
  }
  if (acceptance.mode == AcceptanceMode::kFixedRelative && !(acceptance.min_rel_gain > 0.0)) {
    throw ConfigError(fmt::format("min_rel_gain must be > 0 (got {})", acceptance.min_rel_gain));
  }
  if (!(acceptance.margin >= 0.0 && acceptance.margin <= 1.0)) {
    throw ConfigError(fmt::format("acceptance margin must lie in [0, 1] (got {})", acceptance.margin));
  }
  tap.validate();
}

std::optional<MeanStd> MetricsSnapshot::get(Metric metric) const {
  switch (metric) {
    case Metric::kBleu: return bleu;
    case Metric::kRouge1: return rouge1_f1;
    case Metric::kBertScore: return bertscore_f1;
    case Metric::kPerplexity: return perplexity;
  }
  return std::nullopt;
}

void MetricsSnapshot::validate() const {
  auto bounded = [](std::string_view name, const MeanStd& m) {
    if (!(m.mean >= 0.0 && m.mean <= 1.0)) throw DataError(fmt::format("{} mean {} outside [0, 1]", name, m.mean));
    if (!(m.std >= 0.0)) throw DataError(fmt::format("{} std {} is negative", name, m.std));
  };
  bounded("bleu", bleu);
  bounded("rouge1_f1", rouge1_f1);
  if (bertscore_f1) bounded("bertscore_f1", *bertscore_f1);
  if (perplexity) {
    if (!(perplexity->mean >= 1.0)) throw DataError(fmt::format("perplexity mean {} below 1", perplexity->mean));
    if (!(perplexity->std >= 0.0)) throw DataError("perplexity std is negative");
  }
}

double aggregate_objective(const MetricsSnapshot& snapshot, const ObjectiveSpec& spec) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& [metric, w] : spec.weights()) {
    if (w == 0.0) continue;
    auto value = snapshot.get(metric);
    if (!value) throw DataError(fmt::format("objective weights {} but the snapshot has no {} value",
                                            to_string(metric), to_string(metric)));
    weighted += w * metric_term(metric, value->mean);
    total += w;
  }
  return weighted / total;
}

double aggregate_objective(const std::map<Metric, double>& values, const ObjectiveSpec& spec) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& [metric, w] : spec.weights()) {
    if (w == 0.0) continue;
    auto it = values.find(metric);
    if (it == values.end()) throw DataError(fmt::format("missing per-example {} value", to_string(metric)));
    weighted += w * metric_term(metric, it->second);
    total += w;
  }
  return weighted / total;
}

}  // namespace ape
