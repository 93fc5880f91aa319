// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Summarization metrics (sentence BLEU, ROUGE-1, BERTScore matching,
// perplexity) and the descriptive statistics used for reporting.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ape/core_types.hpp"

namespace ape::metrics {

/// Normalized tokens. Only `tokenize` builds one, so hypothesis and
/// reference always go through the same normalization.
class TokenSequence {
 public:
  TokenSequence() = default;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  bool operator==(const TokenSequence&) const = default;

 private:
  friend TokenSequence tokenize(std::string_view text);
  std::vector<std::string> tokens_;
};

/// Lowercase (ASCII), split on Unicode whitespace, strip leading and
/// trailing punctuation from each token, drop tokens left empty.
TokenSequence tokenize(std::string_view text);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PRF from(double precision, double recall);
  bool operator==(const PRF&) const = default;
};

/// Sentence BLEU: geometric mean of clipped n-gram precisions for n = 1..max_n
/// times the brevity penalty min(1, exp(1 - |ref| / |hyp|)). A precision with
/// zero matches is replaced by (0 + 1) / (total + 1). Empty hypothesis -> 0.
double bleu(const TokenSequence& hypothesis, const TokenSequence& reference, int max_n = 4);

PRF rouge1(const TokenSequence& hypothesis, const TokenSequence& reference);

/// exp(-mean(logprobs)). Entries are natural-log probabilities (<= 0).
double perplexity(std::span<const double> token_logprobs);

using Embedding = std::vector<double>;

/// Greedy cosine matching over unit vectors, no idf weighting or rescaling.
PRF bertscore(std::span<const Embedding> hyp_embeddings, std::span<const Embedding> ref_embeddings);

/// Mean and population standard deviation (divisor N), compensated sums.
MeanStd corpus_stats(std::span<const double> per_example_scores);

/// Percent change relative to the baseline, signed so that improvement is positive.
double improvement_pct(double baseline, double final_value, bool lower_is_better);

/// (x - min) / (max - min); a constant series maps to zeros.
std::vector<double> minmax_normalize(std::span<const double> series);

// ---------------------------------------------------------------------------
// Corpus-level scoring

struct EmbeddingPair {
  std::vector<Embedding> hypothesis;
  std::vector<Embedding> reference;
};

struct ExampleScore {
  double bleu = 0.0;
  PRF rouge1;
  std::optional<PRF> bertscore;
  std::optional<double> perplexity;

  /// Values keyed by metric, for per-example objective aggregation.
  std::map<Metric, double> values() const;
};

struct CorpusScores {
  MetricsSnapshot snapshot;
  std::vector<ExampleScore> per_example;
};

struct CorpusInputs {
  std::span<const std::string> hypotheses;
  std::span<const std::string> references;
  /// Either empty or one entry per example.
  std::span<const EmbeddingPair> embeddings;
  std::span<const std::vector<double>> logprobs;
  /// Used to name the failing example in error messages; optional.
  std::span<const std::string> ids;
};

/// Scores every pair (concurrently when `workers` > 1) and aggregates in
/// input order, so the result does not depend on scheduling.
CorpusScores score_corpus(const CorpusInputs& inputs, unsigned workers = 0);

}  // namespace ape::metrics
