// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ape/core_types.hpp"

namespace ape {

struct ArticleRequest {
  std::string id;
  std::string article;
};

struct Summary {
  std::string id;
  std::string text;

  bool operator==(const Summary&) const = default;
};

struct TokenLogprobs {
  std::string id;
  std::vector<double> values;
};

struct LearnerCapabilities {
  bool logprobs = false;
};

/// Anything the controller can fine-tune, query and roll back. A learner
/// is a single-owner sequential resource: one call in flight at a time.
///
/// restore(snapshot()) must be an exact round-trip: summarize() afterwards
/// returns exactly what it returned before the snapshot was taken.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual LearnerCapabilities capabilities() const = 0;
  virtual void train(std::span<const Example> batch, const Hyperparams& hyperparams) = 0;
  virtual std::vector<Summary> summarize(std::span<const ArticleRequest> articles) = 0;
  virtual std::string snapshot() = 0;
  virtual void restore(const std::string& token) = 0;

  /// Per-token natural-log probabilities of each text. Only valid when
  /// capabilities().logprobs is set.
  virtual std::vector<TokenLogprobs> logprobs(std::span<const Summary> texts);

  virtual void shutdown() {}

  /// Learners without text output report their objective value directly.
  virtual std::optional<double> direct_objective() const { return std::nullopt; }
};

}  // namespace ape
