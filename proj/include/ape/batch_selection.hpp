// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ape/core_types.hpp"

namespace ape {

/// Per-run selector state. Single owner; mutated by every draw.
struct SelectionState {
  explicit SelectionState(std::uint64_t seed) : rng(seed) {}

  std::mt19937_64 rng;
  std::unordered_set<std::string> used_ids;
  /// Latest objective score per example id (deficiency mode only).
  std::optional<std::unordered_map<std::string, double>> per_example_scores;
  /// Scores are divided by this before weighting, then clamped to [0, 1].
  double score_scale = 1.0;
  /// Added to every weight so well-served examples are never starved.
  double weight_floor = 1e-6;
};

/// Uniform draw without replacement, preferring ids not yet used this pass.
/// When fewer than `delta_d` unused ids remain, the pass restarts over the
/// whole corpus.
std::vector<std::string> random_batch(const Corpus& corpus, int delta_d, SelectionState& state);

/// Weighted draw without replacement, weight = 1 - normalized score + floor.
/// Throws DataError when fewer than `delta_d` ids carry a score.
std::vector<std::string> deficiency_batch(const Corpus& corpus, int delta_d, SelectionState& state);

std::vector<std::string> select_batch(SelectionStrategy strategy, const Corpus& corpus, int delta_d,
                                      SelectionState& state);

}  // namespace ape
