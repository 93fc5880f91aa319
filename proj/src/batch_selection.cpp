// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/batch_selection.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "ape/errors.hpp"

namespace ape {
namespace {

std::size_t batch_size(const Corpus& corpus, int delta_d) {
  if (delta_d < 1) throw ConfigError(fmt::format("delta_d must be >= 1 (got {})", delta_d));
  if (corpus.empty()) throw DataError("cannot select a batch from an empty corpus");
  return std::min<std::size_t>(static_cast<std::size_t>(delta_d), corpus.size());
}

}  // namespace

std::vector<std::string> random_batch(const Corpus& corpus, int delta_d, SelectionState& state) {
  const std::size_t want = batch_size(corpus, delta_d);

  std::vector<const std::string*> pool;
  pool.reserve(corpus.size());
  for (const auto& ex : corpus.examples()) {
    if (!state.used_ids.contains(ex.id)) pool.push_back(&ex.id);
  }
  if (pool.size() < want) {
    state.used_ids.clear();
    pool.clear();
    for (const auto& ex : corpus.examples()) pool.push_back(&ex.id);
  }

  // Partial Fisher-Yates over the candidate pool.
  std::vector<std::string> batch;
  batch.reserve(want);
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(state.rng)]);
    batch.push_back(*pool[i]);
    state.used_ids.insert(*pool[i]);
  }
  return batch;
}

std::vector<std::string> deficiency_batch(const Corpus& corpus, int delta_d, SelectionState& state) {
  const std::size_t want = batch_size(corpus, delta_d);
  if (!state.per_example_scores) {
    throw DataError("deficiency selection needs per-example scores; run a per-example evaluation of the "
                    "training corpus first");
  }
  const auto& scores = *state.per_example_scores;

  // Efraimidis-Spirakis keys in log form: log(u) / w, largest keys win.
  struct Keyed {
    double key;
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(corpus.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& examples = corpus.examples();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto it = scores.find(examples[i].id);
    if (it == scores.end()) continue;
    if (!std::isfinite(it->second)) {
      throw DataError(fmt::format("per-example score for '{}' is not finite", examples[i].id));
    }
    const double normalized = std::clamp(it->second / state.score_scale, 0.0, 1.0);
    const double weight = 1.0 - normalized + state.weight_floor;
    const double u = 1.0 - unit(state.rng);  // (0, 1]
    const double key = weight > 0.0 ? std::log(u) / weight : -std::numeric_limits<double>::infinity();
    keyed.push_back({key, i});
  }
  if (keyed.size() < want) {
    throw DataError(fmt::format("deficiency selection needs scores for {} examples but only {} are scored; run a "
                                "per-example evaluation of the training corpus first",
                                want, keyed.size()));
  }

  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(want), keyed.end(),
                    [](const Keyed& a, const Keyed& b) {
                      if (a.key != b.key) return a.key > b.key;
                      return a.index < b.index;
                    });
  std::vector<std::string> batch;
  batch.reserve(want);
  for (std::size_t i = 0; i < want; ++i) {
    batch.push_back(examples[keyed[i].index].id);
    state.used_ids.insert(batch.back());
  }
  return batch;
}

std::vector<std::string> select_batch(SelectionStrategy strategy, const Corpus& corpus, int delta_d,
                                      SelectionState& state) {
  return strategy == SelectionStrategy::kRandom ? random_batch(corpus, delta_d, state)
                                                : deficiency_batch(corpus, delta_d, state);
}

}  // namespace ape
