// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/surrogates.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <set>

#include "ape/errors.hpp"
#include "ape/text_metrics.hpp"

namespace ape {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

}  // namespace

std::vector<TokenLogprobs> Learner::logprobs(std::span<const Summary>) {
  throw ProtocolError("learner does not provide token log-probabilities");
}

std::function<double(std::size_t)> SurrogateParams::saturating_efficacy(std::size_t full_batch) {
  return [full_batch](std::size_t n) {
    return std::min(1.0, static_cast<double>(n) / static_cast<double>(full_batch));
  };
}

ScalarSurrogate::ScalarSurrogate(SurrogateParams params)
    : params_(std::move(params)), skill_(params_.initial_skill), noise_(params_.noise_sigma, params_.seed) {
  params_.tap.validate();
  if (!(skill_ >= 0.0 && skill_ <= params_.tap.s_max)) {
    throw ConfigError(fmt::format("initial skill {} outside [0, {}]", skill_, params_.tap.s_max));
  }
  if (!params_.batch_efficacy) throw ConfigError("surrogate batch efficacy function is empty");
}

void ScalarSurrogate::train(std::span<const Example> batch, const Hyperparams&) {
  if (batch.empty()) throw DataError("cannot train on an empty batch");
  skill_ = tap::logistic_step(skill_, params_.tap, params_.batch_efficacy(batch.size()), noise_.draw());
}

std::vector<Summary> ScalarSurrogate::summarize(std::span<const ArticleRequest>) {
  throw DataError("the scalar surrogate produces no summaries; evaluate it through its objective value");
}

std::string ScalarSurrogate::snapshot() {
  std::string token = fmt::format("skill-{}", next_token_++);
  checkpoints_.emplace(token, skill_);
  return token;
}

void ScalarSurrogate::restore(const std::string& token) {
  auto it = checkpoints_.find(token);
  if (it == checkpoints_.end()) throw DataError(fmt::format("unknown checkpoint token '{}'", token));
  skill_ = it->second;
}

TextSurrogate::TextSurrogate(SurrogateParams params, const std::vector<const Corpus*>& corpora)
    : scalar_(std::move(params)), text_seed_(splitmix64(scalar_.params().seed ^ 0x7E57ULL)) {
  std::set<std::string> vocab;
  for (const Corpus* corpus : corpora) {
    for (const auto& ex : corpus->examples()) {
      references_[ex.id] = ex.reference;
      const metrics::TokenSequence tokens = metrics::tokenize(ex.reference);
      vocab.insert(tokens.tokens().begin(), tokens.tokens().end());
    }
  }
  vocabulary_.assign(vocab.begin(), vocab.end());
  if (vocabulary_.empty()) throw DataError("text surrogate needs at least one reference token");
}

void TextSurrogate::train(std::span<const Example> batch, const Hyperparams& hyperparams) {
  scalar_.train(batch, hyperparams);
}

double TextSurrogate::keep_probability() const {
  return 0.2 + 0.8 * (scalar_.skill() / scalar_.params().tap.s_max);
}

std::string TextSurrogate::corrupt(const std::string& id, const std::string& reference) const {
  const double keep = keep_probability();
  if (keep >= 1.0) return reference;

  const std::vector<std::string> words = split_words(reference);
  const std::uint64_t base = splitmix64(text_seed_ ^ fnv1a(id));
  std::string out;
  bool changed = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::uint64_t h = splitmix64(base + 3 * i);
    const std::string* word = &words[i];
    if (to_unit(h) >= keep) {
      changed = true;
      if (to_unit(splitmix64(base + 3 * i + 1)) < 0.5) continue;
      word = &vocabulary_[splitmix64(base + 3 * i + 2) % vocabulary_.size()];
    }
    if (!out.empty()) out.push_back(' ');
    out += *word;
  }
  return changed ? out : reference;
}

std::vector<Summary> TextSurrogate::summarize(std::span<const ArticleRequest> articles) {
  std::vector<Summary> out;
  out.reserve(articles.size());
  for (const auto& article : articles) {
    auto it = references_.find(article.id);
    if (it == references_.end()) throw DataError(fmt::format("text surrogate has no reference for article '{}'", article.id));
    out.push_back({article.id, corrupt(article.id, it->second)});
  }
  return out;
}

}  // namespace ape
