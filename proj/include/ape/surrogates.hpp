// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale stand-ins for a fine-tuned model. Their skill follows the same
// clamped logistic recursion as tap::simulate_trajectory, so a full run can
// be checked against closed-form expectations.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ape/learner.hpp"
#include "ape/tap_dynamics.hpp"

namespace ape {

struct SurrogateParams {
  double initial_skill = 0.1;
  TapParams tap;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Fraction of a full logistic step delivered by a batch of the given size.
  std::function<double(std::size_t)> batch_efficacy = saturating_efficacy(200);

  static std::function<double(std::size_t)> saturating_efficacy(std::size_t full_batch);
};

/// Skill-only learner: no text, objective read straight from the skill.
class ScalarSurrogate : public Learner {
 public:
  explicit ScalarSurrogate(SurrogateParams params);

  LearnerCapabilities capabilities() const override { return {}; }
  void train(std::span<const Example> batch, const Hyperparams& hyperparams) override;
  std::vector<Summary> summarize(std::span<const ArticleRequest> articles) override;
  std::string snapshot() override;
  void restore(const std::string& token) override;
  std::optional<double> direct_objective() const override { return skill_; }

  double skill() const noexcept { return skill_; }
  const SurrogateParams& params() const noexcept { return params_; }

 private:
  SurrogateParams params_;
  double skill_;
  // Training noise is an environment stream; snapshots do not rewind it, so
  // a retried perturbation draws fresh noise.
  tap::NoiseStream noise_;
  std::unordered_map<std::string, double> checkpoints_;
  std::uint64_t next_token_ = 0;
};

/// Produces corrupted copies of the reference summary. Each reference word
/// is kept with probability 0.2 + 0.8 * skill / s_max, otherwise dropped or
/// replaced by a vocabulary token with equal chance. The per-word random
/// draws depend only on (seed, id, position), so output is a pure function
/// of the skill and higher skill never loses a kept word.
class TextSurrogate : public Learner {
 public:
  TextSurrogate(SurrogateParams params, const std::vector<const Corpus*>& corpora);

  LearnerCapabilities capabilities() const override { return {}; }
  void train(std::span<const Example> batch, const Hyperparams& hyperparams) override;
  std::vector<Summary> summarize(std::span<const ArticleRequest> articles) override;
  std::string snapshot() override { return scalar_.snapshot(); }
  void restore(const std::string& token) override { scalar_.restore(token); }

  double skill() const noexcept { return scalar_.skill(); }
  double keep_probability() const;

 private:
  std::string corrupt(const std::string& id, const std::string& reference) const;

  ScalarSurrogate scalar_;
  std::uint64_t text_seed_;
  std::unordered_map<std::string, std::string> references_;
  std::vector<std::string> vocabulary_;
};

}  // namespace ape
