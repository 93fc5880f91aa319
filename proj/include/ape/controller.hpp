// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// The perturb / evaluate / retain-or-discard loop. Each iteration snapshots
// the learner, trains it on one batch, scores the candidate on the
// evaluation corpus and either keeps it or restores the snapshot. The
// retained objective therefore never decreases.

#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ape/core_types.hpp"
#include "ape/errors.hpp"
#include "ape/learner.hpp"

namespace ape {

struct RunRecord {
  RunConfig config;
  PerformanceState baseline;
  std::vector<IterationRecord> iterations;
  PerformanceState final_state;
  int accepted_count = 0;

  bool operator==(const RunRecord&) const = default;
};

/// Rebuilds final_state and accepted_count from baseline + iterations.
void derive_outcome(RunRecord& record);

/// Receives progress as it happens; the controller calls on_iteration
/// before starting the next pass.
class RunSink {
 public:
  virtual ~RunSink() = default;
  virtual void on_baseline(const PerformanceState& baseline) = 0;
  virtual void on_iteration(const IterationRecord& record) = 0;
};

struct Evaluation {
  PerformanceState state;
  /// Empty for learners evaluated through direct_objective().
  std::vector<Summary> summaries;
  /// Objective per example id (text learners only).
  std::unordered_map<std::string, double> per_example;
};

/// Summarizes every article in `corpus` and scores it. Learners exposing
/// direct_objective() bypass text scoring entirely.
Evaluation evaluate(Learner& learner, const Corpus& corpus, const RunConfig& config);

inline PerformanceState evaluate_state(Learner& learner, const Corpus& testset, const RunConfig& config) {
  return evaluate(learner, testset, config).state;
}

struct AcceptDecision {
  bool accepted = false;
  /// The gain the candidate had to exceed.
  double theta = 0.0;
};

/// Strict: accepts when s_prev + delta_s > s_prev + theta, i.e. delta_s > theta
/// judged on the values of S the two sides produce.
AcceptDecision accept_decision(double delta_s, double s_prev, const RunConfig& config);

struct RunOptions {
  /// Re-evaluate after every rollback and require bit-identical results.
  bool verify_rollback = false;
};

/// Thrown when a run stops early. Carries everything completed so far,
/// including the failed iteration, and the category of the cause.
class RunAborted : public Error {
 public:
  RunAborted(ErrorKind kind, const std::string& what, RunRecord partial)
      : Error(kind, what), partial_(std::move(partial)) {}
  const RunRecord& partial() const noexcept { return partial_; }

 private:
  RunRecord partial_;
};

RunRecord run(const RunConfig& config, Learner& learner, const Corpus& train, const Corpus& test,
              RunSink* sink = nullptr, const RunOptions& options = {});

}  // namespace ape
