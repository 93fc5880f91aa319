// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/controller.hpp"

#include <chrono>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ape/batch_selection.hpp"
#include "ape/tap_dynamics.hpp"
#include "ape/text_metrics.hpp"

namespace ape {
namespace {

std::vector<Example> gather(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<Example> batch;
  batch.reserve(ids.size());
  for (const auto& id : ids) batch.push_back(corpus.at(id));
  return batch;
}

bool same_outcome(const Evaluation& a, const Evaluation& b) {
  return a.state.s_value == b.state.s_value && a.state.snapshot == b.state.snapshot && a.summaries == b.summaries;
}

}  // namespace

void derive_outcome(RunRecord& record) {
  record.final_state = record.baseline;
  record.accepted_count = 0;
  for (const auto& it : record.iterations) {
    if (!it.accepted || !it.candidate) continue;
    record.final_state = {it.iteration, it.s_after_candidate, *it.candidate};
    ++record.accepted_count;
  }
}

Evaluation evaluate(Learner& learner, const Corpus& corpus, const RunConfig& config) {
  if (corpus.empty()) throw DataError("evaluation corpus is empty");
  Evaluation out;

  if (auto direct = learner.direct_objective()) {
    MetricsSnapshot& snap = out.state.snapshot;
    snap.bleu = {*direct, 0.0};
    snap.rouge1_f1 = {*direct, 0.0};
    snap.n_examples = corpus.size();
    aggregate_objective(snap, config.objective);  // rejects objectives this learner cannot serve
    out.state.s_value = *direct;
    return out;
  }

  std::vector<ArticleRequest> requests;
  requests.reserve(corpus.size());
  for (const auto& ex : corpus.examples()) requests.push_back({ex.id, ex.article});
  std::vector<Summary> replies = learner.summarize(requests);

  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < replies.size(); ++i) by_id.emplace(replies[i].id, i);

  const std::size_t n = corpus.size();
  std::vector<std::string> ids(n), hyps(n), refs(n);
  out.summaries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = corpus.examples()[i];
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) throw DataError(fmt::format("learner returned no summary for example '{}'", ex.id));
    ids[i] = ex.id;
    hyps[i] = replies[it->second].text;
    refs[i] = ex.reference;
    out.summaries.push_back({ex.id, hyps[i]});
  }

  std::vector<std::vector<double>> logprobs;
  if (learner.capabilities().logprobs) {
    std::unordered_map<std::string, std::vector<double>> lp_by_id;
    for (auto& item : learner.logprobs(out.summaries)) lp_by_id[item.id] = std::move(item.values);
    logprobs.reserve(n);
    for (const auto& id : ids) {
      auto it = lp_by_id.find(id);
      if (it == lp_by_id.end()) throw DataError(fmt::format("learner returned no log-probabilities for '{}'", id));
      logprobs.push_back(std::move(it->second));
    }
  }

  metrics::CorpusInputs inputs;
  inputs.hypotheses = hyps;
  inputs.references = refs;
  inputs.logprobs = logprobs;
  inputs.ids = ids;
  metrics::CorpusScores scores = metrics::score_corpus(inputs);

  out.state.snapshot = scores.snapshot;
  out.state.s_value = aggregate_objective(scores.snapshot, config.objective);
  for (std::size_t i = 0; i < n; ++i) {
    out.per_example[ids[i]] = aggregate_objective(scores.per_example[i].values(), config.objective);
  }
  return out;
}

AcceptDecision accept_decision(double delta_s, double s_prev, const RunConfig& config) {
  const AcceptanceRule& rule = config.acceptance;
  double theta = 0.0;
  if (rule.mode == AcceptanceMode::kLogisticThreshold) {
    theta = tap::threshold(s_prev, config.tap);
    if (rule.margin != 0.0) theta *= 1.0 - rule.margin;
  } else {
    theta = rule.min_rel_gain * s_prev;
  }
  // Compared as values of S: a candidate landing exactly on s_prev + theta
  // gained exactly theta, even when the difference rounds above theta.
  return {s_prev + delta_s > s_prev + theta, theta};
}

RunRecord run(const RunConfig& config, Learner& learner, const Corpus& train, const Corpus& test, RunSink* sink,
              const RunOptions& options) {
  config.validate(/*allow_empty_run=*/true);
  require_disjoint(train, test);
  if (config.iterations > 0 && train.empty()) throw DataError("training corpus is empty");
  const bool deficiency = config.selection == SelectionStrategy::kDeficiency;
  if (deficiency && learner.direct_objective()) {
    throw ConfigError("deficiency selection needs a learner that produces summaries");
  }

  RunRecord record;
  record.config = config;

  Evaluation retained = evaluate(learner, test, config);
  record.baseline = retained.state;
  record.final_state = retained.state;
  if (sink) sink->on_baseline(record.baseline);
  spdlog::info("baseline S = {:.6f}", record.baseline.s_value);

  SelectionState selection(config.seed);
  selection.score_scale = config.tap.s_max;
  if (deficiency) selection.per_example_scores = evaluate(learner, train, config).per_example;

  for (int t = 1; t <= config.iterations; ++t) {
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };

    IterationRecord rec;
    rec.iteration = t;
    rec.s_before = retained.state.s_value;
    rec.s_after_candidate = rec.s_before;
    try {
      rec.checkpoint_ref = learner.snapshot();
      rec.batch_ids = select_batch(config.selection, train, config.delta_d, selection);
      learner.train(gather(train, rec.batch_ids), config.hyperparams);

      Evaluation candidate = evaluate(learner, test, config);
      rec.candidate = candidate.state.snapshot;
      rec.s_after_candidate = candidate.state.s_value;
      rec.delta_s = rec.s_after_candidate - rec.s_before;
      const AcceptDecision decision = accept_decision(rec.delta_s, rec.s_before, config);
      rec.theta = decision.theta;
      rec.accepted = decision.accepted;

      if (rec.accepted) {
        candidate.state.iteration = t;
        retained = std::move(candidate);
        record.final_state = retained.state;
        ++record.accepted_count;
        if (deficiency) selection.per_example_scores = evaluate(learner, train, config).per_example;
      } else {
        learner.restore(rec.checkpoint_ref);
        if (options.verify_rollback) {
          rec.rollback_exact = same_outcome(evaluate(learner, test, config), retained);
          if (!*rec.rollback_exact) {
            throw DataError(fmt::format("restoring checkpoint '{}' did not reproduce the retained state",
                                        rec.checkpoint_ref));
          }
        }
      }
      rec.wall_time_s = elapsed();
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      const ErrorKind kind = err ? err->kind() : ErrorKind::kData;
      rec.accepted = false;
      rec.error = e.what();
      rec.wall_time_s = elapsed();
      record.iterations.push_back(rec);
      derive_outcome(record);
      if (sink) {
        try {
          sink->on_iteration(rec);
        } catch (const std::exception& log_error) {
          spdlog::error("could not log the failed iteration: {}", log_error.what());
        }
      }
      throw RunAborted(kind, fmt::format("iteration {} failed: {}", t, e.what()), std::move(record));
    }

    record.iterations.push_back(rec);
    spdlog::info("iteration {:>3}: S' = {:.6f}  dS = {:+.6f}  theta = {:.6f}  {}", t, rec.s_after_candidate,
                 rec.delta_s, rec.theta, rec.accepted ? "accepted" : "rejected");
    if (sink) {
      try {
        sink->on_iteration(rec);
      } catch (const Error& e) {
        throw RunAborted(e.kind(), fmt::format("could not persist iteration {}: {}", t, e.what()), record);
      }
    }
  }
  return record;
}

}  // namespace ape
