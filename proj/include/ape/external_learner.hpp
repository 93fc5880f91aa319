// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "ape/learner.hpp"
#include "ape/protocol.hpp"

namespace ape {

namespace detail {
class Subprocess;
}

struct ExternalLearnerOptions {
  /// Run through /bin/sh -c; the child's stderr is inherited.
  std::string launch_command;
  std::chrono::milliseconds handshake_timeout{30'000};
  /// Applies to every request after the handshake. Zero waits indefinitely.
  std::chrono::milliseconds request_timeout{0};
  bool record_transcript = true;
};

/// Client side of "ape/1". Every reply is shape-checked; anything
/// unexpected raises ProtocolError naming the offending frame.
class ExternalLearner : public Learner {
 public:
  ~ExternalLearner() override;
  ExternalLearner(const ExternalLearner&) = delete;
  ExternalLearner& operator=(const ExternalLearner&) = delete;

  /// Launches the process and performs the hello handshake.
  static std::unique_ptr<ExternalLearner> connect(const ExternalLearnerOptions& options);

  LearnerCapabilities capabilities() const override { return capabilities_; }
  void train(std::span<const Example> batch, const Hyperparams& hyperparams) override;
  std::vector<Summary> summarize(std::span<const ArticleRequest> articles) override;
  std::string snapshot() override;
  void restore(const std::string& token) override;
  std::vector<TokenLogprobs> logprobs(std::span<const Summary> texts) override;
  void shutdown() override;

  const std::vector<protocol::TranscriptEntry>& transcript() const noexcept { return transcript_; }

 private:
  explicit ExternalLearner(const ExternalLearnerOptions& options);

  protocol::json exchange(const protocol::json& request, std::chrono::milliseconds timeout);

  ExternalLearnerOptions options_;
  std::unique_ptr<detail::Subprocess> process_;
  LearnerCapabilities capabilities_;
  std::vector<protocol::TranscriptEntry> transcript_;
  bool closed_ = false;
};

/// Convenience wrapper over ExternalLearner::connect.
std::unique_ptr<ExternalLearner> external_learner_connect(const ExternalLearnerOptions& options);

}  // namespace ape
