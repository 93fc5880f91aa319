// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/external_learner.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ape/errors.hpp"
#include "subprocess.hpp"

namespace ape {

using protocol::json;

ExternalLearner::ExternalLearner(const ExternalLearnerOptions& options)
    : options_(options), process_(std::make_unique<detail::Subprocess>(options.launch_command)) {}

ExternalLearner::~ExternalLearner() {
  if (!closed_) {
    try {
      shutdown();
    } catch (const std::exception& e) {
      spdlog::debug("external learner shutdown failed: {}", e.what());
    }
  }
}

std::unique_ptr<ExternalLearner> ExternalLearner::connect(const ExternalLearnerOptions& options) {
  if (options.launch_command.empty()) throw ConfigError("external learner launch command is empty");
  std::unique_ptr<ExternalLearner> learner(new ExternalLearner(options));
  const json reply = learner->exchange(protocol::hello_request(), options.handshake_timeout);
  const std::string version = reply["version"];
  if (version != protocol::kVersion) {
    learner->closed_ = true;
    throw ProtocolError(fmt::format("protocol version mismatch: learner speaks '{}', expected '{}'", version,
                                    protocol::kVersion));
  }
  learner->capabilities_.logprobs = reply["capabilities"]["logprobs"].get<bool>();
  spdlog::debug("external learner connected (logprobs: {})", learner->capabilities_.logprobs);
  return learner;
}

json ExternalLearner::exchange(const json& request, std::chrono::milliseconds timeout) {
  const std::string type = request["t"];
  if (closed_) throw ProtocolError(fmt::format("cannot send '{}': learner connection is closed", type));
  if (options_.record_transcript) transcript_.push_back({protocol::Direction::kRequest, request});

  auto fail = [&](const std::string& why) -> ProtocolError {
    closed_ = true;
    process_->finish(std::chrono::milliseconds(200));
    return ProtocolError(why);
  };

  if (!process_->write_line(request.dump())) {
    throw fail(fmt::format("learner process is not accepting input (sending '{}')", type));
  }

  std::string line;
  switch (process_->read_line(line, timeout)) {
    case detail::Subprocess::ReadStatus::kEof: {
      auto status = process_->finish(std::chrono::milliseconds(200));
      closed_ = true;
      throw ProtocolError(fmt::format("learner process exited{} while awaiting the reply to '{}'",
                                      status ? fmt::format(" with status {}", *status) : "", type));
    }
    case detail::Subprocess::ReadStatus::kTimeout:
      throw fail(fmt::format("timed out after {} ms awaiting the reply to '{}'", timeout.count(), type));
    case detail::Subprocess::ReadStatus::kLine:
      break;
  }

  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error&) {
    throw fail(fmt::format("malformed frame in reply to '{}': {}", type, line));
  }
  if (options_.record_transcript) transcript_.push_back({protocol::Direction::kReply, reply});
  if (auto bad = protocol::validate_frame(protocol::Direction::kReply, reply)) {
    throw fail(fmt::format("invalid frame in reply to '{}' ({}): {}", type, *bad, line));
  }
  const std::string reply_type = reply["t"];
  if (reply_type == "error") {
    throw ProtocolError(fmt::format("learner rejected '{}': {}", type, reply["msg"].get<std::string>()));
  }
  if (reply_type != protocol::expected_reply(type)) {
    throw fail(fmt::format("unexpected frame in reply to '{}': {}", type, line));
  }
  return reply;
}

void ExternalLearner::train(std::span<const Example> batch, const Hyperparams& hyperparams) {
  exchange(protocol::train_request(batch, hyperparams), options_.request_timeout);
}

std::vector<Summary> ExternalLearner::summarize(std::span<const ArticleRequest> articles) {
  const json reply = exchange(protocol::summarize_request(articles), options_.request_timeout);
  std::vector<Summary> out;
  out.reserve(reply["items"].size());
  for (const auto& item : reply["items"]) out.push_back({item["id"], item["text"]});
  return out;
}

std::string ExternalLearner::snapshot() {
  return exchange(protocol::snapshot_request(), options_.request_timeout)["token"];
}

void ExternalLearner::restore(const std::string& token) {
  exchange(protocol::restore_request(token), options_.request_timeout);
}

std::vector<TokenLogprobs> ExternalLearner::logprobs(std::span<const Summary> texts) {
  if (!capabilities_.logprobs) return Learner::logprobs(texts);
  const json reply = exchange(protocol::logprobs_request(texts), options_.request_timeout);
  std::vector<TokenLogprobs> out;
  out.reserve(reply["items"].size());
  for (const auto& item : reply["items"]) out.push_back({item["id"], item["values"].get<std::vector<double>>()});
  return out;
}

void ExternalLearner::shutdown() {
  if (closed_) return;
  exchange(protocol::shutdown_request(), options_.handshake_timeout);
  closed_ = true;
  auto status = process_->finish(options_.handshake_timeout);
  if (status && *status != 0) spdlog::warn("external learner exited with status {}", *status);
}

std::unique_ptr<ExternalLearner> external_learner_connect(const ExternalLearnerOptions& options) {
  return ExternalLearner::connect(options);
}

}  // namespace ape
