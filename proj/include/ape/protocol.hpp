// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Wire protocol "ape/1": one JSON object per LF-terminated line over the
// external learner's stdin (requests) and stdout (replies). Strictly
// request/response; unknown fields are ignored.
//
//   hello      -> hello {version, capabilities{logprobs}}
//   train      -> ok
//   summarize  -> summaries {items[{id, text}]}
//   logprobs   -> logprobs {items[{id, values[]}]}
//   snapshot   -> snapshot {token}
//   restore    -> ok
//   shutdown   -> ok, then the process exits 0
//
// Any request may instead be answered by {"t":"error","msg":...}.

#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ape/learner.hpp"

namespace ape::protocol {

using nlohmann::json;

inline constexpr std::string_view kVersion = "ape/1";

json hello_request();
json train_request(std::span<const Example> batch, const Hyperparams& hyperparams);
json summarize_request(std::span<const ArticleRequest> articles);
json logprobs_request(std::span<const Summary> texts);
json snapshot_request();
json restore_request(const std::string& token);
json shutdown_request();

/// Reply type expected for a request type; empty for unknown requests.
std::string_view expected_reply(std::string_view request_type);

enum class Direction { kRequest, kReply };

/// Shape check of one frame. Returns a description of the first violation.
std::optional<std::string> validate_frame(Direction direction, const json& frame);

struct TranscriptEntry {
  Direction direction;
  json frame;
};

/// Checks a whole conversation against the grammar above: well-formed
/// frames, strict alternation, matching reply types, hello first and
/// nothing after the shutdown reply. Returns every violation found.
std::vector<std::string> validate_transcript(std::span<const TranscriptEntry> transcript);

}  // namespace ape::protocol
