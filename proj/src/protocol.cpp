// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/protocol.hpp"

#include <fmt/format.h>

namespace ape::protocol {
namespace {

std::optional<std::string> require_string(const json& frame, std::string_view key) {
  auto it = frame.find(key);
  if (it == frame.end() || !it->is_string()) return fmt::format("field '{}' must be a string", key);
  return std::nullopt;
}

std::optional<std::string> require_items(const json& frame, std::string_view item_kind,
                                         std::initializer_list<std::string_view> string_fields,
                                         std::string_view array_field = {}) {
  auto it = frame.find(item_kind);
  if (it == frame.end() || !it->is_array()) return fmt::format("field '{}' must be an array", item_kind);
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& item = (*it)[i];
    if (!item.is_object()) return fmt::format("{}[{}] is not an object", item_kind, i);
    for (auto field : string_fields) {
      if (auto bad = require_string(item, field)) return fmt::format("{}[{}]: {}", item_kind, i, *bad);
    }
    if (!array_field.empty()) {
      auto values = item.find(array_field);
      if (values == item.end() || !values->is_array()) {
        return fmt::format("{}[{}]: field '{}' must be an array", item_kind, i, array_field);
      }
      for (const auto& v : *values) {
        if (!v.is_number()) return fmt::format("{}[{}]: '{}' must hold numbers", item_kind, i, array_field);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

json hello_request() { return {{"t", "hello"}, {"version", kVersion}}; }

json train_request(std::span<const Example> batch, const Hyperparams& hp) {
  json examples = json::array();
  for (const auto& ex : batch) {
    examples.push_back({{"id", ex.id}, {"article", ex.article}, {"reference", ex.reference}});
  }
  return {{"t", "train"},
          {"examples", std::move(examples)},
          {"hyperparams",
           {{"epochs", hp.epochs},
            {"learning_rate", hp.learning_rate},
            {"grad_accum_steps", hp.grad_accum_steps},
            {"label_smoothing", hp.label_smoothing}}}};
}

json summarize_request(std::span<const ArticleRequest> articles) {
  json items = json::array();
  for (const auto& a : articles) items.push_back({{"id", a.id}, {"article", a.article}});
  return {{"t", "summarize"}, {"articles", std::move(items)}};
}

json logprobs_request(std::span<const Summary> texts) {
  json items = json::array();
  for (const auto& s : texts) items.push_back({{"id", s.id}, {"text", s.text}});
  return {{"t", "logprobs"}, {"items", std::move(items)}};
}

json snapshot_request() { return {{"t", "snapshot"}}; }
json restore_request(const std::string& token) { return {{"t", "restore"}, {"token", token}}; }
json shutdown_request() { return {{"t", "shutdown"}}; }

std::string_view expected_reply(std::string_view request_type) {
  if (request_type == "hello") return "hello";
  if (request_type == "train" || request_type == "restore" || request_type == "shutdown") return "ok";
  if (request_type == "summarize") return "summaries";
  if (request_type == "logprobs") return "logprobs";
  if (request_type == "snapshot") return "snapshot";
  return {};
}

std::optional<std::string> validate_frame(Direction direction, const json& frame) {
  if (!frame.is_object()) return "frame is not a JSON object";
  if (auto bad = require_string(frame, "t")) return bad;
  const std::string type = frame["t"];

  if (direction == Direction::kRequest) {
    if (type == "hello") return require_string(frame, "version");
    if (type == "train") {
      if (auto bad = require_items(frame, "examples", {"id", "article", "reference"})) return bad;
      auto hp = frame.find("hyperparams");
      if (hp == frame.end() || !hp->is_object()) return "field 'hyperparams' must be an object";
      for (auto key : {"epochs", "learning_rate", "grad_accum_steps", "label_smoothing"}) {
        auto v = hp->find(key);
        if (v == hp->end() || !v->is_number()) return fmt::format("hyperparams.{} must be a number", key);
      }
      return std::nullopt;
    }
    if (type == "summarize") return require_items(frame, "articles", {"id", "article"});
    if (type == "logprobs") return require_items(frame, "items", {"id", "text"});
    if (type == "snapshot" || type == "shutdown") return std::nullopt;
    if (type == "restore") return require_string(frame, "token");
    return fmt::format("unknown request type '{}'", type);
  }

  if (type == "hello") {
    if (auto bad = require_string(frame, "version")) return bad;
    auto caps = frame.find("capabilities");
    if (caps == frame.end() || !caps->is_object()) return "field 'capabilities' must be an object";
    auto lp = caps->find("logprobs");
    if (lp == caps->end() || !lp->is_boolean()) return "capabilities.logprobs must be a boolean";
    return std::nullopt;
  }
  if (type == "ok") return std::nullopt;
  if (type == "summaries") return require_items(frame, "items", {"id", "text"});
  if (type == "logprobs") return require_items(frame, "items", {"id"}, "values");
  if (type == "snapshot") return require_string(frame, "token");
  if (type == "error") return require_string(frame, "msg");
  return fmt::format("unknown reply type '{}'", type);
}

std::vector<std::string> validate_transcript(std::span<const TranscriptEntry> transcript) {
  std::vector<std::string> problems;
  std::optional<std::string> pending;  // request type awaiting a reply
  bool seen_hello = false;
  bool closed = false;

  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const auto& entry = transcript[i];
    const bool is_request = entry.direction == Direction::kRequest;
    if (auto bad = validate_frame(entry.direction, entry.frame)) {
      problems.push_back(fmt::format("frame {}: {}", i, *bad));
      continue;
    }
    const std::string type = entry.frame["t"];
    if (closed) {
      problems.push_back(fmt::format("frame {}: '{}' after shutdown completed", i, type));
      continue;
    }
    if (is_request) {
      if (pending) problems.push_back(fmt::format("frame {}: request '{}' while '{}' is unanswered", i, type, *pending));
      if (!seen_hello && type != "hello") problems.push_back(fmt::format("frame {}: '{}' before hello", i, type));
      if (type == "hello") {
        if (entry.frame["version"] != kVersion) problems.push_back(fmt::format("frame {}: version is not {}", i, kVersion));
        seen_hello = true;
      }
      pending = type;
      continue;
    }
    if (!pending) {
      problems.push_back(fmt::format("frame {}: unsolicited reply '{}'", i, type));
      continue;
    }
    if (type != "error" && type != expected_reply(*pending)) {
      problems.push_back(fmt::format("frame {}: reply '{}' does not answer '{}'", i, type, *pending));
    }
    if (*pending == "hello" && type == "hello" && entry.frame["version"] != kVersion) {
      problems.push_back(fmt::format("frame {}: learner speaks {}", i, entry.frame["version"].get<std::string>()));
    }
    if (*pending == "shutdown" && type == "ok") closed = true;
    pending.reset();
  }
  return problems;
}

}  // namespace ape::protocol
