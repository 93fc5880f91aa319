// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of the core types and the line-delimited corpus format.

#pragma once

#include <filesystem>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <string_view>

#include "ape/controller.hpp"
#include "ape/core_types.hpp"

namespace ape {

using nlohmann::json;

json to_json(const TapParams& tap);
json to_json(const RunConfig& config);
json to_json(const MeanStd& value);
json to_json(const MetricsSnapshot& snapshot);
json to_json(const PerformanceState& state);
json to_json(const IterationRecord& record);

TapParams tap_params_from_json(const json& doc);
/// Missing keys take their defaults. Unknown keys raise ConfigError unless
/// listed in `extra_keys` (those are skipped, not interpreted).
RunConfig run_config_from_json(const json& doc, std::initializer_list<std::string_view> extra_keys = {});
MetricsSnapshot metrics_snapshot_from_json(const json& doc);
PerformanceState performance_state_from_json(const json& doc);
IterationRecord iteration_record_from_json(const json& doc);

/// Rejects keys outside `allowed`, naming the first offender and `where`.
void reject_unknown_keys(const json& doc, std::initializer_list<std::string_view> allowed, std::string_view where);

/// One {id, article, reference} object per line. Blank lines are skipped.
Corpus load_corpus(const std::filesystem::path& path, Split split);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Deterministic news-like pairs for desk-scale runs. Ids are
/// "<prefix>-<index>", so distinct prefixes give disjoint corpora.
Corpus synthesize_corpus(Split split, std::size_t count, std::uint64_t seed, std::string_view id_prefix);

}  // namespace ape
