// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Operator commands behind the `ape` executable, kept in a library so tests
// can drive them in-process.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ape/controller.hpp"
#include "ape/serialization.hpp"
#include "ape/surrogates.hpp"

namespace ape::cli {

enum class LearnerType { kScalarSurrogate, kTextSurrogate, kExternal };

struct LearnerSpec {
  LearnerType type = LearnerType::kScalarSurrogate;
  double initial_skill = 0.1;
  double noise_sigma = 0.0;
  /// Defaults to the run's tap parameters.
  std::optional<TapParams> tap;
  std::size_t efficacy_saturation = 200;
  /// Defaults to a value derived from the run seed.
  std::optional<std::uint64_t> seed;
  std::string launch;
  double handshake_timeout_s = 30.0;
  /// 0 waits indefinitely.
  double request_timeout_s = 0.0;
};

struct SyntheticData {
  std::size_t train = 1200;
  std::size_t test = 300;
  std::uint64_t seed = 0;
};

struct DataSpec {
  std::filesystem::path train;
  std::filesystem::path test;
  std::optional<SyntheticData> synthetic;
};

struct CliConfig {
  /// The document as read, with "seed" rewritten when overridden.
  json doc;
  RunConfig run;
  LearnerSpec learner;
  DataSpec data;
};

/// Parses and validates a config document. Corpus paths are resolved
/// against `base_dir`. Throws ConfigError naming the offending key.
CliConfig parse_cli_config(const json& doc, const std::filesystem::path& base_dir);
CliConfig load_cli_config(const std::filesystem::path& path);

void override_seed(CliConfig& config, std::uint64_t seed);

struct Corpora {
  Corpus train;
  Corpus test;
};
Corpora load_corpora(const DataSpec& data);

/// Builds (and for external learners, launches) the configured learner.
std::unique_ptr<Learner> make_learner(const CliConfig& config, const Corpora& corpora);

/// Runs one experiment into `out_dir` and writes its report.
RunRecord execute_run(const CliConfig& config, const Corpora& corpora, const std::filesystem::path& out_dir);

struct AblationRow {
  int delta_d = 0;
  double baseline_s = 0.0;
  double final_s = 0.0;
  int accepted_count = 0;
  int iterations = 0;
  std::filesystem::path run_dir;
};

inline constexpr std::string_view kAblationCsvHeader = "delta_d,baseline_s,final_s,accepted,iterations,run_dir";

/// One sub-run per value under out_dir/delta_d_<N>, same seed and corpora,
/// plus out_dir/ablation.csv.
std::vector<AblationRow> execute_ablation(const CliConfig& config, const std::vector<int>& delta_ds,
                                          const std::filesystem::path& out_dir);

/// Entry point of the `ape` executable. Returns the process exit code.
int main(int argc, char** argv);

}  // namespace ape::cli
