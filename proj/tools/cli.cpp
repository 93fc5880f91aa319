// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <set>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>
#include <unordered_map>

#include "ape/errors.hpp"
#include "ape/external_learner.hpp"
#include "ape/run_store.hpp"
#include "ape/text_metrics.hpp"

namespace fs = std::filesystem;

namespace ape::cli {
namespace {

template <typename T>
T opt(const json& doc, std::string_view key, std::string_view where, const T& fallback) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return fallback;
  bool ok = true;
  if constexpr (std::is_same_v<T, double>) ok = it->is_number();
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) ok = it->is_number_unsigned();
  if constexpr (std::is_same_v<T, std::string>) ok = it->is_string();
  if (!ok) throw ConfigError(fmt::format("{}: '{}' has the wrong type ({})", where, key, it->dump()));
  return it->get<T>();
}

LearnerType learner_type_from_string(std::string_view name) {
  if (name == "scalar_surrogate") return LearnerType::kScalarSurrogate;
  if (name == "text_surrogate") return LearnerType::kTextSurrogate;
  if (name == "external") return LearnerType::kExternal;
  throw ConfigError(fmt::format(
      "learner: unknown type '{}' (expected scalar_surrogate, text_surrogate or external)", name));
}

LearnerSpec parse_learner(const json& doc) {
  reject_unknown_keys(doc,
                      {"type", "initial_skill", "noise_sigma", "tap", "efficacy_saturation", "seed", "launch",
                       "handshake_timeout_s", "request_timeout_s"},
                      "learner");
  LearnerSpec spec;
  if (!doc.contains("type")) throw ConfigError("learner: missing 'type'");
  spec.type = learner_type_from_string(opt<std::string>(doc, "type", "learner", ""));
  spec.initial_skill = opt(doc, "initial_skill", "learner", spec.initial_skill);
  spec.noise_sigma = opt(doc, "noise_sigma", "learner", spec.noise_sigma);
  if (doc.contains("tap")) spec.tap = tap_params_from_json(doc["tap"]);
  spec.efficacy_saturation = opt(doc, "efficacy_saturation", "learner", spec.efficacy_saturation);
  if (doc.contains("seed")) spec.seed = opt<std::uint64_t>(doc, "seed", "learner", 0);
  spec.launch = opt(doc, "launch", "learner", spec.launch);
  spec.handshake_timeout_s = opt(doc, "handshake_timeout_s", "learner", spec.handshake_timeout_s);
  spec.request_timeout_s = opt(doc, "request_timeout_s", "learner", spec.request_timeout_s);

  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("learner: 'noise_sigma' must be >= 0");
  if (spec.efficacy_saturation == 0) throw ConfigError("learner: 'efficacy_saturation' must be >= 1");
  if (!(spec.handshake_timeout_s > 0.0)) throw ConfigError("learner: 'handshake_timeout_s' must be > 0");
  if (!(spec.request_timeout_s >= 0.0)) throw ConfigError("learner: 'request_timeout_s' must be >= 0");
  if (spec.type == LearnerType::kExternal) {
    if (spec.launch.empty()) throw ConfigError("learner: type 'external' needs a 'launch' command");
  } else if (!spec.launch.empty()) {
    throw ConfigError("learner: 'launch' only applies to type 'external'");
  }
  return spec;
}

DataSpec parse_data(const json& doc, const fs::path& base_dir) {
  reject_unknown_keys(doc, {"train", "test", "synthetic"}, "data");
  DataSpec data;
  if (doc.contains("synthetic")) {
    if (doc.contains("train") || doc.contains("test")) {
      throw ConfigError("data: give either 'synthetic' or 'train'/'test' paths, not both");
    }
    const json& syn = doc["synthetic"];
    reject_unknown_keys(syn, {"train", "test", "seed"}, "data.synthetic");
    SyntheticData s;
    s.train = opt(syn, "train", "data.synthetic", s.train);
    s.test = opt(syn, "test", "data.synthetic", s.test);
    s.seed = opt(syn, "seed", "data.synthetic", s.seed);
    if (s.train == 0 || s.test == 0) throw ConfigError("data.synthetic: 'train' and 'test' must be >= 1");
    data.synthetic = s;
    return data;
  }
  for (const char* key : {"train", "test"}) {
    if (!doc.contains(key)) throw ConfigError(fmt::format("data: missing '{}'", key));
  }
  auto resolve = [&](const char* key) {
    fs::path p = opt<std::string>(doc, key, "data", "");
    if (p.empty()) throw ConfigError(fmt::format("data: '{}' is empty", key));
    return p.is_absolute() ? p : base_dir / p;
  };
  data.train = resolve("train");
  data.test = resolve("test");
  return data;
}

std::uint64_t derived_learner_seed(std::uint64_t run_seed) { return run_seed ^ 0x9E3779B97F4A7C15ULL; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

json read_config_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file '{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

// --- eval helpers ----------------------------------------------------------

template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json doc = json::parse(line);
      if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string()) {
        throw DataError("expected an object with a string 'id'");
      }
      fn(doc);
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
}

struct TextFile {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::string> text;
};

TextFile read_texts(const fs::path& path) {
  TextFile out;
  for_each_jsonl(path, [&](const json& doc) {
    if (!doc.contains("text") || !doc["text"].is_string()) throw DataError("expected a string 'text'");
    const std::string id = doc["id"].get<std::string>();
    if (!out.text.emplace(id, doc["text"].get<std::string>()).second) {
      throw DataError(fmt::format("duplicate id '{}'", id));
    }
    out.ids.push_back(id);
  });
  return out;
}

std::unordered_map<std::string, std::vector<metrics::Embedding>> read_embeddings(const fs::path& path) {
  std::unordered_map<std::string, std::vector<metrics::Embedding>> out;
  for_each_jsonl(path, [&](const json& doc) {
    if (!doc.contains("vectors") || !doc["vectors"].is_array()) throw DataError("expected an array 'vectors'");
    const std::string id = doc["id"].get<std::string>();
    if (!out.emplace(id, doc["vectors"].get<std::vector<metrics::Embedding>>()).second) {
      throw DataError(fmt::format("duplicate id '{}'", id));
    }
  });
  return out;
}

std::string list_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) out += fmt::format(", ... ({} total)", ids.size());
  return out;
}

std::string format_table(const MetricsSnapshot& s) {
  std::string out = fmt::format("{:<14}{:>10}{:>10}\n", "metric", "mean", "std");
  auto row = [&](std::string_view name, const MeanStd& v) {
    out += fmt::format("{:<14}{:>10.4f}{:>10.4f}\n", name, v.mean, v.std);
  };
  row("BLEU", s.bleu);
  row("ROUGE-1 F1", s.rouge1_f1);
  if (s.bertscore_f1) row("BERTScore F1", *s.bertscore_f1);
  if (s.perplexity) row("Perplexity", *s.perplexity);
  out += fmt::format("n = {}\n", s.n_examples);
  return out;
}

int cmd_eval(const fs::path& hyps_path, const fs::path& refs_path, const std::vector<std::string>& embeddings,
             const std::string& format) {
  const TextFile hyps = read_texts(hyps_path);
  const TextFile refs = read_texts(refs_path);

  std::vector<std::string> missing_hyp, missing_ref;
  for (const auto& id : refs.ids) {
    if (!hyps.text.contains(id)) missing_hyp.push_back(id);
  }
  for (const auto& id : hyps.ids) {
    if (!refs.text.contains(id)) missing_ref.push_back(id);
  }
  if (!missing_hyp.empty() || !missing_ref.empty()) {
    std::string msg = "hypothesis and reference ids do not align";
    if (!missing_hyp.empty()) msg += fmt::format("; missing from '{}': {}", hyps_path.string(), list_ids(missing_hyp));
    if (!missing_ref.empty()) msg += fmt::format("; missing from '{}': {}", refs_path.string(), list_ids(missing_ref));
    throw DataError(msg);
  }

  std::vector<std::string> h, r;
  for (const auto& id : refs.ids) {
    h.push_back(hyps.text.at(id));
    r.push_back(refs.text.at(id));
  }
  std::vector<metrics::EmbeddingPair> pairs;
  if (!embeddings.empty()) {
    auto he = read_embeddings(embeddings.at(0));
    auto re = read_embeddings(embeddings.at(1));
    for (const auto& id : refs.ids) {
      auto hi = he.find(id);
      auto ri = re.find(id);
      if (hi == he.end() || ri == re.end()) {
        throw DataError(fmt::format("no embeddings for id '{}' in '{}'", id,
                                    hi == he.end() ? embeddings[0] : embeddings[1]));
      }
      pairs.push_back({std::move(hi->second), std::move(ri->second)});
    }
  }

  metrics::CorpusInputs inputs;
  inputs.hypotheses = h;
  inputs.references = r;
  inputs.embeddings = pairs;
  inputs.ids = refs.ids;
  const auto scores = metrics::score_corpus(inputs);
  if (format == "table") {
    std::cout << format_table(scores.snapshot);
  } else {
    std::cout << to_json(scores.snapshot).dump(2) << "\n";
  }
  return 0;
}

void configure_logging() {
  auto logger = spdlog::get("ape");
  if (!logger) logger = spdlog::stderr_logger_mt("ape");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("APE_LOG"); level && *level) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

std::vector<int> parse_delta_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--delta-d: '{}' is not a positive integer", item));
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace

CliConfig parse_cli_config(const json& doc, const fs::path& base_dir) {
  CliConfig config;
  config.doc = doc;
  config.run = run_config_from_json(doc, {"learner", "data"});
  if (!doc.contains("learner")) throw ConfigError("config: missing 'learner'");
  if (!doc.contains("data")) throw ConfigError("config: missing 'data'");
  config.learner = parse_learner(doc["learner"]);
  config.data = parse_data(doc["data"], base_dir);
  config.run.validate();
  if (config.learner.tap) config.learner.tap->validate();
  const double s_max = config.learner.tap.value_or(config.run.tap).s_max;
  if (!(config.learner.initial_skill >= 0.0 && config.learner.initial_skill <= s_max)) {
    throw ConfigError(fmt::format("learner: 'initial_skill' {} outside [0, {}]", config.learner.initial_skill, s_max));
  }
  return config;
}

CliConfig load_cli_config(const fs::path& path) {
  return parse_cli_config(read_config_json(path), path.parent_path());
}

void override_seed(CliConfig& config, std::uint64_t seed) {
  config.run.seed = seed;
  config.doc["seed"] = seed;
}

Corpora load_corpora(const DataSpec& data) {
  if (data.synthetic) {
    return {synthesize_corpus(Split::kTrain, data.synthetic->train, data.synthetic->seed, "train"),
            synthesize_corpus(Split::kTest, data.synthetic->test, data.synthetic->seed + 1, "test")};
  }
  for (const auto& p : {data.train, data.test}) {
    if (!fs::exists(p)) throw DataError(fmt::format("corpus file '{}' does not exist", p.string()));
  }
  Corpora c{load_corpus(data.train, Split::kTrain), load_corpus(data.test, Split::kTest)};
  require_disjoint(c.train, c.test);
  return c;
}

std::unique_ptr<Learner> make_learner(const CliConfig& config, const Corpora& corpora) {
  const LearnerSpec& spec = config.learner;
  if (spec.type == LearnerType::kExternal) {
    ExternalLearnerOptions options;
    options.launch_command = spec.launch;
    options.handshake_timeout = std::chrono::milliseconds(static_cast<long long>(spec.handshake_timeout_s * 1000));
    options.request_timeout = std::chrono::milliseconds(static_cast<long long>(spec.request_timeout_s * 1000));
    return ExternalLearner::connect(options);
  }
  SurrogateParams params;
  params.initial_skill = spec.initial_skill;
  params.tap = spec.tap.value_or(config.run.tap);
  params.noise_sigma = spec.noise_sigma;
  params.seed = spec.seed.value_or(derived_learner_seed(config.run.seed));
  params.batch_efficacy = SurrogateParams::saturating_efficacy(spec.efficacy_saturation);
  if (spec.type == LearnerType::kScalarSurrogate) return std::make_unique<ScalarSurrogate>(params);
  return std::make_unique<TextSurrogate>(params, std::vector<const Corpus*>{&corpora.train, &corpora.test});
}

RunRecord execute_run(const CliConfig& config, const Corpora& corpora, const fs::path& out_dir) {
  RunStore store = RunStore::create(out_dir, config.doc);
  std::unique_ptr<Learner> learner = make_learner(config, corpora);
  RunRecord record;
  try {
    record = run(config.run, *learner, corpora.train, corpora.test, &store);
  } catch (...) {
    learner->shutdown();
    throw;
  }
  learner->shutdown();
  write_report(out_dir, build_report(record));
  return record;
}

std::vector<AblationRow> execute_ablation(const CliConfig& config, const std::vector<int>& delta_ds,
                                          const fs::path& out_dir) {
  if (delta_ds.empty()) throw ConfigError("--delta-d needs at least one value");
  std::set<int> distinct(delta_ds.begin(), delta_ds.end());
  if (distinct.size() != delta_ds.size()) throw ConfigError("--delta-d values must be distinct");

  const Corpora corpora = load_corpora(config.data);
  std::vector<AblationRow> rows;
  for (int delta_d : delta_ds) {
    CliConfig arm = config;
    arm.run.delta_d = delta_d;
    arm.doc["delta_d"] = delta_d;
    arm.run.validate();
    const fs::path dir = out_dir / fmt::format("delta_d_{}", delta_d);
    const RunRecord record = execute_run(arm, corpora, dir);
    rows.push_back({delta_d, record.baseline.s_value, record.final_state.s_value, record.accepted_count,
                    static_cast<int>(record.iterations.size()), dir});
  }

  std::string csv = std::string(kAblationCsvHeader) + "\n";
  for (const auto& r : rows) {
    csv += fmt::format("{},{},{},{},{},{}\n", r.delta_d, r.baseline_s, r.final_s, r.accepted_count, r.iterations,
                       r.run_dir.filename().string());
  }
  write_text(out_dir / "ablation.csv", csv);
  return rows;
}

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Adjacent-possible exploration harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, run_path, csv_path, hyps_path, refs_path, deltas = "80,200,400";
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> embeddings;

  auto* run_cmd = app.add_subcommand("run", "Run one exploration experiment");
  run_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  run_cmd->add_option("--out", out_path, "Run directory to create")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");

  auto* ablate_cmd = app.add_subcommand("ablate", "Repeat a run for several batch sizes");
  ablate_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  ablate_cmd->add_option("--delta-d", deltas, "Comma-separated batch sizes")->capture_default_str();
  ablate_cmd->add_option("--out", out_path, "Output directory")->required();
  ablate_cmd->add_option("--seed", seed, "Override the config seed");

  auto* eval_cmd = app.add_subcommand("eval", "Score summaries against references");
  eval_cmd->add_option("--hyps", hyps_path, "Hypotheses, one {id, text} per line")->required();
  eval_cmd->add_option("--refs", refs_path, "References, one {id, text} per line")->required();
  eval_cmd->add_option("--embeddings", embeddings, "Hypothesis and reference embedding files")->expected(2);
  eval_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "table"}));

  auto* report_cmd = app.add_subcommand("report", "Build report.json and series_normalized.csv for a run");
  report_cmd->add_option("--run", run_path, "Run directory")->required();

  auto* ratings_cmd = app.add_subcommand("ratings", "Aggregate human ratings");
  ratings_cmd->add_option("--csv", csv_path, "Ratings CSV")->required();
  ratings_cmd->add_option("--out", out_path, "Directory for ratings_summary.{json,csv}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (*run_cmd) {
      CliConfig config = load_cli_config(config_path);
      if (seed) override_seed(config, *seed);
      const Corpora corpora = load_corpora(config.data);
      const RunRecord record = execute_run(config, corpora, out_path);
      std::cout << json{{"run_dir", out_path},
                        {"baseline_s", record.baseline.s_value},
                        {"final_s", record.final_state.s_value},
                        {"accepted", record.accepted_count},
                        {"iterations", record.iterations.size()}}
                       .dump()
                << "\n";
    } else if (*ablate_cmd) {
      CliConfig config = load_cli_config(config_path);
      if (seed) override_seed(config, *seed);
      const auto rows = execute_ablation(config, parse_delta_list(deltas), out_path);
      std::cout << fmt::format("{:>8}{:>12}{:>12}{:>10}\n", "delta_d", "baseline_s", "final_s", "accepted");
      for (const auto& r : rows) {
        std::cout << fmt::format("{:>8}{:>12.6f}{:>12.6f}{:>10}\n", r.delta_d, r.baseline_s, r.final_s,
                                 r.accepted_count);
      }
    } else if (*eval_cmd) {
      return cmd_eval(hyps_path, refs_path, embeddings, format);
    } else if (*report_cmd) {
      const ReportBundle report = build_report(fs::path(run_path));
      write_report(run_path, report);
      std::cout << to_json(report).dump(2) << "\n";
    } else if (*ratings_cmd) {
      const auto summaries = aggregate_ratings(load_ratings_csv(csv_path));
      if (!out_path.empty()) write_ratings_summary(out_path, summaries);
      std::cout << to_json(summaries).dump(2) << "\n";
    }
  } catch (const RunAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ape::cli
