// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/serialization.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fmt/format.h>
#include <fstream>
#include <random>

#include "ape/errors.hpp"

namespace ape {
namespace {

template <typename E>
[[noreturn]] void fail(std::string_view msg) {
  throw E(std::string(msg));
}

template <typename T, typename E = ConfigError>
T field(const json& doc, std::string_view key, std::string_view where, const T& fallback) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return fallback;
  bool ok = true;
  if constexpr (std::is_same_v<T, double>) ok = it->is_number();
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) ok = it->is_number_integer();
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) ok = it->is_number_unsigned();
  if (ok) {
    try {
      return it->get<T>();
    } catch (const json::exception&) {
    }
  }
  fail<E>(fmt::format("{}: '{}' has the wrong type ({})", where, key, it->dump()));
}

template <typename T>
T required(const json& doc, std::string_view key, std::string_view where) {
  if (!doc.contains(key)) fail<DataError>(fmt::format("{}: missing '{}'", where, key));
  return field<T, DataError>(doc, key, where, T{});
}

MeanStd mean_std_from_json(const json& doc, std::string_view where) {
  if (!doc.is_object()) fail<DataError>(fmt::format("{} must be an object", where));
  return {required<double>(doc, "mean", where), required<double>(doc, "std", where)};
}

}  // namespace

void reject_unknown_keys(const json& doc, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!doc.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

json to_json(const TapParams& tap) { return {{"k", tap.k}, {"s_max", tap.s_max}, {"dt", tap.dt}}; }

json to_json(const RunConfig& c) {
  json objective = json::object();
  for (const auto& [metric, w] : c.objective.weights()) objective[std::string(to_string(metric))] = w;
  return {
      {"iterations", c.iterations},
      {"delta_d", c.delta_d},
      {"epochs", c.hyperparams.epochs},
      {"learning_rate", c.hyperparams.learning_rate},
      {"grad_accum_steps", c.hyperparams.grad_accum_steps},
      {"label_smoothing", c.hyperparams.label_smoothing},
      {"acceptance",
       {{"mode", to_string(c.acceptance.mode)},
        {"min_rel_gain", c.acceptance.min_rel_gain},
        {"margin", c.acceptance.margin}}},
      {"objective", objective},
      {"selection", to_string(c.selection)},
      {"seed", c.seed},
      {"tap", to_json(c.tap)},
  };
}

json to_json(const MeanStd& value) { return {{"mean", value.mean}, {"std", value.std}}; }

json to_json(const MetricsSnapshot& s) {
  json out = {{"bleu", to_json(s.bleu)}, {"rouge1_f1", to_json(s.rouge1_f1)}, {"n_examples", s.n_examples}};
  if (s.bertscore_f1) out["bertscore_f1"] = to_json(*s.bertscore_f1);
  if (s.perplexity) out["perplexity"] = to_json(*s.perplexity);
  return out;
}

json to_json(const PerformanceState& state) {
  return {{"iteration", state.iteration}, {"s_value", state.s_value}, {"snapshot", to_json(state.snapshot)}};
}

json to_json(const IterationRecord& r) {
  json out = {
      {"iteration", r.iteration},         {"batch_ids", r.batch_ids},
      {"s_before", r.s_before},           {"s_candidate", r.s_after_candidate},
      {"delta_s", r.delta_s},             {"theta", r.theta},
      {"accepted", r.accepted},           {"checkpoint", r.checkpoint_ref},
      {"wall_time_s", r.wall_time_s},
  };
  if (r.candidate) out["candidate"] = to_json(*r.candidate);
  if (r.error) out["error"] = *r.error;
  if (r.rollback_exact) out["rollback_exact"] = *r.rollback_exact;
  return out;
}

TapParams tap_params_from_json(const json& doc) {
  reject_unknown_keys(doc, {"k", "s_max", "dt"}, "tap");
  TapParams tap;
  tap.k = field(doc, "k", "tap", tap.k);
  tap.s_max = field(doc, "s_max", "tap", tap.s_max);
  tap.dt = field(doc, "dt", "tap", tap.dt);
  tap.validate();
  return tap;
}

RunConfig run_config_from_json(const json& doc, std::initializer_list<std::string_view> extra_keys) {
  static constexpr std::array kKeys = {"iterations",       "delta_d",         "epochs",    "learning_rate",
                                       "grad_accum_steps", "label_smoothing", "acceptance", "objective",
                                       "selection",        "seed",            "tap"};
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool known = std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
    for (auto extra : extra_keys) known = known || key == extra;
    if (!known) throw ConfigError(fmt::format("config: unknown key '{}'", key));
  }

  RunConfig c;
  c.iterations = field(doc, "iterations", "config", c.iterations);
  c.delta_d = field(doc, "delta_d", "config", c.delta_d);
  c.hyperparams.epochs = field(doc, "epochs", "config", c.hyperparams.epochs);
  c.hyperparams.learning_rate = field(doc, "learning_rate", "config", c.hyperparams.learning_rate);
  c.hyperparams.grad_accum_steps = field(doc, "grad_accum_steps", "config", c.hyperparams.grad_accum_steps);
  c.hyperparams.label_smoothing = field(doc, "label_smoothing", "config", c.hyperparams.label_smoothing);
  c.seed = field<std::uint64_t>(doc, "seed", "config", c.seed);

  if (auto it = doc.find("acceptance"); it != doc.end()) {
    reject_unknown_keys(*it, {"mode", "min_rel_gain", "margin"}, "acceptance");
    const auto mode = field<std::string>(*it, "mode", "acceptance", "fixed_relative");
    if (mode == "logistic_threshold") {
      c.acceptance.mode = AcceptanceMode::kLogisticThreshold;
    } else if (mode == "fixed_relative") {
      c.acceptance.mode = AcceptanceMode::kFixedRelative;
    } else {
      throw ConfigError(fmt::format("acceptance: unknown mode '{}'", mode));
    }
    c.acceptance.min_rel_gain = field(*it, "min_rel_gain", "acceptance", c.acceptance.min_rel_gain);
    c.acceptance.margin = field(*it, "margin", "acceptance", c.acceptance.margin);
  }
  if (auto it = doc.find("objective"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("objective must be an object of metric weights");
    std::map<Metric, double> weights;
    for (const auto& [key, value] : it->items()) {
      if (!value.is_number()) throw ConfigError(fmt::format("objective: weight '{}' must be a number", key));
      weights[metric_from_string(key)] = value.get<double>();
    }
    c.objective = ObjectiveSpec(std::move(weights));
  }
  if (auto it = doc.find("selection"); it != doc.end()) {
    const auto name = field<std::string>(doc, "selection", "config", "random");
    if (name == "random") {
      c.selection = SelectionStrategy::kRandom;
    } else if (name == "deficiency") {
      c.selection = SelectionStrategy::kDeficiency;
    } else {
      throw ConfigError(fmt::format("selection: unknown strategy '{}'", name));
    }
  }
  if (auto it = doc.find("tap"); it != doc.end()) c.tap = tap_params_from_json(*it);
  return c;
}

MetricsSnapshot metrics_snapshot_from_json(const json& doc) {
  if (!doc.is_object()) throw DataError("metrics snapshot must be an object");
  MetricsSnapshot s;
  for (auto key : {"bleu", "rouge1_f1"}) {
    if (!doc.contains(key)) throw DataError(fmt::format("metrics snapshot is missing '{}'", key));
  }
  s.bleu = mean_std_from_json(doc["bleu"], "bleu");
  s.rouge1_f1 = mean_std_from_json(doc["rouge1_f1"], "rouge1_f1");
  if (doc.contains("bertscore_f1")) s.bertscore_f1 = mean_std_from_json(doc["bertscore_f1"], "bertscore_f1");
  if (doc.contains("perplexity")) s.perplexity = mean_std_from_json(doc["perplexity"], "perplexity");
  s.n_examples = required<std::size_t>(doc, "n_examples", "snapshot");
  return s;
}

PerformanceState performance_state_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("snapshot")) throw DataError("performance state needs a snapshot");
  return {required<int>(doc, "iteration", "state"), required<double>(doc, "s_value", "state"),
          metrics_snapshot_from_json(doc["snapshot"])};
}

IterationRecord iteration_record_from_json(const json& doc) {
  if (!doc.is_object()) throw DataError("iteration record must be an object");
  IterationRecord r;
  r.iteration = required<int>(doc, "iteration", "iteration record");
  r.batch_ids = required<std::vector<std::string>>(doc, "batch_ids", "iteration record");
  r.s_before = required<double>(doc, "s_before", "iteration record");
  r.s_after_candidate = required<double>(doc, "s_candidate", "iteration record");
  r.delta_s = required<double>(doc, "delta_s", "iteration record");
  r.theta = required<double>(doc, "theta", "iteration record");
  r.accepted = required<bool>(doc, "accepted", "iteration record");
  r.checkpoint_ref = required<std::string>(doc, "checkpoint", "iteration record");
  r.wall_time_s = required<double>(doc, "wall_time_s", "iteration record");
  if (doc.contains("candidate")) r.candidate = metrics_snapshot_from_json(doc["candidate"]);
  if (doc.contains("error")) r.error = doc["error"].get<std::string>();
  if (doc.contains("rollback_exact")) r.rollback_exact = doc["rollback_exact"].get<bool>();
  return r;
}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open corpus file '{}'", path.string()));
  std::vector<Example> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      const std::string where = fmt::format("{}:{}", path.string(), line_no);
      examples.push_back({required<std::string>(doc, "id", where), required<std::string>(doc, "article", where),
                          required<std::string>(doc, "reference", where)});
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed JSON ({})", path.string(), line_no, e.what()));
    }
  }
  return Corpus(split, std::move(examples));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write corpus file '{}'", path.string()));
  for (const auto& ex : corpus.examples()) {
    out << json{{"id", ex.id}, {"article", ex.article}, {"reference", ex.reference}}.dump() << '\n';
  }
  if (!out) throw DataError(fmt::format("failed writing corpus file '{}'", path.string()));
}

Corpus synthesize_corpus(Split split, std::size_t count, std::uint64_t seed, std::string_view id_prefix) {
  static constexpr std::array<std::string_view, 96> kWords = {
      "officials", "said",     "the",       "government", "announced", "new",       "measures",   "after",
      "police",    "reported", "a",         "series",     "of",        "attacks",   "in",         "city",
      "council",   "voted",    "to",        "approve",    "budget",    "for",       "schools",    "and",
      "hospitals", "minister", "warned",    "that",       "prices",    "could",     "rise",       "sharply",
      "market",    "shares",   "fell",      "on",         "monday",    "investors", "worried",    "about",
      "growth",    "team",     "won",       "final",      "match",     "against",   "rivals",     "with",
      "late",      "goal",     "storm",     "hit",        "coast",     "forcing",   "thousands",  "evacuate",
      "homes",     "scientists", "found",   "evidence",   "ancient",   "species",   "living",     "deep",
      "ocean",     "court",    "ruled",     "company",    "must",      "pay",       "damages",    "workers",
      "election",  "results",  "showed",    "narrow",     "lead",      "opposition", "party",     "leader",
      "president", "visited",  "region",    "promised",   "support",   "rebuilding", "roads",     "bridges",
      "fighters",  "joined",   "forces",    "border",     "training",  "foreign",   "volunteers", "groups"};

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  std::uniform_int_distribution<int> ref_len(18, 36);
  std::uniform_int_distribution<int> pad_len(30, 60);

  auto sentence_run = [&](int n) {
    std::string text;
    bool capitalize = true;
    for (int i = 0; i < n; ++i) {
      std::string w(kWords[word(rng)]);
      if (capitalize) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      capitalize = false;
      if (!text.empty()) text.push_back(' ');
      text += w;
      if ((i + 1) % 9 == 0 || i + 1 == n) {
        text.push_back('.');
        capitalize = true;
      }
    }
    return text;
  };

  std::vector<Example> examples;
  examples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string reference = sentence_run(ref_len(rng));
    const std::string article = sentence_run(pad_len(rng)) + " " + reference + " " + sentence_run(pad_len(rng));
    examples.push_back({fmt::format("{}-{:05}", id_prefix, i), article, reference});
  }
  return Corpus(split, std::move(examples));
}

}  // namespace ape
