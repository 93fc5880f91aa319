// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "ape/errors.hpp"
#include "ape/run_store.hpp"
#include "ape/surrogates.hpp"
#include "paper_tables.hpp"
#include "temp_dir.hpp"

using namespace ape;
using ape::testing::TempDir;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string field; std::getline(ss, field, sep);) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

const Corpus& train_corpus() {
  static const Corpus c = synthesize_corpus(Split::kTrain, 400, 1, "train");
  return c;
}

const Corpus& test_corpus() {
  static const Corpus c = synthesize_corpus(Split::kTest, 40, 2, "test");
  return c;
}

/// A noisy scalar run persisted through a RunStore.
RunRecord stored_run(const std::filesystem::path& dir, int iterations, std::uint64_t seed) {
  RunConfig c;
  c.iterations = iterations;
  c.acceptance.mode = AcceptanceMode::kLogisticThreshold;
  c.seed = seed;
  SurrogateParams p;
  p.initial_skill = 0.1;
  p.noise_sigma = 0.01;
  p.seed = seed;
  ScalarSurrogate learner(p);
  RunStore store = RunStore::create(dir, to_json(c));
  return run(c, learner, train_corpus(), test_corpus(), &store);
}

MetricsSnapshot table1_snapshot(bool final_phase) {
  MetricsSnapshot s;
  const auto& t = ape::testing::kTable1;
  auto pick = [&](std::size_t i) { return final_phase ? t[i].final_value : t[i].baseline; };
  s.bleu = {pick(0), 0.0};
  s.rouge1_f1 = {pick(1), 0.0};
  s.bertscore_f1 = MeanStd{pick(2), 0.0};
  s.perplexity = MeanStd{pick(3), 0.0};
  s.n_examples = 1;
  return s;
}

}  // namespace

TEST_CASE("seventeen iterations give seventeen rows and a header") {
  TempDir dir;
  const RunRecord r = stored_run(dir.path(), 17, 3);
  const auto csv = read_lines(dir.path() / "iterations.csv");
  REQUIRE(csv.size() == 18);
  CHECK(csv[0] == kIterationsCsvHeader);
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto fields = split(csv[i]);
    REQUIRE(fields.size() == 9);
    CHECK(fields[0] == std::to_string(i));
    CHECK(split_batch_ids(fields[1]) == r.iterations[i - 1].batch_ids);
    CHECK(std::stod(fields[2]) == r.iterations[i - 1].s_before);
    CHECK(fields[6] == (r.iterations[i - 1].accepted ? "true" : "false"));
    CHECK(fields[7] == r.iterations[i - 1].checkpoint_ref);
  }
  CHECK(read_lines(dir.path() / "iterations.jsonl").size() == 17);
}

TEST_CASE("stored runs reload field for field") {
  TempDir dir;
  const RunRecord r = stored_run(dir.path(), 17, 5);
  const RunRecord back = load_run(dir.path());
  CHECK(back == r);
  CHECK(back.accepted_count == r.accepted_count);
  CHECK(back.final_state == r.final_state);
}

TEST_CASE("a run aborted at iteration nine keeps rows one to nine") {
  TempDir dir;
  // Fails the ninth train call the way a dead external learner would.
  struct FailingLearner : ScalarSurrogate {
    using ScalarSurrogate::ScalarSurrogate;
    int trains = 0;
    void train(std::span<const Example> batch, const Hyperparams& hp) override {
      if (++trains == 9) throw ProtocolError("learner process exited while awaiting the reply to 'train'");
      ScalarSurrogate::train(batch, hp);
    }
  };
  SurrogateParams p;
  p.noise_sigma = 0.01;
  FailingLearner learner(p);
  RunConfig c;
  c.iterations = 17;
  RunStore store = RunStore::create(dir.path(), to_json(c));
  CHECK_THROWS_AS(run(c, learner, train_corpus(), test_corpus(), &store), RunAborted);

  const auto csv = read_lines(dir.path() / "iterations.csv");
  REQUIRE(csv.size() == 10);
  for (std::size_t i = 1; i < csv.size(); ++i) CHECK(split(csv[i]).front() == std::to_string(i));
  CHECK(split(csv[9])[6] == "false");

  const RunRecord back = load_run(dir.path());
  REQUIRE(back.iterations.size() == 9);
  CHECK(back.iterations.back().error);
  CHECK_FALSE(back.iterations.front().error);
}

TEST_CASE("reopening a run resumes numbering") {
  TempDir dir;
  stored_run(dir.path(), 4, 1);
  RunStore store = RunStore::open(dir.path());
  CHECK(store.next_iteration() == 5);
  IterationRecord dup;
  dup.iteration = 4;
  CHECK_THROWS_AS(store.persist_iteration(dup), DataError);
  IterationRecord next;
  next.iteration = 5;
  next.batch_ids = {"train-00001"};
  store.persist_iteration(next);
  CHECK(store.next_iteration() == 6);
  CHECK(load_run(dir.path()).iterations.size() == 5);

  CHECK_THROWS_WITH_AS(RunStore::create(dir.path(), json::object()), doctest::Contains("already holds a run"),
                       DataError);
  TempDir empty;
  CHECK_THROWS_AS(RunStore::open(empty.path()), DataError);
}

TEST_CASE("a torn final line is ignored, a torn middle line is not") {
  TempDir dir;
  stored_run(dir.path(), 3, 1);
  const auto jsonl = dir.path() / "iterations.jsonl";
  std::ofstream(jsonl, std::ios::app) << R"({"iteration": 4, "batch)";
  CHECK(load_run(dir.path()).iterations.size() == 3);
  std::ofstream(jsonl, std::ios::app) << "\n" << R"({"iteration": 5})" << "\n";
  CHECK_THROWS_WITH_AS(load_run(dir.path()), doctest::Contains("iterations.jsonl:4"), DataError);
}

TEST_CASE("missing baseline") {
  TempDir dir;
  CHECK_THROWS_WITH_AS(load_run(dir.path()), doctest::Contains("baseline"), DataError);
  RunStore::create(dir.path(), json::object());
  CHECK_THROWS_WITH_AS(build_report(dir.path()), doctest::Contains("baseline"), DataError);
}

TEST_CASE("report reproduces the published metric table") {
  RunRecord r;
  r.baseline = {0, 0.062, table1_snapshot(false)};
  IterationRecord it;
  it.iteration = 1;
  it.accepted = true;
  it.s_before = 0.062;
  it.s_after_candidate = 0.083;
  it.candidate = table1_snapshot(true);
  r.iterations.push_back(it);
  derive_outcome(r);

  const ReportBundle rep = build_report(r);
  REQUIRE(rep.table.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& fx = ape::testing::kTable1[i];
    REQUIRE(rep.table[i].improvement_pct);
    CHECK(std::abs(*rep.table[i].improvement_pct - fx.printed_pct) <= 0.05);
    CHECK(rep.table[i].lower_is_better == fx.lower_is_better);
  }
  const json doc = to_json(rep);
  CHECK(doc["table"][3]["metric"] == "perplexity");
  CHECK(doc["table"][3]["direction"] == "reduction");
  CHECK(doc["table"][0]["direction"] == "increase");
  CHECK(doc["series_normalized"]["bleu"] == json::array({0.0, 1.0}));
  CHECK(doc["series_normalized"]["perplexity"] == json::array({1.0, 0.0}));
}

TEST_CASE("constant series normalize to zeros and fit a zero rate") {
  RunRecord r;
  r.baseline = {0, 0.3, table1_snapshot(false)};
  for (int t = 1; t <= 5; ++t) {
    IterationRecord it;
    it.iteration = t;
    it.s_before = 0.3;
    it.s_after_candidate = 0.29;
    it.delta_s = -0.01;
    r.iterations.push_back(it);
  }
  derive_outcome(r);
  const ReportBundle rep = build_report(r);
  for (const auto& column : rep.series_normalized) {
    CHECK(column == std::vector<double>(6, 0.0));
  }
  REQUIRE(rep.k_hat);
  CHECK(*rep.k_hat == 0.0);
  CHECK(rep.final_s == 0.3);
  CHECK(rep.accepted_count == 0);
}

TEST_CASE("zero baseline leaves the improvement undefined") {
  RunRecord r;
  r.baseline.snapshot.n_examples = 1;
  IterationRecord it;
  it.iteration = 1;
  it.accepted = true;
  it.s_after_candidate = 0.1;
  it.candidate = MetricsSnapshot{{0.1, 0.0}, {0.1, 0.0}, std::nullopt, std::nullopt, 1};
  r.iterations.push_back(it);
  derive_outcome(r);
  const ReportBundle rep = build_report(r);
  CHECK_FALSE(rep.table[0].improvement_pct);
  CHECK(to_json(rep)["table"][0]["improvement_pct"].is_null());
  CHECK_FALSE(rep.k_hat);
  CHECK(to_json(rep)["k_hat"].is_null());
}

TEST_CASE("written report stays within the unit interval") {
  TempDir dir;
  stored_run(dir.path(), 17, 11);
  const ReportBundle rep = build_report(dir.path());
  write_report(dir.path(), rep);
  const auto csv = read_lines(dir.path() / "series_normalized.csv");
  REQUIRE(csv.size() == 19);
  CHECK(csv[0] == "s,bleu,rouge1_f1");
  for (std::size_t i = 1; i < csv.size(); ++i) {
    for (const auto& field : split(csv[i])) {
      const double v = std::stod(field);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  std::ifstream in(dir.path() / "report.json");
  const json doc = json::parse(in);
  CHECK(doc["iterations"] == 17);
  CHECK(doc["timeline"].size() == 17);
}

TEST_CASE("ratings reproduce the published human evaluation") {
  const RatingsTable table = ape::testing::reconstructed_table4();
  const auto summaries = aggregate_ratings(table);
  REQUIRE(summaries.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& fx = ape::testing::kTable4[i];
    CHECK(summaries[i].criterion == fx.criterion);
    CHECK(summaries[i].n_baseline == 700);
    CHECK(summaries[i].n_final == 700);
    CHECK(std::abs(summaries[i].baseline_mean - fx.baseline_mean) <= 1e-12);
    CHECK(std::abs(summaries[i].final_mean - fx.final_mean) <= 1e-12);
    CHECK(std::abs(summaries[i].improvement_pct - fx.printed_pct) <= 0.05);
    CHECK(summaries[i].final_standard_error ==
          doctest::Approx(summaries[i].final_std / std::sqrt(700.0)).epsilon(1e-15));
  }

  TempDir dir;
  save_ratings_csv(table, dir.path() / "ratings.csv");
  const RatingsTable back = load_ratings_csv(dir.path() / "ratings.csv");
  CHECK(back.rows().size() == 7000);
  const auto again = aggregate_ratings(back);
  CHECK(again[1].improvement_pct == summaries[1].improvement_pct);

  write_ratings_summary(dir.path() / "out", summaries);
  CHECK(read_lines(dir.path() / "out" / "ratings_summary.csv").size() == 6);
}

TEST_CASE("equal ratings have zero spread and zero improvement") {
  std::vector<Rating> rows;
  for (int a = 0; a < 10; ++a) {
    for (auto phase : {RatingPhase::kBaseline, RatingPhase::kFinal}) {
      rows.push_back({fmt::format("a{}", a), "r", phase, Criterion::kFluency, 3});
    }
  }
  const auto s = aggregate_ratings(RatingsTable(rows));
  REQUIRE(s.size() == 1);
  CHECK(s[0].final_std == 0.0);
  CHECK(s[0].final_standard_error == 0.0);
  CHECK(s[0].improvement_pct == 0.0);
}

TEST_CASE("ratings input is validated") {
  TempDir dir;
  auto write = [&](const std::string& body) {
    std::ofstream(dir.path() / "r.csv") << body;
    return dir.path() / "r.csv";
  };
  const std::string header = "article_id,rater_id,phase,criterion,score\n";

  CHECK_THROWS_WITH_AS(load_ratings_csv(write("id,rater,phase,criterion,score\n")), doctest::Contains("header"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_ratings_csv(write(header + "a,r,baseline,fluency,6\n")), doctest::Contains("1..5"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_ratings_csv(write(header + "a,r,baseline,fluency,3\na,r,final,fluency,2.5\n")),
                       doctest::Contains("r.csv:3"), DataError);
  CHECK_THROWS_WITH_AS(load_ratings_csv(write(header + "a,r,midway,fluency,3\n")), doctest::Contains("midway"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_ratings_csv(write(header + "a,r,final,charm,3\n")), doctest::Contains("charm"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_ratings_csv(write(header + "a,r,final,fluency\n")), doctest::Contains("5 fields"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_ratings_csv(write(header + "a,r,final,fluency,3\na,r,final,fluency,4\n")),
                       doctest::Contains("duplicate"), DataError);

  const RatingsTable one_sided(std::vector<Rating>{{"a", "r", RatingPhase::kBaseline, Criterion::kCoherence, 2}});
  CHECK_THROWS_WITH_AS(aggregate_ratings(one_sided), doctest::Contains("(final, coherence)"), DataError);
  CHECK_THROWS_AS(aggregate_ratings(RatingsTable({})), DataError);
}
