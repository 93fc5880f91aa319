// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fmt/format.h>
#include <random>

#include "ape/errors.hpp"
#include "ape/serialization.hpp"
#include "ape/surrogates.hpp"
#include "ape/tap_dynamics.hpp"
#include "ape/text_metrics.hpp"

using namespace ape;

namespace {

std::vector<Example> batch_of(std::size_t n) {
  std::vector<Example> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back({fmt::format("b{}", i), "article", "reference"});
  return b;
}

std::vector<ArticleRequest> requests(const Corpus& c) {
  std::vector<ArticleRequest> out;
  for (const auto& e : c.examples()) out.push_back({e.id, e.article});
  return out;
}

double corpus_bleu(TextSurrogate& s, const Corpus& c) {
  const auto summaries = s.summarize(requests(c));
  std::vector<double> scores;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    scores.push_back(metrics::bleu(metrics::tokenize(summaries[i].text), metrics::tokenize(c.examples()[i].reference)));
  }
  return metrics::corpus_stats(scores).mean;
}

/// A text surrogate pinned at `skill` by starting there.
TextSurrogate at_skill(double skill, std::uint64_t seed, const Corpus& c) {
  SurrogateParams p;
  p.initial_skill = skill;
  p.seed = seed;
  return TextSurrogate(p, {&c});
}

}  // namespace

TEST_CASE("scalar surrogate training steps") {
  SurrogateParams p;
  p.tap = {0.1, 1.0, 1.0};

  SUBCASE("saturated skill does not move") {
    p.initial_skill = 1.0;
    ScalarSurrogate s(p);
    s.train(batch_of(200), {});
    CHECK(s.skill() == 1.0);
  }
  SUBCASE("full batch") {
    p.initial_skill = 0.5;
    ScalarSurrogate s(p);
    s.train(batch_of(200), {});
    CHECK(s.skill() == 0.525);
  }
  SUBCASE("half batch") {
    p.initial_skill = 0.5;
    ScalarSurrogate s(p);
    s.train(batch_of(100), {});
    CHECK(s.skill() == 0.5125);
  }
  SUBCASE("empty batch") {
    ScalarSurrogate s(p);
    CHECK_THROWS_AS(s.train(batch_of(0), {}), DataError);
  }
}

TEST_CASE("efficacy saturates at the full batch size") {
  const auto eff = SurrogateParams::saturating_efficacy(200);
  CHECK(eff(80) == 0.4);
  CHECK(eff(200) == 1.0);
  CHECK(eff(400) == 1.0);
}

TEST_CASE("noiseless scalar surrogate reproduces the simulator") {
  const TapParams tap{0.3, 1.0, 1.0};
  SurrogateParams p;
  p.initial_skill = 0.05;
  p.tap = tap;
  ScalarSurrogate s(p);
  const auto traj = tap::simulate_trajectory(0.05, tap, 40, 0.0, 0);
  CHECK(s.skill() == traj.values[0]);
  for (std::size_t t = 1; t < traj.values.size(); ++t) {
    s.train(batch_of(200), {});
    CHECK(s.skill() == traj.values[t]);
  }
}

TEST_CASE("noisy scalar surrogate stays clamped and seeded") {
  SurrogateParams p;
  p.noise_sigma = 0.2;
  p.seed = 4;
  ScalarSurrogate a(p), b(p);
  for (int i = 0; i < 100; ++i) {
    a.train(batch_of(50), {});
    b.train(batch_of(50), {});
    CHECK(a.skill() == b.skill());
    CHECK((a.skill() >= 0.0 && a.skill() <= 1.0));
  }
}

TEST_CASE("scalar snapshot and restore") {
  SurrogateParams p;
  p.noise_sigma = 0.01;
  ScalarSurrogate s(p);
  const double before = s.skill();
  const std::string token = s.snapshot();
  s.train(batch_of(200), {});
  CHECK(s.skill() != before);
  s.restore(token);
  CHECK(s.skill() == before);
  CHECK(*s.direct_objective() == before);
  CHECK_THROWS_AS(s.restore("nope"), DataError);
  CHECK_THROWS_AS(s.summarize({}), DataError);
}

TEST_CASE("text surrogate at full skill returns references") {
  const Corpus c = synthesize_corpus(Split::kTest, 50, 3, "t");
  TextSurrogate s = at_skill(1.0, 1, c);
  const auto out = s.summarize(requests(c));
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].text == c.examples()[i].reference);
  CHECK(corpus_bleu(s, c) == 1.0);
}

TEST_CASE("text surrogate keep rate at zero skill") {
  // A realistic vocabulary, so replacement words rarely hit the reference.
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> word(0, 19999);
  std::vector<Example> ex;
  for (int i = 0; i < 200; ++i) {
    std::string ref;
    for (int w = 0; w < 20; ++w) ref += fmt::format("{}w{}", w ? " " : "", word(rng));
    ex.push_back({fmt::format("t-{}", i), "article " + ref, ref});
  }
  const Corpus c(Split::kTest, std::move(ex));
  TextSurrogate s = at_skill(0.0, 9, c);
  CHECK(s.keep_probability() == doctest::Approx(0.2));
  const auto out = s.summarize(requests(c));
  double overlap = 0.0, total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto ref = metrics::tokenize(c.examples()[i].reference);
    const auto r = metrics::rouge1(metrics::tokenize(out[i].text), ref);
    overlap += r.recall * static_cast<double>(ref.size());
    total += static_cast<double>(ref.size());
  }
  REQUIRE(total >= 1000);
  // Replacements can coincide with reference words, so allow a small excess.
  CHECK(std::abs(overlap / total - 0.2) <= 0.05);
}

TEST_CASE("text surrogate is deterministic and round-trips snapshots") {
  const Corpus c = synthesize_corpus(Split::kTest, 40, 2, "t");
  SurrogateParams p;
  p.initial_skill = 0.3;
  p.noise_sigma = 0.02;
  p.seed = 12;
  TextSurrogate a(p, {&c}), b(p, {&c});
  CHECK(a.summarize(requests(c)) == b.summarize(requests(c)));

  const auto before = a.summarize(requests(c));
  const std::string token = a.snapshot();
  a.train(batch_of(200), {});
  CHECK(a.summarize(requests(c)) != before);
  a.restore(token);
  CHECK(a.summarize(requests(c)) == before);

  std::vector<ArticleRequest> unknown{{"missing", "x"}};
  CHECK_THROWS_WITH_AS(a.summarize(unknown), doctest::Contains("missing"), DataError);
}

TEST_CASE("text surrogate bleu increases with skill") {
  const Corpus c = synthesize_corpus(Split::kTest, 100, 21, "t");
  int ordered = 0, trials = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (double s1 : {0.0, 0.2, 0.45, 0.7}) {
      const double s2 = s1 + 0.1;
      TextSurrogate lo = at_skill(s1, seed, c), hi = at_skill(s2, seed + 1000, c);
      ordered += corpus_bleu(lo, c) < corpus_bleu(hi, c);
      ++trials;
    }
  }
  CHECK(ordered >= 0.95 * trials);
}

TEST_CASE("surrogate construction is validated") {
  SurrogateParams p;
  p.initial_skill = 1.5;
  CHECK_THROWS_AS(ScalarSurrogate{p}, ConfigError);
  p.initial_skill = 0.5;
  p.tap.k = -1;
  CHECK_THROWS_AS(ScalarSurrogate{p}, ConfigError);
}
