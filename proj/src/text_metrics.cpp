// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <thread>
#include <unordered_map>

#include "ape/errors.hpp"

namespace ape::metrics {
namespace {

struct CodePoint {
  char32_t value;
  std::size_t length;
};

// Malformed sequences decode as U+FFFD, one byte at a time.
CodePoint decode_at(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (pos + len > s.size()) return {0xFFFD, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

// Start of the code point that ends right before `end`.
std::size_t previous_start(std::string_view s, std::size_t end) {
  std::size_t pos = end - 1;
  std::size_t steps = 0;
  while (pos > 0 && steps < 3 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) {
    --pos;
    ++steps;
  }
  if (decode_at(s, pos).length != end - pos) return end - 1;
  return pos;
}

bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

bool is_punct(char32_t c) {
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x3001: case 0x3002: case 0x3003:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E);
}

void push_token(std::vector<std::string>& out, std::string_view word) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end) {
    CodePoint cp = decode_at(word, begin);
    if (!is_punct(cp.value)) break;
    begin += cp.length;
  }
  while (end > begin) {
    std::size_t start = previous_start(word, end);
    if (!is_punct(decode_at(word, start).value)) break;
    end = start;
  }
  if (begin == end) return;
  std::string token(word.substr(begin, end - begin));
  for (char& ch : token) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  out.push_back(std::move(token));
}

using NgramCounts = std::unordered_map<std::string, int>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

int clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  int matches = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(count, it->second);
  }
  return matches;
}

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double cosine_unit(const Embedding& a, const Embedding& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

void check_unit_vectors(std::span<const Embedding> vectors, std::size_t dim, std::string_view side) {
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) {
      throw DataError(fmt::format("{} embedding #{} has dimension {}, expected {}", side, i, vectors[i].size(), dim));
    }
    double norm2 = 0.0;
    for (double v : vectors[i]) norm2 += v * v;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
      throw DataError(fmt::format("{} embedding #{} is not unit-normalized (norm {})", side, i, std::sqrt(norm2)));
    }
  }
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence seq;
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  while (pos < text.size()) {
    CodePoint cp = decode_at(text, pos);
    if (is_space(cp.value)) {
      if (word_start != std::string_view::npos) {
        push_token(seq.tokens_, text.substr(word_start, pos - word_start));
        word_start = std::string_view::npos;
      }
    } else if (word_start == std::string_view::npos) {
      word_start = pos;
    }
    pos += cp.length;
  }
  if (word_start != std::string_view::npos) push_token(seq.tokens_, text.substr(word_start));
  return seq;
}

PRF PRF::from(double precision, double recall) {
  const double sum = precision + recall;
  return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
}

double bleu(const TokenSequence& hypothesis, const TokenSequence& reference, int max_n) {
  if (max_n < 1) throw DomainError(fmt::format("bleu max_n must be >= 1 (got {})", max_n));
  if (hypothesis.empty()) return 0.0;

  const auto& hyp = hypothesis.tokens();
  const auto& ref = reference.tokens();
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const int total = hyp.size() >= un ? static_cast<int>(hyp.size() - un + 1) : 0;
    const int matches = clipped_matches(count_ngrams(hyp, un), count_ngrams(ref, un));
    const double precision = matches == 0 ? 1.0 / (total + 1.0) : static_cast<double>(matches) / total;
    log_sum += std::log(precision);
  }
  const double ratio = static_cast<double>(ref.size()) / static_cast<double>(hyp.size());
  const double brevity = std::min(1.0, std::exp(1.0 - ratio));
  return brevity * std::exp(log_sum / max_n);
}

PRF rouge1(const TokenSequence& hypothesis, const TokenSequence& reference) {
  const int overlap = clipped_matches(count_ngrams(hypothesis.tokens(), 1), count_ngrams(reference.tokens(), 1));
  const double precision = hypothesis.empty() ? 0.0 : overlap / static_cast<double>(hypothesis.size());
  const double recall = reference.empty() ? 0.0 : overlap / static_cast<double>(reference.size());
  return PRF::from(precision, recall);
}

double perplexity(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw DataError("perplexity needs at least one token log-probability");
  CompensatedSum sum;
  for (double lp : token_logprobs) {
    if (!(lp <= 0.0)) throw DomainError(fmt::format("log-probability {} is positive", lp));
    sum.add(lp);
  }
  return std::exp(-sum.value() / static_cast<double>(token_logprobs.size()));
}

PRF bertscore(std::span<const Embedding> hyp_embeddings, std::span<const Embedding> ref_embeddings) {
  if (hyp_embeddings.empty() || ref_embeddings.empty()) {
    throw DataError("bertscore needs nonempty hypothesis and reference embeddings");
  }
  const std::size_t dim = ref_embeddings.front().size();
  check_unit_vectors(ref_embeddings, dim, "reference");
  check_unit_vectors(hyp_embeddings, dim, "hypothesis");

  std::vector<double> best_for_ref(ref_embeddings.size(), -1.0);
  CompensatedSum precision_sum;
  for (const auto& h : hyp_embeddings) {
    double best = -1.0;
    for (std::size_t j = 0; j < ref_embeddings.size(); ++j) {
      const double sim = cosine_unit(h, ref_embeddings[j]);
      best = std::max(best, sim);
      best_for_ref[j] = std::max(best_for_ref[j], sim);
    }
    precision_sum.add(best);
  }
  CompensatedSum recall_sum;
  for (double v : best_for_ref) recall_sum.add(v);

  // Clamping keeps rounding noise on unit vectors inside [0, 1].
  auto bound = [](double x) { return std::clamp(x, 0.0, 1.0); };
  const double p = bound(precision_sum.value() / static_cast<double>(hyp_embeddings.size()));
  const double r = bound(recall_sum.value() / static_cast<double>(ref_embeddings.size()));
  return PRF::from(p, r);
}

MeanStd corpus_stats(std::span<const double> per_example_scores) {
  if (per_example_scores.empty()) throw DataError("corpus_stats needs at least one score");
  const auto n = static_cast<double>(per_example_scores.size());
  CompensatedSum sum;
  for (double x : per_example_scores) sum.add(x);
  const double mean = sum.value() / n;
  CompensatedSum squares;
  for (double x : per_example_scores) squares.add((x - mean) * (x - mean));
  return {mean, std::sqrt(squares.value() / n)};
}

double improvement_pct(double baseline, double final_value, bool lower_is_better) {
  if (baseline == 0.0) throw DomainError("improvement relative to a zero baseline is undefined");
  const double diff = lower_is_better ? baseline - final_value : final_value - baseline;
  return 100.0 * diff / baseline;
}

std::vector<double> minmax_normalize(std::span<const double> series) {
  if (series.size() < 2) throw DataError(fmt::format("min-max normalization needs >= 2 values (got {})", series.size()));
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out;
  out.reserve(series.size());
  for (double x : series) out.push_back(range > 0.0 ? (x - min) / range : 0.0);
  return out;
}

std::map<Metric, double> ExampleScore::values() const {
  std::map<Metric, double> out{{Metric::kBleu, bleu}, {Metric::kRouge1, rouge1.f1}};
  if (bertscore) out[Metric::kBertScore] = bertscore->f1;
  if (perplexity) out[Metric::kPerplexity] = *perplexity;
  return out;
}

CorpusScores score_corpus(const CorpusInputs& in, unsigned workers) {
  const std::size_t n = in.hypotheses.size();
  if (n == 0) throw DataError("cannot score an empty corpus");
  if (in.references.size() != n) {
    throw DataError(fmt::format("{} hypotheses but {} references", n, in.references.size()));
  }
  if (!in.embeddings.empty() && in.embeddings.size() != n) throw DataError("embedding count does not match the corpus");
  if (!in.logprobs.empty() && in.logprobs.size() != n) throw DataError("log-probability count does not match the corpus");

  auto label = [&](std::size_t i) {
    return i < in.ids.size() ? fmt::format("'{}'", in.ids[i]) : fmt::format("#{}", i);
  };

  std::vector<ExampleScore> scores(n);
  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const TokenSequence hyp = tokenize(in.hypotheses[i]);
        const TokenSequence ref = tokenize(in.references[i]);
        ExampleScore& s = scores[i];
        s.bleu = bleu(hyp, ref);
        s.rouge1 = rouge1(hyp, ref);
        if (!in.embeddings.empty()) s.bertscore = bertscore(in.embeddings[i].hypothesis, in.embeddings[i].reference);
        if (!in.logprobs.empty()) s.perplexity = perplexity(in.logprobs[i]);
      } catch (const Error& e) {
        throw DataError(fmt::format("example {}: {}", label(i), e.what()));
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, (n + 63) / 64));
  if (workers <= 1) {
    score_range(0, n);
  } else {
    std::vector<std::exception_ptr> failures(workers);
    {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (n + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
          try {
            score_range(begin, end);
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      }
    }
    // Report the failure with the lowest example index.
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  std::vector<double> column(n);
  auto stats = [&](auto&& pick) {
    for (std::size_t i = 0; i < n; ++i) column[i] = pick(scores[i]);
    return corpus_stats(column);
  };

  CorpusScores out;
  out.snapshot.n_examples = n;
  out.snapshot.bleu = stats([](const ExampleScore& s) { return s.bleu; });
  out.snapshot.rouge1_f1 = stats([](const ExampleScore& s) { return s.rouge1.f1; });
  if (!in.embeddings.empty()) out.snapshot.bertscore_f1 = stats([](const ExampleScore& s) { return s.bertscore->f1; });
  if (!in.logprobs.empty()) out.snapshot.perplexity = stats([](const ExampleScore& s) { return *s.perplexity; });
  out.per_example = std::move(scores);
  return out;
}

}  // namespace ape::metrics
