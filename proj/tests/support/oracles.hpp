// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations used to check the metric code.
// Written for clarity, not speed: every n-gram is compared against every
// other by direct slicing.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ape::testing {

using Words = std::vector<std::string>;

inline Words slice(const Words& w, std::size_t start, std::size_t n) {
  return Words(w.begin() + static_cast<std::ptrdiff_t>(start), w.begin() + static_cast<std::ptrdiff_t>(start + n));
}

inline std::size_t occurrences(const Words& haystack, const Words& gram) {
  std::size_t count = 0;
  if (haystack.size() < gram.size()) return 0;
  for (std::size_t i = 0; i + gram.size() <= haystack.size(); ++i) {
    if (slice(haystack, i, gram.size()) == gram) ++count;
  }
  return count;
}

/// Clipped n-gram matches: each distinct hypothesis n-gram counts
/// min(count in hyp, count in ref) times.
inline std::size_t clipped_overlap(const Words& hyp, const Words& ref, std::size_t n) {
  std::vector<Words> seen;
  std::size_t total = 0;
  if (hyp.size() < n) return 0;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
    Words gram = slice(hyp, i, n);
    if (std::find(seen.begin(), seen.end(), gram) != seen.end()) continue;
    total += std::min(occurrences(hyp, gram), occurrences(ref, gram));
    seen.push_back(std::move(gram));
  }
  return total;
}

inline double bleu_oracle(const Words& hyp, const Words& ref, int max_n = 4) {
  if (hyp.empty()) return 0.0;
  double product = 1.0;
  for (int n = 1; n <= max_n; ++n) {
    const std::size_t un = static_cast<std::size_t>(n);
    const double total = hyp.size() >= un ? static_cast<double>(hyp.size() - un + 1) : 0.0;
    const double matches = static_cast<double>(clipped_overlap(hyp, ref, un));
    product *= matches > 0 ? matches / total : 1.0 / (total + 1.0);
  }
  const double bp = hyp.size() >= ref.size()
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
  return bp * std::pow(product, 1.0 / max_n);
}

struct RougeCounts {
  std::size_t overlap = 0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

inline RougeCounts rouge1_oracle(const Words& hyp, const Words& ref) {
  return {clipped_overlap(hyp, ref, 1), hyp.size(), ref.size()};
}

}  // namespace ape::testing
