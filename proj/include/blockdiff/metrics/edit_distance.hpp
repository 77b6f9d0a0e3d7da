#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "blockdiff/common.hpp"

namespace blockdiff::metrics {

// Unit-cost Levenshtein distance, O(|a|*|b|) time, O(min(|a|,|b|)) memory.
inline size_t levenshtein(std::span<const TokenId> a, std::span<const TokenId> b) {
  if (a.size() < b.size()) std::swap(a, b);  // b is the shorter one
  const size_t n = b.size();
  if (n == 0) return a.size();

  std::vector<size_t> row(n + 1);
  for (size_t j = 0; j <= n; ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = row[0];
    row[0] = i;
    for (size_t j = 1; j <= n; ++j) {
      size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
    }
  }
  return row[n];
}

inline size_t levenshtein(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  return levenshtein(std::span<const TokenId>(a), std::span<const TokenId>(b));
}

// Normalized edit distance in [0, 1]. The denominator is the longer of the
// two sequences so that both truncation and hallucination stay bounded.
// Two empty sequences compare as 0.
inline double ned(std::span<const TokenId> pred, std::span<const TokenId> truth) {
  size_t m = std::max(pred.size(), truth.size());
  if (m == 0) return 0.0;
  return static_cast<double>(levenshtein(pred, truth)) / static_cast<double>(m);
}

inline double ned(const std::vector<TokenId>& pred, const std::vector<TokenId>& truth) {
  return ned(std::span<const TokenId>(pred), std::span<const TokenId>(truth));
}

}  // namespace blockdiff::metrics
