// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2ut/common.hpp"

namespace s2ut {

/// Levenshtein distance with unit insert/delete/substitute costs.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t edit_distance(const A& a, const B& b) {
  const auto n = std::ranges::size(a);
  const auto m = std::ranges::size(b);
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (std::ranges::begin(a)[i - 1] == std::ranges::begin(b)[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[m];
}

/// Character error rate; may exceed 1.
inline double cer(std::string_view hyp, std::string_view ref) {
  if (ref.empty()) throw EvaluationError("CER is undefined for an empty reference");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

/// Lowercase, drop ASCII punctuation, split on whitespace.
inline std::vector<std::string> normalize_text(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

struct BleuOptions {
  int max_order = 4;
  // Floor smoothing: a zero n-gram match count is replaced by epsilon.
  bool smooth = false;
  double epsilon = 0.1;
};

struct BleuStats {
  double score = 0.0;  // 0..100
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

/// Corpus-level single-reference BLEU over pre-normalised token sequences.
inline BleuStats corpus_bleu_stats(std::span<const std::vector<std::string>> hyps,
                                   std::span<const std::vector<std::string>> refs, const BleuOptions& opt = {}) {
  if (hyps.size() != refs.size())
    throw EvaluationError("BLEU needs equally many hypotheses and references (" + std::to_string(hyps.size()) + " vs " +
                          std::to_string(refs.size()) + ")");
  if (refs.empty()) throw EvaluationError("BLEU needs a non-empty corpus");
  const auto N = static_cast<std::size_t>(opt.max_order);
  std::vector<double> matches(N, 0.0), totals(N, 0.0);
  BleuStats st;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& r = refs[s];
    st.hyp_len += h.size();
    st.ref_len += r.size();
    for (std::size_t n = 1; n <= N; ++n) {
      std::map<std::vector<std::string>, int> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[std::vector<std::string>(r.begin() + i, r.begin() + i + n)];
      std::map<std::vector<std::string>, int> hyp_counts;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[std::vector<std::string>(h.begin() + i, h.begin() + i + n)];
      for (const auto& [gram, c] : hyp_counts) {
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(c, it->second);
      }
      if (h.size() >= n) totals[n - 1] += static_cast<double>(h.size() - n + 1);
    }
  }
  st.brevity_penalty = st.hyp_len == 0 ? 0.0
                       : st.hyp_len < st.ref_len
                           ? std::exp(1.0 - static_cast<double>(st.ref_len) / static_cast<double>(st.hyp_len))
                           : 1.0;
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < N; ++n) {
    double p = 0.0;
    if (totals[n] > 0) {
      p = matches[n] / totals[n];
      if (matches[n] == 0 && opt.smooth) p = opt.epsilon / totals[n];
    }
    st.precisions.push_back(p);
    if (p <= 0) zero = true;
    else log_sum += std::log(p);
  }
  st.score = zero ? 0.0 : 100.0 * st.brevity_penalty * std::exp(log_sum / static_cast<double>(N));
  return st;
}

inline double corpus_bleu(std::span<const std::vector<std::string>> hyps, std::span<const std::vector<std::string>> refs,
                          const BleuOptions& opt = {}) {
  return corpus_bleu_stats(hyps, refs, opt).score;
}

struct UnitDistribution {
  std::vector<long> counts;
  long total = 0;
  std::vector<double> normalized;  // empty when total == 0

  bool defined() const { return total > 0; }
};

/// Histogram of unit ids over a corpus of unit sequences.
template <std::ranges::input_range Corpus>
UnitDistribution unit_distribution(const Corpus& corpus, int k) {
  if (k < 1) throw DataError("k must be >= 1");
  UnitDistribution d;
  d.counts.assign(static_cast<std::size_t>(k), 0);
  for (const auto& seq : corpus) {
    for (int u : seq) {
      if (u < 0 || u >= k) throw DataError("unit " + std::to_string(u) + " outside [0, " + std::to_string(k) + ")");
      ++d.counts[static_cast<std::size_t>(u)];
      ++d.total;
    }
  }
  if (d.total > 0) {
    d.normalized.resize(d.counts.size());
    for (std::size_t i = 0; i < d.counts.size(); ++i)
      d.normalized[i] = static_cast<double>(d.counts[i]) / static_cast<double>(d.total);
  }
  return d;
}

/// Sample Pearson correlation of two normalised unit distributions.
inline double pearson(const UnitDistribution& a, const UnitDistribution& b) {
  if (a.counts.size() != b.counts.size()) throw EvaluationError("distributions have different k");
  if (!a.defined() || !b.defined()) throw EvaluationError("correlation of an empty distribution is undefined");
  const auto n = static_cast<double>(a.normalized.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.normalized.size(); ++i) {
    ma += a.normalized[i];
    mb += b.normalized[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.normalized.size(); ++i) {
    const double da = a.normalized[i] - ma;
    const double db = b.normalized[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0 || vb <= 0) throw EvaluationError("correlation undefined for a zero-variance distribution");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

inline CorrelationMatrix correlation_matrix(const std::vector<std::string>& labels,
                                            const std::vector<UnitDistribution>& dists) {
  if (labels.size() != dists.size()) throw EvaluationError("label count does not match distribution count");
  CorrelationMatrix m;
  m.labels = labels;
  const auto n = dists.size();
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.values[i][j] = m.values[j][i] = pearson(dists[i], dists[j]);
  return m;
}

}  // namespace s2ut
