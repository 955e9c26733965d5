// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Beam search and first-token branch selection.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "s2ut/autograd.hpp"
#include "s2ut/model.hpp"
#include "s2ut/targetprep.hpp"

namespace s2ut {

struct BeamOptions {
  int beam = 5;
  int max_len = 64;  // tokens after BOS, EOS included
  double length_alpha = 1.0;

  bool operator==(const BeamOptions&) const = default;
};

struct Hypothesis {
  std::vector<int> tokens;  // after BOS, forced prefix included, EOS excluded
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length^alpha, length counting EOS
  int branch = 0;
  bool truncated = false;  // EOS was forced by the length cap
  std::vector<double> p_yes;  // per branch, filled by translate()

  /// Unit ids with every special token removed.
  std::vector<int> units() const {
    std::vector<int> out;
    for (int t : tokens)
      if (tokens::is_unit(t)) out.push_back(tokens::to_unit(t));
    return out;
  }
};

namespace detail {

struct Partial {
  std::vector<int> seq;  // BOS first
  double log_prob = 0.0;
  bool forced = false;
};

inline double normalized(double log_prob, std::size_t length, double alpha) {
  return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), alpha);
}

}  // namespace detail

/// Beam search over any next-token scorer. `score(prefix)` returns log
/// probabilities over the vocabulary for the token following `prefix`
/// (which starts with BOS). PAD and BOS are never generated. Candidates are
/// ranked by log probability with ties broken by token ids; finished
/// hypotheses are compared by length-normalised score. At the length cap EOS
/// is forced (and scored), so every hypothesis is comparable. The forced
/// prefix is scored like any other tokens.
template <typename Scorer>
Hypothesis beam_search(Scorer&& score, const BeamOptions& opt, std::span<const int> forced_prefix = {}) {
  if (opt.beam < 1) throw ConfigError("beam must be >= 1");
  if (opt.max_len < 1) throw ConfigError("max_len must be >= 1");
  using detail::Partial;

  Partial start{{tokens::kBos}, 0.0};
  for (int tok : forced_prefix) {
    const Eigen::VectorXd lp = score(std::span<const int>(start.seq));
    if (tok < 0 || tok >= lp.size()) throw DataError("forced token outside the vocabulary");
    start.log_prob += lp(tok);
    start.seq.push_back(tok);
  }

  auto better_raw = [](const Partial& a, const Partial& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.seq < b.seq;
  };
  auto to_hyp = [&](const Partial& p, bool finished) {
    Hypothesis h;
    h.tokens.assign(p.seq.begin() + 1, p.seq.end() - (finished ? 1 : 0));
    h.log_prob = p.log_prob;
    h.score = detail::normalized(p.log_prob, p.seq.size() - 1, opt.length_alpha);
    h.truncated = !finished || p.forced;
    return h;
  };
  auto better_final = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };

  std::vector<Partial> live;
  std::vector<Hypothesis> finished;
  if (static_cast<int>(start.seq.size()) - 1 >= opt.max_len) {
    return to_hyp(start, false);
  }
  live.push_back(std::move(start));

  while (!live.empty()) {
    std::vector<Partial> cand;
    for (const auto& p : live) {
      const Eigen::VectorXd lp = score(std::span<const int>(p.seq));
      const bool last = static_cast<int>(p.seq.size()) == opt.max_len;
      for (Eigen::Index v = 0; v < lp.size(); ++v) {
        if (v == tokens::kPad || v == tokens::kBos || !std::isfinite(lp(v))) continue;
        if (last && v != tokens::kEos) continue;
        Partial c{p.seq, p.log_prob + lp(v), last};
        c.seq.push_back(static_cast<int>(v));
        cand.push_back(std::move(c));
      }
    }
    const auto keep = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(opt.beam));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), better_raw);
    cand.resize(keep);
    live.clear();
    for (auto& c : cand) {
      if (c.seq.back() == tokens::kEos) finished.push_back(to_hyp(c, true));
      else live.push_back(std::move(c));
    }
    if (static_cast<int>(finished.size()) >= opt.beam && !live.empty()) {
      // Stop once the beam-th best finished hypothesis beats every live one
      // scored as if it ended now.
      std::vector<double> scores;
      for (const auto& f : finished) scores.push_back(f.score);
      std::nth_element(scores.begin(), scores.begin() + (opt.beam - 1), scores.end(), std::greater<>());
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& p : live) best_live = std::max(best_live, detail::normalized(p.log_prob, p.seq.size() - 1, opt.length_alpha));
      if (scores[static_cast<std::size_t>(opt.beam - 1)] >= best_live) break;
    }
  }

  if (finished.empty()) {
    std::vector<Hypothesis> truncated;
    for (const auto& p : live) truncated.push_back(to_hyp(p, false));
    if (truncated.empty()) throw EvaluationError("beam search produced no hypothesis");
    return *std::min_element(truncated.begin(), truncated.end(), better_final);
  }
  return *std::min_element(finished.begin(), finished.end(), better_final);
}

/// Next-token scorer of one decoder branch over a fixed encoder memory.
/// The full prefix is re-run on every call (no incremental cache).
class BranchScorer {
 public:
  BranchScorer(const S2utModel& model, const Matrix& memory, int branch) : model_(model), memory_(memory), branch_(branch) {}

  Eigen::VectorXd operator()(std::span<const int> prefix) const {
    Tape t(false);
    Var mem = t.constant(memory_);
    const Matrix& logits = model_.decode(t, mem, branch_, prefix).value();
    const Matrix last = logits.bottomRows(1);
    return ops::log_softmax_rows(last).row(0).transpose();
  }

 private:
  const S2utModel& model_;
  const Matrix& memory_;
  int branch_;
};

inline Matrix encode_source(const S2utModel& model, const Matrix& source) {
  Tape t(false);
  return model.encode(t, source).value();
}

inline Hypothesis beam_search(const S2utModel& model, int branch, const Matrix& source, const BeamOptions& opt,
                              std::span<const int> forced_prefix = {}) {
  const Matrix memory = encode_source(model, source);
  Hypothesis h = beam_search(BranchScorer(model, memory, branch), opt, forced_prefix);
  h.branch = branch;
  return h;
}

struct BranchChoice {
  int branch = 0;
  std::vector<double> p_yes;
};

/// Probability of Y as the first token of every branch; argmax with ties to
/// the lowest branch index.
inline BranchChoice select_branch(const S2utModel& model, const Matrix& memory) {
  BranchChoice out;
  const int bos[] = {tokens::kBos};
  for (int b = 0; b < model.config().branch_count; ++b) {
    const Eigen::VectorXd lp = BranchScorer(model, memory, b)(bos);
    out.p_yes.push_back(std::exp(lp(tokens::kYes)));
  }
  for (std::size_t b = 1; b < out.p_yes.size(); ++b)
    if (out.p_yes[b] > out.p_yes[static_cast<std::size_t>(out.branch)]) out.branch = static_cast<int>(b);
  return out;
}

inline BranchChoice select_branch_for(const S2utModel& model, const Matrix& source) {
  return select_branch(model, encode_source(model, source));
}

/// Selects a branch, then decodes it. Models trained with quality tokens have
/// Y forced as the first token.
inline Hypothesis translate(const S2utModel& model, const Matrix& source, const BeamOptions& opt) {
  const Matrix memory = encode_source(model, source);
  const BranchChoice choice = select_branch(model, memory);
  std::vector<int> forced;
  if (model.config().quality_token) forced.push_back(tokens::kYes);
  Hypothesis h = beam_search(BranchScorer(model, memory, choice.branch), opt, forced);
  h.branch = choice.branch;
  h.p_yes = choice.p_yes;
  return h;
}

}  // namespace s2ut
