// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

#include "s2ut/inference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"

namespace s2ut {
namespace {

using testing::random_matrix;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Deterministic random next-token distribution keyed by the prefix. Tokens
// 2..vocab-1 are generatable; PAD and BOS get zero probability.
struct TableScorer {
  std::uint64_t seed;
  int vocab;

  Eigen::VectorXd operator()(std::span<const int> prefix) const {
    std::string key;
    for (int t : prefix) key += std::to_string(t) + ",";
    Rng r(derive_seed(seed, key));
    Eigen::VectorXd logits(vocab);
    for (int v = 0; v < vocab; ++v) logits(v) = v < tokens::kEos ? kNegInf : 2.0 * r.normal();
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
  }
};

// Independent greedy decoder: argmax with ties to the lowest token, EOS
// implied once max_len - 1 tokens are out.
template <typename Scorer>
std::vector<int> greedy(const Scorer& score, int max_len) {
  std::vector<int> seq{tokens::kBos};
  while (static_cast<int>(seq.size()) < max_len) {
    const Eigen::VectorXd lp = score(std::span<const int>(seq));
    int best = -1;
    for (int v = tokens::kEos; v < lp.size(); ++v)
      if (best < 0 || lp(v) > lp(best)) best = v;
    if (best == tokens::kEos) return {seq.begin() + 1, seq.end()};
    seq.push_back(best);
  }
  return {seq.begin() + 1, seq.end()};
}

struct Best {
  std::vector<int> tokens;
  double score = kNegInf;
};

// Enumerates every EOS-terminated sequence of at most max_len tokens.
template <typename Scorer>
void enumerate(const Scorer& score, std::vector<int>& seq, double lp_sum, int max_len, double alpha, Best& best) {
  const Eigen::VectorXd lp = score(std::span<const int>(seq));
  const int len = static_cast<int>(seq.size());  // tokens after BOS, plus the EOS about to be appended
  for (int v = tokens::kEos; v < lp.size(); ++v) {
    const double total = lp_sum + lp(v);
    if (v == tokens::kEos) {
      const double s = total / std::pow(len, alpha);
      std::vector<int> toks(seq.begin() + 1, seq.end());
      if (s > best.score || (s == best.score && toks < best.tokens)) best = {toks, s};
    } else if (len < max_len) {
      seq.push_back(v);
      enumerate(score, seq, total, max_len, alpha, best);
      seq.pop_back();
    }
  }
}

template <typename Scorer>
Best exhaustive(const Scorer& score, int max_len, double alpha) {
  std::vector<int> seq{tokens::kBos};
  Best best;
  enumerate(score, seq, 0.0, max_len, alpha, best);
  return best;
}

ModelConfig tiny_config(int branches, int vocab, bool quality = false) {
  ModelConfig c;
  c.input_dim = 3;
  c.hidden_dim = 8;
  c.ffn_dim = 16;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.unit_vocab = vocab;
  c.branch_count = branches;
  c.dropout = 0.0;
  c.quality_token = quality;
  return c;
}

// Random weights are too small to make decoding interesting; scale them up.
S2utModel sharp_model(const ModelConfig& c, std::uint64_t seed, double gain = 3.0) {
  S2utModel m(c, seed);
  for (auto& [name, p] : m.params())
    if (name.ends_with("output.weight")) p.value *= gain;
  return m;
}

// Sets branch b's first-step distribution to Y with probability p_yes (and N otherwise).
void pin_first_token(S2utModel& m, int b, double p_yes) {
  const std::string out = S2utModel::branch_prefix(b) + "output";
  m.params().at(out + ".weight").value.setZero();
  auto& bias = m.params().at(out + ".bias").value;
  bias.setConstant(-1e9);
  bias(0, tokens::kYes) = std::log(p_yes);
  bias(0, tokens::kNo) = std::log(1.0 - p_yes);
}

TEST(BeamSearch, BeamOneIsGreedyOnTables) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const TableScorer sc{s, 8};
    BeamOptions opt;
    opt.beam = 1;
    opt.max_len = 6;
    EXPECT_EQ(beam_search(sc, opt).tokens, greedy(sc, opt.max_len)) << "table " << s;
  }
}

TEST(BeamSearch, BeamOneIsGreedyOnModel) {
  const S2utModel m = sharp_model(tiny_config(1, 10), 11);
  Rng r(5);
  for (int i = 0; i < 100; ++i) {
    const Matrix src = random_matrix(r.uniform_int(2, 5), 3, r);
    const Matrix mem = encode_source(m, src);
    const BranchScorer sc(m, mem, 0);
    BeamOptions opt;
    opt.beam = 1;
    opt.max_len = 8;
    EXPECT_EQ(beam_search(m, 0, src, opt).tokens, greedy(sc, opt.max_len)) << "input " << i;
  }
}

TEST(BeamSearch, ThreeTokensBeam27MatchesEnumeration) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const TableScorer sc{s, 5};
    BeamOptions opt;
    opt.beam = 27;
    opt.max_len = 3;
    const auto h = beam_search(sc, opt);
    const auto best = exhaustive(sc, 3, opt.length_alpha);
    EXPECT_EQ(h.tokens, best.tokens) << "table " << s;
    EXPECT_NEAR(h.score, best.score, 1e-12);
  }
}

TEST(BeamSearch, WideBeamMatchesEnumerationUpToFourTokens) {
  for (int generatable = 1; generatable <= 4; ++generatable)
    for (int max_len = 1; max_len <= 4; ++max_len)
      for (double alpha : {0.0, 1.0})
        for (std::uint64_t s = 0; s < 20; ++s) {
          const TableScorer sc{derive_seed(s, generatable, max_len), tokens::kEos + generatable};
          BeamOptions opt;
          opt.beam = static_cast<int>(std::pow(generatable, max_len));
          opt.max_len = max_len;
          opt.length_alpha = alpha;
          const auto best = exhaustive(sc, max_len, alpha);
          EXPECT_EQ(beam_search(sc, opt).tokens, best.tokens) << generatable << " tokens, max_len " << max_len;
        }
}

TEST(BeamSearch, WideBeamMatchesEnumerationOnModel) {
  // Vocabulary 6 generates EOS, Y, N and one unit.
  const S2utModel m = sharp_model(tiny_config(1, 6), 12);
  Rng r(6);
  for (int i = 0; i < 20; ++i) {
    const Matrix src = random_matrix(3, 3, r);
    const Matrix mem = encode_source(m, src);
    const BranchScorer sc(m, mem, 0);
    BeamOptions opt;
    opt.beam = 256;
    opt.max_len = 4;
    EXPECT_EQ(beam_search(sc, opt).tokens, exhaustive(sc, 4, opt.length_alpha).tokens);
  }
}

TEST(BeamSearch, WiderBeamNeverScoresLower) {
  const S2utModel m = sharp_model(tiny_config(1, 10), 13);
  Rng r(7);
  for (int i = 0; i < 20; ++i) {
    const Matrix src = random_matrix(4, 3, r);
    double prev = kNegInf;
    for (int beam : {1, 2, 4, 8, 16}) {
      BeamOptions opt;
      opt.beam = beam;
      opt.max_len = 8;
      const auto h = beam_search(m, 0, src, opt);
      EXPECT_GE(h.score, prev - 1e-12) << "input " << i << " beam " << beam;
      prev = h.score;
    }
  }
}

TEST(BeamSearch, ForcedPrefixIsScoredAndKept) {
  const TableScorer sc{3, 7};
  BeamOptions opt;
  opt.beam = 4;
  opt.max_len = 5;
  const int forced[] = {tokens::kYes};
  const auto h = beam_search(sc, opt, forced);
  ASSERT_FALSE(h.tokens.empty());
  EXPECT_EQ(h.tokens.front(), tokens::kYes);
  // Rescore the returned sequence independently.
  std::vector<int> seq{tokens::kBos};
  double lp = 0;
  for (int t : h.tokens) {
    lp += sc(seq)(t);
    seq.push_back(t);
  }
  lp += sc(seq)(tokens::kEos);
  EXPECT_NEAR(h.log_prob, lp, 1e-12);
}

TEST(BeamSearch, TruncatesAtMaxLen) {
  // EOS is never likely: the only way out is the length cap.
  auto never_stop = [](std::span<const int>) {
    Eigen::VectorXd lp = Eigen::VectorXd::Constant(6, std::log(0.3));
    lp(tokens::kPad) = lp(tokens::kBos) = kNegInf;
    lp(tokens::kEos) = std::log(0.1);
    return lp;
  };
  BeamOptions opt;
  opt.beam = 1;
  opt.max_len = 4;
  const auto h = beam_search(never_stop, opt);
  EXPECT_TRUE(h.truncated);
  ASSERT_EQ(h.tokens.size(), 3u);
  EXPECT_NEAR(h.log_prob, 3 * std::log(0.3) + std::log(0.1), 1e-12);
}

TEST(BeamSearch, RejectsBadOptions) {
  const TableScorer sc{1, 6};
  BeamOptions opt;
  opt.beam = 0;
  EXPECT_THROW(beam_search(sc, opt), ConfigError);
  opt.beam = 2;
  opt.max_len = 0;
  EXPECT_THROW(beam_search(sc, opt), ConfigError);
}

TEST(SelectBranch, PicksHighestYesProbability) {
  S2utModel m(tiny_config(3, 9, true), 14);
  pin_first_token(m, 0, 0.4);
  pin_first_token(m, 1, 0.7);
  pin_first_token(m, 2, 0.2);
  const auto choice = select_branch_for(m, Matrix::Ones(3, 3));
  EXPECT_EQ(choice.branch, 1);
  ASSERT_EQ(choice.p_yes.size(), 3u);
  EXPECT_NEAR(choice.p_yes[0], 0.4, 1e-9);
  EXPECT_NEAR(choice.p_yes[1], 0.7, 1e-9);
  EXPECT_NEAR(choice.p_yes[2], 0.2, 1e-9);
}

TEST(SelectBranch, TiesGoToLowestBranch) {
  S2utModel m(tiny_config(3, 9, true), 15);
  for (int b = 0; b < 3; ++b) pin_first_token(m, b, 0.5);
  EXPECT_EQ(select_branch_for(m, Matrix::Ones(2, 3)).branch, 0);
  pin_first_token(m, 0, 0.3);
  EXPECT_EQ(select_branch_for(m, Matrix::Ones(2, 3)).branch, 1);
}

TEST(Translate, BranchIsArgmaxOfYesProbability) {
  const S2utModel m = sharp_model(tiny_config(3, 12, true), 16, 6.0);
  Rng r(8);
  std::vector<int> chosen(3, 0);
  for (int i = 0; i < 60; ++i) {
    const Matrix src = random_matrix(r.uniform_int(2, 5), 3, r, 2.0);
    BeamOptions opt;
    opt.beam = 3;
    opt.max_len = 6;
    const auto h = translate(m, src, opt);
    // Independent p_Y from teacher-forced logits.
    const auto logits = m.forward(src, {{tokens::kBos}, {tokens::kBos}, {tokens::kBos}});
    std::vector<double> p(3);
    int argmax = 0;
    for (int b = 0; b < 3; ++b) {
      const Matrix lp = ops::log_softmax_rows(logits[static_cast<std::size_t>(b)]);
      p[static_cast<std::size_t>(b)] = std::exp(lp(0, tokens::kYes));
      if (p[static_cast<std::size_t>(b)] > p[static_cast<std::size_t>(argmax)]) argmax = b;
    }
    EXPECT_EQ(h.branch, argmax);
    for (int b = 0; b < 3; ++b) EXPECT_NEAR(h.p_yes[static_cast<std::size_t>(b)], p[static_cast<std::size_t>(b)], 1e-12);
    ASSERT_FALSE(h.tokens.empty());
    EXPECT_EQ(h.tokens.front(), tokens::kYes);
    for (int u : h.units()) {
      EXPECT_GE(u, 0);
      EXPECT_LT(u, m.config().unit_count());
    }
    ++chosen[static_cast<std::size_t>(h.branch)];
  }
  // The inputs exercise more than one branch.
  EXPECT_GT(std::count_if(chosen.begin(), chosen.end(), [](int c) { return c > 0; }), 1);
}

TEST(Translate, SingleBranchIsPlainBeamSearch) {
  const S2utModel m = sharp_model(tiny_config(1, 10), 17);
  Rng r(9);
  for (int i = 0; i < 10; ++i) {
    const Matrix src = random_matrix(3, 3, r);
    BeamOptions opt;
    opt.beam = 4;
    opt.max_len = 7;
    const auto a = translate(m, src, opt);
    const auto b = beam_search(m, 0, src, opt);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.branch, 0);
    EXPECT_DOUBLE_EQ(a.score, b.score);
  }
}

TEST(Translate, Deterministic) {
  const S2utModel m = sharp_model(tiny_config(2, 10, true), 18);
  const Matrix src = Matrix::Constant(4, 3, 0.5);
  BeamOptions opt;
  opt.beam = 5;
  opt.max_len = 10;
  const auto a = translate(m, src, opt);
  const auto b = translate(m, src, opt);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.log_prob, b.log_prob);
}

TEST(Hypothesis, UnitsStripSpecials) {
  Hypothesis h;
  h.tokens = {tokens::kYes, tokens::from_unit(0), tokens::kNo, tokens::from_unit(7)};
  EXPECT_EQ(h.units(), (std::vector<int>{0, 7}));
}

}  // namespace
}  // namespace s2ut
