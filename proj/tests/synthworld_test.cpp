// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

#include "s2ut/synthworld.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace s2ut {
namespace {

ToyLanguageSpec small_spec() {
  ToyLanguageSpec s;
  s.corpus_sizes = {20, 5, 5};
  return s;
}

TtsSystemSpec clean_system(const std::string& id, std::uint64_t lexicon_seed = 1) {
  TtsSystemSpec s;
  s.system_id = id;
  s.acoustic_model = "AM";
  s.lexicon_seed = lexicon_seed;
  s.vocoder_id = "V";
  return s;
}

TEST(Corpus, Deterministic) {
  auto spec = small_spec();
  spec.corpus_sizes = {2, 1, 1};
  EXPECT_EQ(gen_parallel_corpus(spec), gen_parallel_corpus(spec));
}

TEST(Corpus, FixedSentenceLength) {
  auto spec = small_spec();
  spec.sentence_length_range = {5, 5};
  const World w(spec);
  for (const auto& u : gen_parallel_corpus(w)) {
    EXPECT_EQ(u.source_text.size(), 5u);
    EXPECT_EQ(w.graphemes_of(u.target_text).size(), 5u);
  }
}

TEST(Corpus, SplitSizesAndDisjointIds) {
  auto spec = small_spec();
  spec.corpus_sizes = {200, 20, 20};
  const auto c = gen_parallel_corpus(spec);
  ASSERT_EQ(c.size(), 240u);
  std::map<Split, int> counts;
  std::set<std::string> ids;
  for (const auto& u : c) {
    ++counts[u.split];
    ids.insert(u.utt_id);
  }
  EXPECT_EQ(counts[Split::kTrain], 200);
  EXPECT_EQ(counts[Split::kDev], 20);
  EXPECT_EQ(counts[Split::kTest], 20);
  EXPECT_EQ(ids.size(), 240u);
}

TEST(Corpus, TargetIsTokenwiseTranslation) {
  const World w(small_spec());
  for (const auto& u : gen_parallel_corpus(w)) {
    const auto g = w.graphemes_of(u.target_text);
    ASSERT_EQ(g.size(), u.source_text.size());
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], w.translate_token(u.source_text[i]));
  }
}

TEST(Spec, RejectsInvalid) {
  auto s = small_spec();
  s.sentence_length_range = {4, 3};
  EXPECT_THROW(World{s}, ConfigError);
  s = small_spec();
  s.phoneme_inventory_size = 4;  // 3 speech phonemes give 6 pairs < 30 graphemes
  EXPECT_THROW(World{s}, ConfigError);
  s = small_spec();
  s.corpus_sizes = {1, 0, 1};
  EXPECT_THROW(World{s}, ConfigError);
}

TEST(World, PronunciationsDistinctAndCoverInventory) {
  const World w(small_spec());
  std::set<std::array<int, 2>> seen;
  std::set<int> used;
  for (const auto& p : w.pronunciations()) {
    EXPECT_NE(p[0], p[1]);
    EXPECT_NE(p[0], kPausePhoneme);
    EXPECT_NE(p[1], kPausePhoneme);
    EXPECT_TRUE(seen.insert(p).second);
    used.insert(p[0]);
    used.insert(p[1]);
  }
  EXPECT_EQ(static_cast<int>(used.size()), w.phoneme_count() - 1);
}

TEST(RenderSource, EmptyRejected) {
  const World w(small_spec());
  ParallelUtterance u{"x", {}, "", Split::kTrain};
  EXPECT_THROW(render_source(u, w), DataError);
}

TEST(RenderSource, DeterministicAndFixedRepetition) {
  auto spec = small_spec();
  spec.source_frames_per_token = {3, 3};
  const World w(spec);
  ParallelUtterance u{"u1", {0, 1, 2, 3, 4}, "", Split::kTrain};
  const auto a = render_source(u, w);
  const auto b = render_source(u, w);
  EXPECT_EQ(a.frame_count(), 15);
  EXPECT_EQ(a.dim(), spec.feature_dim);
  EXPECT_TRUE(a.frames == b.frames);
}

TEST(Synth, SlowerSpeedGivesAtLeastAsManyFrames) {
  const World w(small_spec());
  auto normal = clean_system("N");
  auto slow = clean_system("S");
  slow.speed_factor = 0.95;
  auto slower = clean_system("T");
  slower.speed_factor = 0.8;
  for (const auto& u : gen_parallel_corpus(w)) {
    const int n = synth_target(u, normal, w).features.frame_count();
    const int s = synth_target(u, slow, w).features.frame_count();
    const int t = synth_target(u, slower, w).features.frame_count();
    EXPECT_GE(s, n);
    EXPECT_GE(t, s);
  }
}

TEST(Synth, FullAgreementSameVocoderGivesIdenticalFeatures) {
  const World w(small_spec());
  const auto a = clean_system("A", 1);
  const auto b = clean_system("B", 2);
  for (const auto& u : gen_parallel_corpus(w)) {
    const auto fa = synth_target(u, a, w).features.frames;
    const auto fb = synth_target(u, b, w).features.frames;
    EXPECT_TRUE(fa == fb) << u.utt_id;
  }
}

TEST(Synth, AgreementIsMonotone) {
  const World w(small_spec());
  auto sys = clean_system("A", 5);
  std::vector<bool> prev;
  for (double a : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    sys.lexicon_agreement = a;
    const auto lex = system_lexicon(w, sys);
    EXPECT_EQ(lex[kPausePhoneme], kPausePhoneme);
    std::vector<bool> copied;
    for (int p = 0; p < w.phoneme_count(); ++p) copied.push_back(lex[static_cast<std::size_t>(p)] == p);
    for (std::size_t p = 0; p < prev.size(); ++p) {
      if (prev[p]) {
        EXPECT_TRUE(copied[p]) << "agreement " << a << " phoneme " << p;
      }
    }
    prev = copied;
  }
  for (bool c : prev) EXPECT_TRUE(c);
}

TEST(Synth, VocoderNoiseIsBinomial) {
  auto spec = small_spec();
  const World w(spec);
  auto sys = clean_system("A");
  sys.vocoder_noise_rate = 0.02;
  long frames = 0, hits = 0;
  for (int i = 0; i < 1000; ++i) {
    ParallelUtterance u{"mc-" + std::to_string(i), {}, "", Split::kTrain};
    Rng r(derive_seed(1, "mc", i));
    std::vector<int> g;
    for (int k = 0; k < 12; ++k) g.push_back(static_cast<int>(r.uniform_int(0, w.grapheme_count() - 1)));
    u.target_text = w.text_of(g);
    const auto t = synth_target(u, sys, w);
    frames += t.features.frame_count();
    for (bool p : t.perturbed) hits += p;
  }
  const double mean = 0.02 * static_cast<double>(frames);
  const double sigma = std::sqrt(mean * 0.98);
  EXPECT_NEAR(static_cast<double>(hits), mean, 3 * sigma);
}

TEST(Synth, SynthesisErrorCorruptsOneSpeechPhoneme) {
  const World w(small_spec());
  auto sys = clean_system("A");
  sys.synthesis_error_rate = 1.0;
  const auto lexicon = system_lexicon(w, sys);
  for (const auto& u : gen_parallel_corpus(w)) {
    const auto t = synth_target(u, sys, w);
    ASSERT_GE(t.corrupted_position, 0);
    int changed = 0;
    for (std::size_t i = 0; i < t.phonemes.size(); ++i)
      changed += t.templates[i] != lexicon[static_cast<std::size_t>(t.phonemes[i])];
    EXPECT_EQ(changed, 1);
    EXPECT_NE(t.phonemes[static_cast<std::size_t>(t.corrupted_position)], kPausePhoneme);
    EXPECT_NE(t.templates[static_cast<std::size_t>(t.corrupted_position)], kPausePhoneme);
  }
}

TEST(Synth, FrameCountMatchesDurations) {
  const World w(small_spec());
  auto sys = clean_system("A");
  sys.duration_mode = DurationMode::kStochastic;
  for (const auto& u : gen_parallel_corpus(w)) {
    const auto t = synth_target(u, sys, w);
    int total = 0;
    for (int d : t.durations) {
      EXPECT_GE(d, 1);
      total += d;
    }
    EXPECT_EQ(total, t.features.frame_count());
    EXPECT_EQ(t.phonemes, w.phonemes_of(w.graphemes_of(u.target_text)));
  }
}

}  // namespace
}  // namespace s2ut
