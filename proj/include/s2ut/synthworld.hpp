// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic parallel corpus and simulated TTS channels.
//
// The toy world is a word-for-word translation task. Source "speech" is a
// sequence of per-token embedding frames; the target sentence is a sequence of
// single-grapheme words. Each grapheme is pronounced as an ordered pair of
// distinct speech phonemes and words are separated by the pause phoneme (id 0),
// so no two adjacent phonemes are ever identical.
//
// A simulated TTS system renders phonemes through its own lexicon
// (phoneme -> feature template). Entries are copied from the shared base
// lexicon with probability `lexicon_agreement`, otherwise redrawn from the
// template pool, which is how different acoustic models end up with
// system-specific confusions. Vocoders only perturb individual frames.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "s2ut/common.hpp"

namespace s2ut {

using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kPausePhoneme = 0;
inline constexpr std::string_view kGraphemeSymbols = "abcdefghijklmnopqrstuvwxyz0123456789";

enum class Split { kTrain, kDev, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(s) + "'");
}

struct ToyLanguageSpec {
  int source_alphabet_size = 30;
  int target_alphabet_size = 30;
  int phoneme_inventory_size = 12;
  std::pair<int, int> sentence_length_range{3, 8};
  std::array<int, 3> corpus_sizes{200, 20, 20};  // train, dev, test
  std::uint64_t master_seed = 7;
  int feature_dim = 16;
  std::pair<int, int> source_frames_per_token{2, 4};
  double source_jitter = 0.15;
  double target_jitter = 0.15;
  // Standard deviation of the extra noise a vocoder adds to a perturbed frame.
  double vocoder_noise_scale = 0.8;

  void validate() const {
    if (source_alphabet_size < 1 || target_alphabet_size < 1 || phoneme_inventory_size < 1 || feature_dim < 1)
      throw ConfigError("world sizes must be >= 1");
    if (target_alphabet_size > static_cast<int>(kGraphemeSymbols.size()))
      throw ConfigError("target_alphabet_size exceeds the " + std::to_string(kGraphemeSymbols.size()) +
                        " available grapheme symbols");
    const long speech = phoneme_inventory_size - 1;
    if (speech * (speech - 1) < target_alphabet_size)
      throw ConfigError("phoneme inventory too small to give every grapheme a distinct phoneme pair");
    if (2 * target_alphabet_size < speech)
      throw ConfigError("too few graphemes to use every speech phoneme");
    if (sentence_length_range.first < 1 || sentence_length_range.first > sentence_length_range.second)
      throw ConfigError("sentence_length_range must satisfy 1 <= min <= max");
    for (int n : corpus_sizes)
      if (n < 1) throw ConfigError("corpus sizes must be >= 1");
    if (source_frames_per_token.first < 1 || source_frames_per_token.first > source_frames_per_token.second)
      throw ConfigError("source_frames_per_token must satisfy 1 <= min <= max");
    if (source_jitter < 0 || target_jitter < 0 || vocoder_noise_scale < 0)
      throw ConfigError("noise scales must be non-negative");
  }

  bool operator==(const ToyLanguageSpec&) const = default;
};

enum class DurationMode { kStochastic, kDeterministic };

inline std::string_view to_string(DurationMode m) {
  return m == DurationMode::kStochastic ? "stochastic" : "deterministic";
}

inline DurationMode duration_mode_from_string(std::string_view s) {
  if (s == "stochastic") return DurationMode::kStochastic;
  if (s == "deterministic") return DurationMode::kDeterministic;
  throw ConfigError("unknown duration_mode '" + std::string(s) + "'");
}

struct TtsSystemSpec {
  std::string system_id;
  // Acoustic-model family label (e.g. "TT2"); systems sharing it share a lexicon seed.
  std::string acoustic_model;
  std::uint64_t lexicon_seed = 0;
  double lexicon_agreement = 1.0;
  DurationMode duration_mode = DurationMode::kDeterministic;
  double speed_factor = 1.0;
  std::string vocoder_id;
  double vocoder_noise_rate = 0.0;
  double synthesis_error_rate = 0.0;

  void validate() const {
    if (system_id.empty()) throw ConfigError("system_id must be non-empty");
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!(speed_factor > 0.0)) throw ConfigError(system_id + ": speed_factor must be > 0");
    if (!in_unit(lexicon_agreement) || !in_unit(vocoder_noise_rate) || !in_unit(synthesis_error_rate))
      throw ConfigError(system_id + ": rates must lie in [0, 1]");
  }

  bool operator==(const TtsSystemSpec&) const = default;
};

struct ParallelUtterance {
  std::string utt_id;
  std::vector<int> source_text;
  std::string target_text;
  Split split = Split::kTrain;

  bool operator==(const ParallelUtterance&) const = default;
};

struct FeatureSequence {
  FrameMatrix frames;  // frame_count x dim
  std::string utt_id;
  std::string system_id;  // "source" for source-side renderings

  int frame_count() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

/// Output of one simulated synthesis, with the generative alignment kept so
/// the toy recognizer can be built from known phoneme boundaries.
struct SynthesizedTarget {
  FeatureSequence features;
  std::vector<int> phonemes;
  std::vector<int> durations;  // frames per phoneme
  std::vector<int> templates;  // template actually rendered per phoneme
  std::vector<bool> perturbed;  // per frame: touched by the vocoder
  int corrupted_position = -1;  // phoneme index swapped by the synthesis error, or -1
};

/// Tables derived from a ToyLanguageSpec: pronunciations, base lexicon,
/// durations, source embeddings and the translation map.
class World {
 public:
  explicit World(ToyLanguageSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    build();
  }

  const ToyLanguageSpec& spec() const { return spec_; }
  int phoneme_count() const { return spec_.phoneme_inventory_size; }
  int grapheme_count() const { return spec_.target_alphabet_size; }
  int feature_dim() const { return spec_.feature_dim; }

  std::span<const std::array<int, 2>> pronunciations() const { return pronunciations_; }
  const FrameMatrix& templates() const { return templates_; }
  std::span<const double> base_durations() const { return base_durations_; }
  const FrameMatrix& source_embeddings() const { return source_embeddings_; }

  int translate_token(int source_token) const {
    if (source_token < 0 || source_token >= spec_.source_alphabet_size)
      throw DataError("source token " + std::to_string(source_token) + " outside the source alphabet");
    return source_to_grapheme_[static_cast<std::size_t>(source_token)];
  }

  char grapheme_symbol(int g) const { return kGraphemeSymbols[static_cast<std::size_t>(g)]; }

  int grapheme_index(char c) const {
    const auto pos = kGraphemeSymbols.find(c);
    if (pos == std::string_view::npos || static_cast<int>(pos) >= spec_.target_alphabet_size) return -1;
    return static_cast<int>(pos);
  }

  /// Splits a target sentence into grapheme ids; throws DataError on anything
  /// that is not a space-separated single-grapheme word.
  std::vector<int> graphemes_of(std::string_view text) const {
    std::vector<int> out;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == ' ') {
        ++i;
        continue;
      }
      if (i + 1 < text.size() && text[i + 1] != ' ')
        throw DataError("target word longer than one grapheme in '" + std::string(text) + "'");
      const int g = grapheme_index(text[i]);
      if (g < 0) throw DataError(std::string("unmapped grapheme '") + text[i] + "'");
      out.push_back(g);
      ++i;
    }
    return out;
  }

  std::string text_of(std::span<const int> graphemes) const {
    std::string out;
    for (std::size_t i = 0; i < graphemes.size(); ++i) {
      if (i) out.push_back(' ');
      out.push_back(grapheme_symbol(graphemes[i]));
    }
    return out;
  }

  /// Grapheme-to-phoneme conversion with pauses between words.
  std::vector<int> phonemes_of(std::span<const int> graphemes) const {
    std::vector<int> out;
    out.reserve(graphemes.size() * 3);
    for (std::size_t i = 0; i < graphemes.size(); ++i) {
      if (i) out.push_back(kPausePhoneme);
      const auto& pr = pronunciations_[static_cast<std::size_t>(graphemes[i])];
      out.push_back(pr[0]);
      out.push_back(pr[1]);
    }
    return out;
  }

 private:
  void build() {
    const int P = spec_.phoneme_inventory_size;
    const int G = spec_.target_alphabet_size;
    const int D = spec_.feature_dim;

    // Ordered pairs of distinct speech phonemes; redraw until every speech
    // phoneme occurs in some pronunciation.
    std::vector<std::array<int, 2>> pairs;
    for (int a = 1; a < P; ++a)
      for (int b = 1; b < P; ++b)
        if (a != b) pairs.push_back({a, b});
    Rng pr(derive_seed(spec_.master_seed, "pronunciations"));
    for (int attempt = 0;; ++attempt) {
      shuffle(pairs, pr);
      std::vector<bool> used(static_cast<std::size_t>(P), false);
      for (int g = 0; g < G; ++g)
        for (int p : pairs[static_cast<std::size_t>(g)]) used[static_cast<std::size_t>(p)] = true;
      if (std::all_of(used.begin() + 1, used.end(), [](bool u) { return u; })) break;
      if (attempt > 1000) throw ConfigError("could not cover the phoneme inventory with pronunciations");
    }
    pronunciations_.assign(pairs.begin(), pairs.begin() + G);

    // Base templates, redrawn until pairwise well separated.
    Rng tr(derive_seed(spec_.master_seed, "templates"));
    const double min_sep = 0.75 * std::sqrt(2.0 * D);
    for (int attempt = 0;; ++attempt) {
      templates_.resize(P, D);
      for (int p = 0; p < P; ++p)
        for (int d = 0; d < D; ++d) templates_(p, d) = tr.normal();
      double closest = INFINITY;
      for (int a = 0; a < P; ++a)
        for (int b = a + 1; b < P; ++b) closest = std::min(closest, (templates_.row(a) - templates_.row(b)).norm());
      if (closest >= min_sep || attempt > 1000) break;
    }

    Rng dr(derive_seed(spec_.master_seed, "durations"));
    base_durations_.assign(static_cast<std::size_t>(P), 2.0);
    for (int p = 1; p < P; ++p) base_durations_[static_cast<std::size_t>(p)] = 2.0 + 2.5 * dr.uniform();

    Rng sr(derive_seed(spec_.master_seed, "source-embeddings"));
    source_embeddings_.resize(spec_.source_alphabet_size, D);
    for (int s = 0; s < spec_.source_alphabet_size; ++s)
      for (int d = 0; d < D; ++d) source_embeddings_(s, d) = sr.normal();

    Rng mr(derive_seed(spec_.master_seed, "translation"));
    std::vector<int> perm(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) perm[static_cast<std::size_t>(g)] = g;
    shuffle(perm, mr);
    source_to_grapheme_.resize(static_cast<std::size_t>(spec_.source_alphabet_size));
    for (int s = 0; s < spec_.source_alphabet_size; ++s)
      source_to_grapheme_[static_cast<std::size_t>(s)] = perm[static_cast<std::size_t>(s % G)];
  }

  ToyLanguageSpec spec_;
  std::vector<std::array<int, 2>> pronunciations_;
  FrameMatrix templates_;
  std::vector<double> base_durations_;
  FrameMatrix source_embeddings_;
  std::vector<int> source_to_grapheme_;
};

/// Generates train, dev and test utterances. Utterance ids carry the split so
/// splits are disjoint by construction.
inline std::vector<ParallelUtterance> gen_parallel_corpus(const World& world) {
  const auto& spec = world.spec();
  std::vector<ParallelUtterance> corpus;
  const Split splits[] = {Split::kTrain, Split::kDev, Split::kTest};
  for (int si = 0; si < 3; ++si) {
    const Split split = splits[si];
    for (int i = 0; i < spec.corpus_sizes[static_cast<std::size_t>(si)]; ++i) {
      Rng rng(derive_seed(spec.master_seed, "utterance", to_string(split), i));
      const auto len = rng.uniform_int(spec.sentence_length_range.first, spec.sentence_length_range.second);
      ParallelUtterance utt;
      char id[32];
      std::snprintf(id, sizeof id, "%s-%05d", std::string(to_string(split)).c_str(), i);
      utt.utt_id = id;
      utt.split = split;
      std::vector<int> graphemes;
      for (std::int64_t k = 0; k < len; ++k) {
        const int tok = static_cast<int>(rng.uniform_int(0, spec.source_alphabet_size - 1));
        utt.source_text.push_back(tok);
        graphemes.push_back(world.translate_token(tok));
      }
      utt.target_text = world.text_of(graphemes);
      corpus.push_back(std::move(utt));
    }
  }
  return corpus;
}

inline std::vector<ParallelUtterance> gen_parallel_corpus(const ToyLanguageSpec& spec) {
  return gen_parallel_corpus(World(spec));
}

/// Source-side rendering: each token's embedding repeated for a seeded number
/// of frames, plus Gaussian jitter.
inline FeatureSequence render_source(const ParallelUtterance& utt, const World& world) {
  const auto& spec = world.spec();
  if (utt.source_text.empty()) throw DataError("utterance " + utt.utt_id + " has empty source text");
  Rng rng(derive_seed(spec.master_seed, "render-source", utt.utt_id));
  std::vector<int> reps;
  reps.reserve(utt.source_text.size());
  for (int tok : utt.source_text) {
    if (tok < 0 || tok >= spec.source_alphabet_size)
      throw DataError("utterance " + utt.utt_id + ": unknown source token " + std::to_string(tok));
    reps.push_back(static_cast<int>(rng.uniform_int(spec.source_frames_per_token.first, spec.source_frames_per_token.second)));
  }
  int total = 0;
  for (int r : reps) total += r;
  FeatureSequence fs;
  fs.utt_id = utt.utt_id;
  fs.system_id = "source";
  fs.frames.resize(total, spec.feature_dim);
  int row = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (int r = 0; r < reps[i]; ++r, ++row) {
      for (int d = 0; d < spec.feature_dim; ++d)
        fs.frames(row, d) = world.source_embeddings()(utt.source_text[i], d) + spec.source_jitter * rng.normal();
    }
  }
  return fs;
}

/// Phoneme -> template map of one simulated acoustic model. The pause is never
/// redrawn. Draws do not depend on the agreement value, so raising agreement
/// only turns redrawn entries back into copies.
inline std::vector<int> system_lexicon(const World& world, const TtsSystemSpec& sys) {
  const int P = world.phoneme_count();
  Rng rng(derive_seed(world.spec().master_seed, "lexicon", sys.lexicon_seed));
  std::vector<int> lex(static_cast<std::size_t>(P));
  lex[kPausePhoneme] = kPausePhoneme;
  for (int p = 1; p < P; ++p) {
    const double u = rng.uniform();
    const int redraw = static_cast<int>(rng.uniform_int(1, P - 1));
    lex[static_cast<std::size_t>(p)] = u < sys.lexicon_agreement ? p : redraw;
  }
  return lex;
}

/// Frames for one phoneme occurrence after speed scaling.
inline int scaled_duration(double base, double speed_factor) {
  return static_cast<int>(std::max(1L, round_half_up(base / speed_factor)));
}

inline SynthesizedTarget synth_target(const ParallelUtterance& utt, const TtsSystemSpec& sys, const World& world) {
  sys.validate();
  const auto& spec = world.spec();
  const auto graphemes = world.graphemes_of(utt.target_text);
  if (graphemes.empty()) throw DataError("utterance " + utt.utt_id + " has empty target text");

  SynthesizedTarget out;
  out.phonemes = world.phonemes_of(graphemes);
  const auto lexicon = system_lexicon(world, sys);
  const std::size_t n = out.phonemes.size();

  // Durations.
  Rng dur_rng(derive_seed(spec.master_seed, "durations", sys.lexicon_seed, utt.utt_id));
  out.durations.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double base = world.base_durations()[static_cast<std::size_t>(out.phonemes[i])];
    if (sys.duration_mode == DurationMode::kStochastic) base = std::max(1.0, base + 0.6 * dur_rng.normal());
    out.durations[i] = scaled_duration(base, sys.speed_factor);
  }

  // Templates, with the optional one-phoneme corruption.
  out.templates.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.templates[i] = lexicon[static_cast<std::size_t>(out.phonemes[i])];
  Rng err_rng(derive_seed(spec.master_seed, "synthesis-error", sys.lexicon_seed, sys.vocoder_id, utt.utt_id));
  if (err_rng.bernoulli(sys.synthesis_error_rate)) {
    std::vector<std::size_t> speech;
    for (std::size_t i = 0; i < n; ++i)
      if (out.phonemes[i] != kPausePhoneme) speech.push_back(i);
    const auto pos = speech[static_cast<std::size_t>(err_rng.uniform_int(0, static_cast<std::int64_t>(speech.size()) - 1))];
    const int P = world.phoneme_count();
    const int shift = static_cast<int>(err_rng.uniform_int(1, P - 2));
    out.templates[pos] = 1 + (out.templates[pos] - 1 + shift) % (P - 1);
    out.corrupted_position = static_cast<int>(pos);
  }

  // Frames: template plus jitter; the vocoder perturbs individual frames.
  int total = 0;
  for (int d : out.durations) total += d;
  out.features.utt_id = utt.utt_id;
  out.features.system_id = sys.system_id;
  out.features.frames.resize(total, spec.feature_dim);
  out.perturbed.assign(static_cast<std::size_t>(total), false);
  Rng voc_rng(derive_seed(spec.master_seed, "vocoder", sys.vocoder_id, utt.utt_id));
  int row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < out.durations[i]; ++f, ++row) {
      for (int d = 0; d < spec.feature_dim; ++d)
        out.features.frames(row, d) = world.templates()(out.templates[i], d) + spec.target_jitter * voc_rng.normal();
      if (voc_rng.bernoulli(sys.vocoder_noise_rate)) {
        out.perturbed[static_cast<std::size_t>(row)] = true;
        for (int d = 0; d < spec.feature_dim; ++d) out.features.frames(row, d) += spec.vocoder_noise_scale * voc_rng.normal();
      }
    }
  }
  return out;
}

}  // namespace s2ut
