// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Small in-memory worlds shared by several test files.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "s2ut/synthworld.hpp"
#include "s2ut/targetprep.hpp"
#include "s2ut/unitizer.hpp"

namespace s2ut::testing {

inline TtsSystemSpec make_system(const std::string& id, std::uint64_t lexicon_seed, double agreement = 1.0, double noise = 0.0,
                                 double error = 0.0) {
  TtsSystemSpec s;
  s.system_id = id;
  s.acoustic_model = "AM" + std::to_string(lexicon_seed);
  s.lexicon_seed = lexicon_seed;
  s.lexicon_agreement = agreement;
  s.vocoder_id = "V-" + id;
  s.vocoder_noise_rate = noise;
  s.synthesis_error_rate = error;
  return s;
}

/// Corpus, synthesized systems, a codebook fit on all of them, reduced units.
struct MiniWorld {
  World world;
  std::vector<ParallelUtterance> corpus;
  std::map<std::string, std::map<std::string, SynthesizedTarget>> synth;
  Codebook codebook;
  UnitCorpora units;

  MiniWorld(const ToyLanguageSpec& spec, const std::vector<TtsSystemSpec>& systems, int k = 12)
      : world(spec), corpus(gen_parallel_corpus(world)) {
    Eigen::Index rows = 0;
    for (const auto& s : systems)
      for (const auto& u : corpus) {
        auto t = synth_target(u, s, world);
        rows += t.features.frame_count();
        synth[s.system_id].emplace(u.utt_id, std::move(t));
      }
    FrameMatrix all(rows, spec.feature_dim);
    Eigen::Index r = 0;
    for (const auto& [sys, m] : synth)
      for (const auto& [utt, t] : m) {
        all.middleRows(r, t.features.frame_count()) = t.features.frames;
        r += t.features.frame_count();
      }
    codebook = fit_kmeans(all, k, 1);
    for (const auto& [sys, m] : synth)
      for (const auto& [utt, t] : m) units[sys][utt] = reduce_units(encode_units(t.features, codebook));
  }

  std::string text(const std::string& utt) const {
    for (const auto& u : corpus)
      if (u.utt_id == utt) return u.target_text;
    return {};
  }

  std::vector<AsrTrainingPair> pairs(const std::vector<std::string>& systems, Split split = Split::kTrain) const {
    std::vector<AsrTrainingPair> out;
    for (const auto& s : systems)
      for (const auto& u : corpus)
        if (u.split == split) out.push_back({units.at(s).at(u.utt_id), u.target_text, synth.at(s).at(u.utt_id).durations});
    return out;
  }
};

inline ToyLanguageSpec mini_spec(int train = 120, int dev = 10, int test = 40) {
  ToyLanguageSpec s;
  s.corpus_sizes = {train, dev, test};
  return s;
}

}  // namespace s2ut::testing
