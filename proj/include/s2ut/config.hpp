// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration (JSON) and the default system registry.

#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "s2ut/common.hpp"
#include "s2ut/inference.hpp"
#include "s2ut/model.hpp"
#include "s2ut/synthworld.hpp"
#include "s2ut/targetprep.hpp"
#include "s2ut/train.hpp"

namespace s2ut {

struct UnitizerConfig {
  int k = 12;
  std::uint64_t seed = 11;
  int max_iters = 100;
  // Frames are pooled over the train split of every registered system and
  // subsampled to at most this many before fitting.
  int max_fit_frames = 20000;
  int n_init = 10;

  bool operator==(const UnitizerConfig&) const = default;
};

struct CellSpec {
  std::string id;
  DatasetMode mode = DatasetMode::kSingle;
  std::vector<std::string> systems;
  std::vector<std::uint64_t> seeds;

  bool operator==(const CellSpec&) const = default;
};

struct ExperimentConfig {
  ToyLanguageSpec world;
  std::vector<TtsSystemSpec> systems;
  UnitizerConfig unitizer;
  AsrOptions asr;
  ModelConfig model;
  TrainConfig train;
  BeamOptions decode;
  std::vector<CellSpec> cells;

  bool operator==(const ExperimentConfig&) const = default;

  const TtsSystemSpec& system(const std::string& id) const {
    for (const auto& s : systems)
      if (s.system_id == id) return s;
    throw ConfigError("unknown system '" + id + "'");
  }

  const CellSpec& cell(const std::string& id) const {
    for (const auto& c : cells)
      if (c.id == id) return c;
    throw ConfigError("unknown cell '" + id + "'");
  }

  void validate() const {
    world.validate();
    if (systems.empty()) throw ConfigError("at least one system is required");
    std::set<std::string> ids;
    for (const auto& s : systems) {
      s.validate();
      if (!ids.insert(s.system_id).second) throw ConfigError("duplicate system_id '" + s.system_id + "'");
    }
    if (unitizer.k < 1 || unitizer.max_iters < 1 || unitizer.n_init < 1 ||
        unitizer.max_fit_frames < unitizer.k)
      throw ConfigError("unitizer needs k >= 1, max_iters >= 1, n_init >= 1 and max_fit_frames >= k");
    if (asr.decode_beam < 1 || asr.substitution_cost < 0 || asr.skip_cost < 0) throw ConfigError("invalid asr options");
    model.validate();
    train.validate();
    if (decode.beam < 1 || decode.max_len < 1) throw ConfigError("decode beam and max_len must be >= 1");
    std::set<std::string> cell_ids;
    for (const auto& c : cells) {
      if (c.id.empty() || c.id.find_first_of("/\\ ") != std::string::npos) throw ConfigError("cell id '" + c.id + "' is not a plain name");
      if (!cell_ids.insert(c.id).second) throw ConfigError("duplicate cell id '" + c.id + "'");
      if (c.seeds.empty()) throw ConfigError("cell " + c.id + " needs at least one seed");
      if (c.systems.empty()) throw ConfigError("cell " + c.id + " needs at least one system");
      if (c.mode == DatasetMode::kSingle && c.systems.size() != 1) throw ConfigError("single cell " + c.id + " takes one system");
      std::set<std::string> seen;
      for (const auto& s : c.systems) {
        if (!ids.contains(s)) throw ConfigError("cell " + c.id + " references unknown system '" + s + "'");
        if (!seen.insert(s).second) throw ConfigError("cell " + c.id + " lists system '" + s + "' twice");
      }
    }
  }

  /// Architecture of a cell's model: vocabulary, input size and branches
  /// follow from the world, the codebook and the cell mode.
  ModelConfig model_for(const CellSpec& c) const {
    ModelConfig m = model;
    m.input_dim = world.feature_dim;
    m.unit_vocab = unitizer.k + tokens::kSpecialCount;
    m.branch_count = c.mode == DatasetMode::kMultitask ? static_cast<int>(c.systems.size()) : 1;
    m.quality_token = c.mode == DatasetMode::kMultitask;
    return m;
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

/// Keys of `j` must be keys of `reference`.
inline void check_keys_like(const nlohmann::json& j, const nlohmann::json& reference, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!reference.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ToyLanguageSpec& s) {
  j = {{"source_alphabet_size", s.source_alphabet_size},
       {"target_alphabet_size", s.target_alphabet_size},
       {"phoneme_inventory_size", s.phoneme_inventory_size},
       {"sentence_length_range", {s.sentence_length_range.first, s.sentence_length_range.second}},
       {"corpus_sizes", s.corpus_sizes},
       {"master_seed", s.master_seed},
       {"feature_dim", s.feature_dim},
       {"source_frames_per_token", {s.source_frames_per_token.first, s.source_frames_per_token.second}},
       {"source_jitter", s.source_jitter},
       {"target_jitter", s.target_jitter},
       {"vocoder_noise_scale", s.vocoder_noise_scale}};
}

inline void from_json(const nlohmann::json& j, ToyLanguageSpec& s) {
  detail::check_keys(j,
                     {"source_alphabet_size", "target_alphabet_size", "phoneme_inventory_size", "sentence_length_range",
                      "corpus_sizes", "master_seed", "feature_dim", "source_frames_per_token", "source_jitter", "target_jitter",
                      "vocoder_noise_scale"},
                     "world");
  s = ToyLanguageSpec{};
  s.source_alphabet_size = j.value("source_alphabet_size", s.source_alphabet_size);
  s.target_alphabet_size = j.value("target_alphabet_size", s.target_alphabet_size);
  s.phoneme_inventory_size = j.value("phoneme_inventory_size", s.phoneme_inventory_size);
  if (j.contains("sentence_length_range")) {
    const auto r = j.at("sentence_length_range").get<std::vector<int>>();
    if (r.size() != 2) throw ConfigError("sentence_length_range needs two values");
    s.sentence_length_range = {r[0], r[1]};
  }
  if (j.contains("corpus_sizes")) s.corpus_sizes = j.at("corpus_sizes").get<std::array<int, 3>>();
  s.master_seed = j.value("master_seed", s.master_seed);
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  if (j.contains("source_frames_per_token")) {
    const auto r = j.at("source_frames_per_token").get<std::vector<int>>();
    if (r.size() != 2) throw ConfigError("source_frames_per_token needs two values");
    s.source_frames_per_token = {r[0], r[1]};
  }
  s.source_jitter = j.value("source_jitter", s.source_jitter);
  s.target_jitter = j.value("target_jitter", s.target_jitter);
  s.vocoder_noise_scale = j.value("vocoder_noise_scale", s.vocoder_noise_scale);
}

inline void to_json(nlohmann::json& j, const TtsSystemSpec& s) {
  j = {{"system_id", s.system_id},
       {"acoustic_model", s.acoustic_model},
       {"lexicon_seed", s.lexicon_seed},
       {"lexicon_agreement", s.lexicon_agreement},
       {"duration_mode", std::string(to_string(s.duration_mode))},
       {"speed_factor", s.speed_factor},
       {"vocoder_id", s.vocoder_id},
       {"vocoder_noise_rate", s.vocoder_noise_rate},
       {"synthesis_error_rate", s.synthesis_error_rate}};
}

inline void from_json(const nlohmann::json& j, TtsSystemSpec& s) {
  detail::check_keys(j,
                     {"system_id", "acoustic_model", "lexicon_seed", "lexicon_agreement", "duration_mode", "speed_factor",
                      "vocoder_id", "vocoder_noise_rate", "synthesis_error_rate"},
                     "system");
  s = TtsSystemSpec{};
  s.system_id = j.at("system_id").get<std::string>();
  s.acoustic_model = j.value("acoustic_model", s.acoustic_model);
  s.lexicon_seed = j.value("lexicon_seed", s.lexicon_seed);
  s.lexicon_agreement = j.value("lexicon_agreement", s.lexicon_agreement);
  if (j.contains("duration_mode")) s.duration_mode = duration_mode_from_string(j.at("duration_mode").get<std::string>());
  s.speed_factor = j.value("speed_factor", s.speed_factor);
  s.vocoder_id = j.value("vocoder_id", s.vocoder_id);
  s.vocoder_noise_rate = j.value("vocoder_noise_rate", s.vocoder_noise_rate);
  s.synthesis_error_rate = j.value("synthesis_error_rate", s.synthesis_error_rate);
}

inline void to_json(nlohmann::json& j, const UnitizerConfig& u) {
  j = {{"k", u.k}, {"seed", u.seed}, {"max_iters", u.max_iters}, {"max_fit_frames", u.max_fit_frames}, {"n_init", u.n_init}};
}

inline void from_json(const nlohmann::json& j, UnitizerConfig& u) {
  detail::check_keys(j, {"k", "seed", "max_iters", "max_fit_frames", "n_init"}, "unitizer");
  u = UnitizerConfig{};
  u.k = j.value("k", u.k);
  u.seed = j.value("seed", u.seed);
  u.max_iters = j.value("max_iters", u.max_iters);
  u.max_fit_frames = j.value("max_fit_frames", u.max_fit_frames);
  u.n_init = j.value("n_init", u.n_init);
}

inline void to_json(nlohmann::json& j, const AsrOptions& a) {
  j = {{"decode_beam", a.decode_beam}, {"substitution_cost", a.substitution_cost}, {"skip_cost", a.skip_cost}};
}

inline void from_json(const nlohmann::json& j, AsrOptions& a) {
  detail::check_keys(j, {"decode_beam", "substitution_cost", "skip_cost"}, "asr");
  a = AsrOptions{};
  a.decode_beam = j.value("decode_beam", a.decode_beam);
  a.substitution_cost = j.value("substitution_cost", a.substitution_cost);
  a.skip_cost = j.value("skip_cost", a.skip_cost);
}

inline void to_json(nlohmann::json& j, const BeamOptions& b) {
  j = {{"beam", b.beam}, {"max_len", b.max_len}, {"length_alpha", b.length_alpha}};
}

inline void from_json(const nlohmann::json& j, BeamOptions& b) {
  detail::check_keys(j, {"beam", "max_len", "length_alpha"}, "decode");
  b = BeamOptions{};
  b.beam = j.value("beam", b.beam);
  b.max_len = j.value("max_len", b.max_len);
  b.length_alpha = j.value("length_alpha", b.length_alpha);
}

inline void to_json(nlohmann::json& j, const CellSpec& c) {
  j = {{"id", c.id}, {"mode", std::string(to_string(c.mode))}, {"systems", c.systems}, {"seeds", c.seeds}};
}

inline void from_json(const nlohmann::json& j, CellSpec& c) {
  detail::check_keys(j, {"id", "mode", "systems", "seeds"}, "cell");
  c.id = j.at("id").get<std::string>();
  c.mode = dataset_mode_from_string(j.at("mode").get<std::string>());
  c.systems = j.at("systems").get<std::vector<std::string>>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"world", c.world},   {"systems", c.systems}, {"unitizer", c.unitizer}, {"asr", c.asr},
       {"model", c.model},   {"train", c.train},     {"decode", c.decode},     {"cells", c.cells}};
}

/// The system menu used when a config omits "systems": three acoustic
/// families with vocoder and speed variants, labelled A to K.
inline std::vector<TtsSystemSpec> default_registry() {
  auto sys = [](std::string id, std::string am, std::uint64_t seed, DurationMode dm, double speed, std::string voc, double noise,
                double agreement) {
    TtsSystemSpec s;
    s.system_id = std::move(id);
    s.acoustic_model = std::move(am);
    s.lexicon_seed = seed;
    s.lexicon_agreement = agreement;
    s.duration_mode = dm;
    s.speed_factor = speed;
    s.vocoder_id = std::move(voc);
    s.vocoder_noise_rate = noise;
    s.synthesis_error_rate = 0.05;
    return s;
  };
  const auto AR = DurationMode::kStochastic;
  const auto NAR = DurationMode::kDeterministic;
  return {
      sys("A", "TT2", 101, AR, 1.0, "PWG", 0.02, 0.8),   sys("B", "TT2", 101, AR, 1.0, "HFG", 0.01, 0.8),
      sys("C", "TT2", 101, AR, 1.0, "SMG", 0.015, 0.8),  sys("D", "FS2", 202, NAR, 1.0, "PWG", 0.02, 0.8),
      sys("E", "FS2", 202, NAR, 1.0, "HFG", 0.01, 0.8),  sys("F", "FS2", 202, NAR, 1.0, "SMG", 0.015, 0.8),
      sys("G", "VITS", 303, NAR, 1.0, "VITS", 0.01, 0.8), sys("H", "FS2", 202, NAR, 0.95, "HFG", 0.01, 0.8),
      sys("I", "FS2", 202, NAR, 1.05, "HFG", 0.01, 0.8),  sys("J", "VITS", 303, NAR, 0.95, "VITS", 0.01, 0.8),
      sys("K", "VITS", 303, NAR, 1.05, "VITS", 0.01, 0.8),
  };
}

inline std::vector<CellSpec> default_cells() {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  return {
      {"single-B", DatasetMode::kSingle, {"B"}, seeds},
      {"single-E", DatasetMode::kSingle, {"E"}, seeds},
      {"single-G", DatasetMode::kSingle, {"G"}, seeds},
      {"combined-BEG", DatasetMode::kCombined, {"B", "E", "G"}, seeds},
      {"multitask-BEG", DatasetMode::kMultitask, {"B", "E", "G"}, seeds},
  };
}

/// Desk-scale defaults (see README for how they relate to the full recipe).
inline ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.world.corpus_sizes = {200, 20, 50};
  c.world.source_frames_per_token = {3, 3};
  c.systems = default_registry();
  c.model.hidden_dim = 64;
  c.model.ffn_dim = 128;
  c.model.attention_heads = 2;
  c.model.dropout = 0.1;
  c.train.learning_rate = 1e-3;
  c.train.warmup_steps = 300;
  c.train.grad_accum = 1;
  c.train.batch_size = 8;
  c.train.max_steps = 3000;
  c.train.eval_every = 250;
  c.decode.beam = 5;
  c.decode.max_len = 96;
  c.cells = default_cells();
  return c;
}

/// Sections present in `j` are merged over the built-in defaults, so a config
/// only has to name the fields it changes. "systems" and "cells" are lists and
/// replace the defaults wholesale.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  detail::check_keys(j, {"world", "systems", "unitizer", "asr", "model", "train", "decode", "cells"}, "config");
  const ExperimentConfig defaults = default_experiment_config();
  auto section = [&](const char* key, const auto& fallback) {
    using T = std::decay_t<decltype(fallback)>;
    if (!j.contains(key)) return fallback;
    nlohmann::json merged = fallback;
    detail::check_keys_like(j.at(key), merged, key);
    merged.merge_patch(j.at(key));
    return merged.get<T>();
  };
  c.world = section("world", defaults.world);
  c.systems = j.contains("systems") ? j.at("systems").get<std::vector<TtsSystemSpec>>() : defaults.systems;
  c.unitizer = section("unitizer", defaults.unitizer);
  c.asr = section("asr", defaults.asr);
  c.model = section("model", defaults.model);
  c.train = section("train", defaults.train);
  c.decode = section("decode", defaults.decode);
  c.cells = j.contains("cells") ? j.at("cells").get<std::vector<CellSpec>>() : defaults.cells;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig c;
  try {
    c = nlohmann::json::parse(text).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::string serialize_experiment_config(const ExperimentConfig& c) { return nlohmann::json(c).dump(2) + "\n"; }

}  // namespace s2ut
