// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Toy recogniser, sentence-level CER, quality tokens and training sets.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "s2ut/common.hpp"
#include "s2ut/metrics.hpp"
#include "s2ut/synthworld.hpp"
#include "s2ut/unitizer.hpp"

namespace s2ut {

// Target vocabulary: five specials followed by the K unit ids.
namespace tokens {
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kYes = 3;
inline constexpr int kNo = 4;
inline constexpr int kSpecialCount = 5;

inline int from_unit(int unit) { return unit + kSpecialCount; }
inline bool is_unit(int token) { return token >= kSpecialCount; }
inline int to_unit(int token) { return token - kSpecialCount; }
}  // namespace tokens

/// One recogniser training item: the units of a synthesized utterance, its
/// reference text and the frame length of every phoneme from the generator.
struct AsrTrainingPair {
  ReducedUnits units;
  std::string text;
  std::vector<int> phoneme_durations;
};

struct AsrOptions {
  int decode_beam = 4;  // inventory entries per phoneme considered while decoding
  double substitution_cost = 4.0;
  double skip_cost = 6.0;  // dropping one unit that no entry explains

  bool operator==(const AsrOptions&) const = default;
};

/// Unit-to-text recogniser standing in for a pretrained ASR model.
///
/// The inventory maps every phoneme to the reduced unit strings it was seen as,
/// with counts pooled over all systems. Decoding segments a unit sequence into
/// word and pause realisations built from that inventory, minimising
/// substitution cost minus log frequency; equal costs resolve to the
/// lexicographically smallest phoneme sequence.
class ToyAsr {
 public:
  struct Entry {
    std::vector<int> units;
    long count = 0;
    double cost = 0.0;  // -log relative frequency within the phoneme
  };

  struct Candidate {
    int grapheme = -1;  // -1 for the pause
    std::vector<int> units;
    double cost = 0.0;
  };

  ToyAsr() = default;

  ToyAsr(const World& world, std::span<const AsrTrainingPair> pairs, AsrOptions options = {}) : options_(options) {
    const int P = world.phoneme_count();
    pronunciations_.assign(world.pronunciations().begin(), world.pronunciations().end());
    symbols_.assign(kGraphemeSymbols.begin(), kGraphemeSymbols.begin() + world.grapheme_count());

    std::vector<std::map<std::vector<int>, long>> counts(static_cast<std::size_t>(P));
    for (const auto& pair : pairs) {
      const auto frames = expand_units(pair.units);
      const auto phonemes = world.phonemes_of(world.graphemes_of(pair.text));
      if (phonemes.size() != pair.phoneme_durations.size())
        throw BuildError("alignment length does not match the phonemes of '" + pair.text + "'");
      std::size_t pos = 0;
      for (std::size_t i = 0; i < phonemes.size(); ++i) {
        const auto d = static_cast<std::size_t>(pair.phoneme_durations[i]);
        if (d < 1 || pos + d > frames.size()) throw BuildError("alignment does not cover the units of '" + pair.text + "'");
        auto seg = reduce_units(std::span<const int>(frames).subspan(pos, d)).units;
        ++counts[static_cast<std::size_t>(phonemes[i])][seg];
        pos += d;
      }
      if (pos != frames.size()) throw BuildError("alignment does not cover the units of '" + pair.text + "'");
    }

    std::vector<bool> needed(static_cast<std::size_t>(P), false);
    needed[kPausePhoneme] = true;
    for (const auto& pr : pronunciations_) needed[static_cast<std::size_t>(pr[0])] = needed[static_cast<std::size_t>(pr[1])] = true;

    inventory_.resize(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p) {
      auto& c = counts[static_cast<std::size_t>(p)];
      if (c.empty()) {
        if (needed[static_cast<std::size_t>(p)]) throw BuildError("phoneme " + std::to_string(p) + " has no training realisation");
        continue;
      }
      long total = 0;
      for (const auto& [units, n] : c) total += n;
      auto& inv = inventory_[static_cast<std::size_t>(p)];
      for (const auto& [units, n] : c)
        inv.push_back({units, n, -std::log(static_cast<double>(n) / static_cast<double>(total))});
      std::stable_sort(inv.begin(), inv.end(), [](const Entry& a, const Entry& b) { return a.count > b.count; });
    }
    build_candidates();
  }

  const AsrOptions& options() const { return options_; }
  std::span<const Entry> inventory(int phoneme) const { return inventory_[static_cast<std::size_t>(phoneme)]; }
  std::span<const Candidate> word_candidates() const { return words_; }
  std::span<const Candidate> pause_candidates() const { return pauses_; }
  std::span<const std::array<int, 2>> pronunciations() const { return pronunciations_; }

  std::string text_of(std::span<const int> graphemes) const {
    std::string out;
    for (std::size_t i = 0; i < graphemes.size(); ++i) {
      if (i) out.push_back(' ');
      out.push_back(symbols_[static_cast<std::size_t>(graphemes[i])]);
    }
    return out;
  }

  struct Decoded {
    std::vector<int> graphemes;
    std::vector<int> phonemes;
    double cost = 0.0;
    std::string text;
  };

  Decoded decode_full(std::span<const int> units) const {
    const std::size_t n = units.size();
    struct State {
      double cost = std::numeric_limits<double>::infinity();
      std::vector<int> phonemes;
      std::vector<int> graphemes;
    };
    // state 0: a word is expected next; state 1: a word was just completed.
    std::vector<std::array<State, 2>> best(n + 1);
    best[0][0].cost = 0.0;

    auto relax = [&](std::size_t i, int s, double cost, const State& from, const Candidate* cand) {
      State& cur = best[i][static_cast<std::size_t>(s)];
      std::vector<int> ph = from.phonemes;
      std::vector<int> gr = from.graphemes;
      if (cand) {
        if (cand->grapheme < 0) {
          ph.push_back(kPausePhoneme);
        } else {
          const auto& pr = pronunciations_[static_cast<std::size_t>(cand->grapheme)];
          ph.push_back(pr[0]);
          ph.push_back(pr[1]);
          gr.push_back(cand->grapheme);
        }
      }
      if (cost < cur.cost || (cost == cur.cost && ph < cur.phonemes)) {
        cur.cost = cost;
        cur.phonemes = std::move(ph);
        cur.graphemes = std::move(gr);
      }
    };

    for (std::size_t i = 0; i <= n; ++i) {
      for (int s = 0; s < 2; ++s) {
        const State from = best[i][static_cast<std::size_t>(s)];
        if (!std::isfinite(from.cost)) continue;
        if (i < n) relax(i + 1, s, from.cost + options_.skip_cost, from, nullptr);
        for (const auto& cand : s == 0 ? words_ : pauses_) {
          const std::size_t L = cand.units.size();
          if (i + L > n) continue;
          const double c = from.cost + cand.cost + options_.substitution_cost * mismatches(cand.units, units.subspan(i, L));
          relax(i + L, 1 - s, c, from, &cand);
        }
      }
    }
    Decoded out;
    const State& fin = best[n][1];
    if (n == 0 || !std::isfinite(fin.cost)) return out;
    out.graphemes = fin.graphemes;
    out.phonemes = fin.phonemes;
    out.cost = fin.cost;
    out.text = text_of(out.graphemes);
    return out;
  }

  static double mismatches(std::span<const int> a, std::span<const int> b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m += a[i] != b[i] ? 1.0 : 0.0;
    return m;
  }

 private:
  void build_candidates() {
    const auto beam = static_cast<std::size_t>(std::max(1, options_.decode_beam));
    auto top = [&](int p) {
      const auto& inv = inventory_[static_cast<std::size_t>(p)];
      return std::span<const Entry>(inv.data(), std::min(beam, inv.size()));
    };
    words_.clear();
    for (int g = 0; g < static_cast<int>(pronunciations_.size()); ++g) {
      std::map<std::vector<int>, double> realisations;
      std::vector<std::vector<int>> order;
      for (const auto& ea : top(pronunciations_[static_cast<std::size_t>(g)][0])) {
        for (const auto& eb : top(pronunciations_[static_cast<std::size_t>(g)][1])) {
          std::vector<int> joined = ea.units;
          joined.insert(joined.end(), eb.units.begin(), eb.units.end());
          auto real = reduce_units(std::span<const int>(joined)).units;
          const double c = ea.cost + eb.cost;
          auto [it, inserted] = realisations.emplace(real, c);
          if (inserted) order.push_back(real);
          else it->second = std::min(it->second, c);
        }
      }
      for (const auto& real : order) words_.push_back({g, real, realisations[real]});
    }
    pauses_.clear();
    for (const auto& e : top(kPausePhoneme)) pauses_.push_back({-1, e.units, e.cost});
  }

  AsrOptions options_;
  std::vector<std::array<int, 2>> pronunciations_;
  std::vector<char> symbols_;
  std::vector<std::vector<Entry>> inventory_;
  std::vector<Candidate> words_;
  std::vector<Candidate> pauses_;
};

inline ToyAsr build_toy_asr(const World& world, std::span<const AsrTrainingPair> pairs, AsrOptions options = {}) {
  return ToyAsr(world, pairs, options);
}

inline std::string asr_decode(const ToyAsr& asr, std::span<const int> units) { return asr.decode_full(units).text; }
inline std::string asr_decode(const ToyAsr& asr, const ReducedUnits& r) { return asr_decode(asr, std::span<const int>(r.units)); }

enum class QualityToken { kYes, kNo };

inline char to_char(QualityToken t) { return t == QualityToken::kYes ? 'Y' : 'N'; }
inline int to_token(QualityToken t) { return t == QualityToken::kYes ? tokens::kYes : tokens::kNo; }

/// utt_id -> system_id -> value. Ordered maps keep every export stable.
template <typename T>
using PerUttSystem = std::map<std::string, std::map<std::string, T>>;

struct CerTable {
  PerUttSystem<double> rows;

  double at(const std::string& utt, const std::string& sys) const { return rows.at(utt).at(sys); }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [u, r] : rows) n += r.size();
    return n;
  }
};

/// Unit corpora of several systems: system_id -> utt_id -> reduced units.
using UnitCorpora = std::map<std::string, std::map<std::string, ReducedUnits>>;

inline CerTable compute_cer_table(const ToyAsr& asr, const UnitCorpora& corpora, const std::map<std::string, std::string>& refs) {
  CerTable table;
  for (const auto& [utt, ref] : refs) {
    auto& row = table.rows[utt];
    for (const auto& [sys, units] : corpora) {
      const auto it = units.find(utt);
      if (it == units.end()) throw DataError("system " + sys + " has no units for utterance " + utt);
      row[sys] = cer(asr_decode(asr, it->second), ref);
    }
  }
  return table;
}

/// Y for every system whose CER equals the utterance minimum, N otherwise.
inline PerUttSystem<QualityToken> assign_quality_tokens(const CerTable& table) {
  PerUttSystem<QualityToken> out;
  for (const auto& [utt, row] : table.rows) {
    if (row.empty()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [sys, c] : row) best = std::min(best, c);
    auto& dst = out[utt];
    for (const auto& [sys, c] : row) dst[sys] = c == best ? QualityToken::kYes : QualityToken::kNo;
  }
  return out;
}

enum class DatasetMode { kSingle, kCombined, kMultitask };

inline std::string_view to_string(DatasetMode m) {
  switch (m) {
    case DatasetMode::kSingle: return "single";
    case DatasetMode::kCombined: return "combined";
    case DatasetMode::kMultitask: return "multitask";
  }
  return "?";
}

inline DatasetMode dataset_mode_from_string(std::string_view s) {
  if (s == "single") return DatasetMode::kSingle;
  if (s == "combined") return DatasetMode::kCombined;
  if (s == "multitask") return DatasetMode::kMultitask;
  throw ConfigError("unknown dataset mode '" + std::string(s) + "'");
}

struct TrainingExample {
  std::string utt_id;
  std::shared_ptr<const FeatureSequence> source;
  // One token stream per decoder branch, without BOS/EOS.
  std::vector<std::vector<int>> targets;
  // System that produced each stream.
  std::vector<std::string> systems;
};

struct TrainingSet {
  DatasetMode mode = DatasetMode::kSingle;
  std::vector<std::string> systems;
  std::vector<TrainingExample> examples;

  int branch_count() const { return mode == DatasetMode::kMultitask ? static_cast<int>(systems.size()) : 1; }
};

inline std::vector<int> unit_tokens(const ReducedUnits& r) {
  std::vector<int> out;
  out.reserve(r.units.size());
  for (int u : r.units) out.push_back(tokens::from_unit(u));
  return out;
}

/// Assembles single-system, combined or multi-task training data for the
/// utterances in `utt_ids` (in that order).
inline TrainingSet build_dataset(DatasetMode mode, const std::vector<std::string>& systems,
                                 const std::vector<std::string>& utt_ids,
                                 const std::map<std::string, std::shared_ptr<const FeatureSequence>>& sources,
                                 const UnitCorpora& corpora, const PerUttSystem<QualityToken>* quality = nullptr) {
  if (systems.empty()) throw ConfigError("dataset needs at least one system");
  if (mode == DatasetMode::kSingle && systems.size() != 1) throw ConfigError("single mode takes exactly one system");
  for (const auto& s : systems)
    if (!corpora.contains(s)) throw ConfigError("unknown system '" + s + "'");
  if (mode == DatasetMode::kMultitask && !quality) throw ConfigError("multitask mode needs quality tokens");

  auto units_of = [&](const std::string& sys, const std::string& utt) -> const ReducedUnits& {
    const auto& c = corpora.at(sys);
    const auto it = c.find(utt);
    if (it == c.end()) throw DataError("system " + sys + " has no units for utterance " + utt);
    return it->second;
  };
  auto source_of = [&](const std::string& utt) {
    const auto it = sources.find(utt);
    if (it == sources.end()) throw DataError("no source features for utterance " + utt);
    return it->second;
  };

  TrainingSet set;
  set.mode = mode;
  set.systems = systems;
  for (const auto& utt : utt_ids) {
    if (mode == DatasetMode::kMultitask) {
      TrainingExample ex{utt, source_of(utt), {}, {}};
      for (const auto& sys : systems) {
        const auto& row = quality->find(utt);
        if (row == quality->end() || !row->second.contains(sys)) throw DataError("no quality token for " + utt + "/" + sys);
        std::vector<int> stream{to_token(row->second.at(sys))};
        const auto body = unit_tokens(units_of(sys, utt));
        stream.insert(stream.end(), body.begin(), body.end());
        ex.targets.push_back(std::move(stream));
        ex.systems.push_back(sys);
      }
      set.examples.push_back(std::move(ex));
    } else {
      for (const auto& sys : systems) set.examples.push_back({utt, source_of(utt), {unit_tokens(units_of(sys, utt))}, {sys}});
    }
  }
  return set;
}

}  // namespace s2ut
