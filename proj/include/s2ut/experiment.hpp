// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end pipeline with a content-addressed artifact store.
//
// Every stage result is written under <store>/<stage>/.../<hash>/ where the
// hash covers the configuration slice the stage depends on plus the hashes of
// its inputs, so cells share upstream work and edits invalidate only what
// they touch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2ut/common.hpp"
#include "s2ut/config.hpp"
#include "s2ut/inference.hpp"
#include "s2ut/io.hpp"
#include "s2ut/metrics.hpp"
#include "s2ut/model.hpp"
#include "s2ut/synthworld.hpp"
#include "s2ut/targetprep.hpp"
#include "s2ut/train.hpp"
#include "s2ut/unitizer.hpp"

namespace s2ut {

inline constexpr const char* kStoreEnv = "S2UT_STORE";

/// Store root: $S2UT_STORE, or ./s2ut-store.
inline fs::path default_store_root() {
  const char* env = std::getenv(kStoreEnv);
  return env && *env ? fs::path(env) : fs::path("s2ut-store");
}

/// One decoded test utterance.
struct DecodeRecord {
  std::string utt_id;
  std::string branch_id;
  int branch = 0;
  std::map<std::string, double> p_yes;
  std::vector<int> units;
  double score = 0.0;
  bool truncated = false;
  std::string hyp_text;
  std::string ref_text;
};

inline json to_json_record(const DecodeRecord& r) {
  json p = json::object();
  for (const auto& [k, v] : r.p_yes) p[k] = v;
  return {{"format_version", kFormatVersion}, {"utt_id", r.utt_id}, {"branch_id", r.branch_id}, {"branch", r.branch},
          {"p_yes", p},  {"units", r.units}, {"score", r.score}, {"truncated", r.truncated},
          {"hyp_text", r.hyp_text}, {"ref_text", r.ref_text}};
}

inline std::string decodes_to_jsonl(const std::vector<DecodeRecord>& rows) {
  std::string out;
  for (const auto& r : rows) out += to_json_record(r).dump() + '\n';
  return out;
}

inline std::vector<DecodeRecord> decodes_from_jsonl(const std::string& text) {
  std::vector<DecodeRecord> out;
  for (const auto& j : parse_jsonl(text, "decodes")) {
    out.push_back(checked("decode record", [&] {
      DecodeRecord r;
      r.utt_id = j.at("utt_id").get<std::string>();
      r.branch_id = j.at("branch_id").get<std::string>();
      r.branch = j.at("branch").get<int>();
      for (const auto& [k, v] : j.at("p_yes").items()) r.p_yes[k] = v.get<double>();
      r.units = j.at("units").get<std::vector<int>>();
      r.score = j.at("score").get<double>();
      r.truncated = j.at("truncated").get<bool>();
      r.hyp_text = j.at("hyp_text").get<std::string>();
      r.ref_text = j.at("ref_text").get<std::string>();
      return r;
    }));
  }
  return out;
}

/// Scores of one (cell, seed) run.
struct SeedResult {
  std::uint64_t seed = 0;
  double bleu = 0.0;
  double cer = 0.0;  // mean sentence CER of the transcribed output
  std::map<std::string, double> branch_bleu;  // multitask only
  std::map<std::string, int> selections;      // multitask only: chosen branch counts
  bool selection_consistent = true;           // chosen branch == argmax p_Y on every utterance

  bool operator==(const SeedResult&) const = default;
};

struct EvalReport {
  std::string cell_id;
  DatasetMode mode = DatasetMode::kSingle;
  std::vector<std::string> systems;
  std::vector<SeedResult> seeds;

  double mean_bleu() const { return mean_of([](const SeedResult& s) { return s.bleu; }); }
  double std_bleu() const { return std_of([](const SeedResult& s) { return s.bleu; }); }
  double mean_cer() const { return mean_of([](const SeedResult& s) { return s.cer; }); }
  double mean_branch_bleu(const std::string& sys) const {
    return mean_of([&](const SeedResult& s) { return s.branch_bleu.at(sys); });
  }

  template <typename F>
  double mean_of(F f) const {
    if (seeds.empty()) return std::nan("");
    double t = 0;
    for (const auto& s : seeds) t += f(s);
    return t / static_cast<double>(seeds.size());
  }
  template <typename F>
  double std_of(F f) const {
    if (seeds.size() < 2) return 0.0;
    const double m = mean_of(f);
    double t = 0;
    for (const auto& s : seeds) t += (f(s) - m) * (f(s) - m);
    return std::sqrt(t / static_cast<double>(seeds.size() - 1));
  }
};

inline json seed_result_to_json(const SeedResult& s) {
  return {{"format_version", kFormatVersion}, {"seed", s.seed}, {"bleu", s.bleu}, {"cer", s.cer}, {"branch_bleu", s.branch_bleu},
          {"selections", s.selections}, {"selection_consistent", s.selection_consistent}};
}

inline SeedResult seed_result_from_json(const json& j) {
  return checked("seed result", [&] {
    SeedResult s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.bleu = j.at("bleu").get<double>();
    s.cer = j.at("cer").get<double>();
    s.branch_bleu = j.at("branch_bleu").get<std::map<std::string, double>>();
    s.selections = j.at("selections").get<std::map<std::string, int>>();
    s.selection_consistent = j.at("selection_consistent").get<bool>();
    return s;
  });
}

/// Rethrows library errors with the failing stage named in the message.
template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error("[" + stage + "] " + e.what(), e.exit_code());
  } catch (const fs::filesystem_error& e) {
    throw Error("[" + stage + "] data error: " + e.what(), kExitData);
  }
}

struct SystemSynthesis {
  std::map<std::string, FeatureSequence> features;  // utt_id ->
  std::map<std::string, Alignment> alignments;
};

class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, fs::path store, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), store_(std::move(store)), log_(log) {
    cfg_.validate();
  }

  const ExperimentConfig& config() const { return cfg_; }
  const fs::path& store() const { return store_; }

  const World& world() {
    if (!world_) world_.emplace(cfg_.world);
    return *world_;
  }

  std::string world_hash() const { return content_hash(json(cfg_.world).dump()); }

  fs::path corpus_path() const { return store_ / "corpus" / world_hash() / "corpus.jsonl"; }

  const std::vector<ParallelUtterance>& corpus() {
    if (corpus_) return *corpus_;
    corpus_ = in_stage("gen-data", [&] {
      const fs::path p = corpus_path();
      if (fs::exists(p)) return corpus_from_jsonl(read_file(p));
      auto c = gen_parallel_corpus(world());
      write_file_atomic(p, corpus_to_jsonl(c));
      note("gen-data", std::to_string(c.size()) + " utterances -> " + p.string());
      return c;
    });
    return *corpus_;
  }

  std::vector<std::string> utt_ids(Split split) {
    std::vector<std::string> out;
    for (const auto& u : corpus())
      if (u.split == split) out.push_back(u.utt_id);
    return out;
  }

  const std::map<std::string, std::string>& references() {
    if (refs_.empty())
      for (const auto& u : corpus()) refs_[u.utt_id] = u.target_text;
    return refs_;
  }

  /// Source renderings are cheap and kept in memory only.
  const std::map<std::string, std::shared_ptr<const FeatureSequence>>& sources() {
    if (sources_.empty())
      for (const auto& u : corpus()) sources_[u.utt_id] = std::make_shared<const FeatureSequence>(render_source(u, world()));
    return sources_;
  }

  std::string system_hash(const std::string& sys) const {
    return content_hash(world_hash() + "|" + json(cfg_.system(sys)).dump());
  }

  fs::path features_dir(const std::string& sys) const { return store_ / "features" / sys / system_hash(sys); }

  const SystemSynthesis& synthesis(const std::string& sys) {
    if (const auto it = synth_.find(sys); it != synth_.end()) return it->second;
    auto result = in_stage("synth", [&] {
      const fs::path dir = features_dir(sys);
      SystemSynthesis out;
      if (fs::exists(dir / "alignment.jsonl")) {
        for (const char* split : {"train", "dev", "test"})
          for (auto& f : features_from_bytes(read_file(dir / (std::string(split) + ".feats")))) out.features[f.utt_id] = std::move(f);
        for (auto& a : alignments_from_jsonl(read_file(dir / "alignment.jsonl"))) out.alignments[a.utt_id] = std::move(a);
        return out;
      }
      const auto& spec = cfg_.system(sys);
      std::map<Split, std::vector<FeatureSequence>> by_split;
      std::vector<Alignment> aligns;
      for (const auto& u : corpus()) {
        auto t = synth_target(u, spec, world());
        aligns.push_back({u.utt_id, t.phonemes, t.durations, t.templates, t.corrupted_position});
        by_split[u.split].push_back(t.features);
        out.features[u.utt_id] = std::move(t.features);
        out.alignments[u.utt_id] = aligns.back();
      }
      for (Split s : {Split::kTrain, Split::kDev, Split::kTest})
        write_file_atomic(dir / (std::string(to_string(s)) + ".feats"), features_to_bytes(by_split[s], cfg_.world.feature_dim));
      write_file_atomic(dir / "alignment.jsonl", alignments_to_jsonl(aligns));
      note("synth", sys + " -> " + dir.string());
      return out;
    });
    return synth_.emplace(sys, std::move(result)).first->second;
  }

  std::vector<std::string> system_ids() const {
    std::vector<std::string> out;
    for (const auto& s : cfg_.systems) out.push_back(s.system_id);
    return out;
  }

  std::string codebook_hash() const {
    std::string h = world_hash() + "|" + json(cfg_.unitizer).dump();
    for (const auto& s : system_ids()) h += "|" + system_hash(s);
    return content_hash(h);
  }

  fs::path codebook_path() const { return store_ / "codebook" / codebook_hash() / "codebook.txt"; }

  const Codebook& codebook() {
    if (codebook_) return *codebook_;
    codebook_ = in_stage("unitize", [&] {
      const fs::path p = codebook_path();
      if (fs::exists(p)) return codebook_from_text(read_file(p));
      std::vector<const FeatureSequence*> pool;
      Eigen::Index rows = 0;
      for (const auto& sys : system_ids()) {
        const auto& syn = synthesis(sys);
        for (const auto& utt : utt_ids(Split::kTrain)) {
          pool.push_back(&syn.features.at(utt));
          rows += pool.back()->frame_count();
        }
      }
      FrameMatrix all(rows, cfg_.world.feature_dim);
      Eigen::Index r = 0;
      for (const auto* f : pool) {
        all.middleRows(r, f->frame_count()) = f->frames;
        r += f->frame_count();
      }
      const Eigen::Index take = std::min<Eigen::Index>(rows, cfg_.unitizer.max_fit_frames);
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows));
      for (Eigen::Index i = 0; i < rows; ++i) idx[static_cast<std::size_t>(i)] = i;
      Rng rng(derive_seed(cfg_.unitizer.seed, "fit-sample"));
      shuffle(idx, rng);
      idx.resize(static_cast<std::size_t>(take));
      std::sort(idx.begin(), idx.end());
      FrameMatrix sample(take, cfg_.world.feature_dim);
      for (Eigen::Index i = 0; i < take; ++i) sample.row(i) = all.row(idx[static_cast<std::size_t>(i)]);
      Codebook cb = fit_kmeans(sample, cfg_.unitizer.k, cfg_.unitizer.seed, cfg_.unitizer.max_iters, 1e-6, cfg_.unitizer.n_init);
      write_file_atomic(p, codebook_to_text(cb));
      note("unitize", "codebook k=" + std::to_string(cb.k()) + " inertia=" + format_double(cb.inertia, 3) + " -> " + p.string());
      return codebook_from_text(read_file(p));
    });
    return *codebook_;
  }

  std::string units_hash(const std::string& sys) const { return content_hash(codebook_hash() + "|" + system_hash(sys)); }
  fs::path units_path(const std::string& sys) const { return store_ / "units" / sys / units_hash(sys) / "units.jsonl"; }

  const std::map<std::string, ReducedUnits>& units(const std::string& sys) {
    if (const auto it = units_.find(sys); it != units_.end()) return it->second;
    auto result = in_stage("unitize", [&] {
      const fs::path p = units_path(sys);
      if (fs::exists(p)) return units_from_jsonl(read_file(p));
      std::map<std::string, ReducedUnits> out;
      for (const auto& [utt, f] : synthesis(sys).features) out[utt] = reduce_units(encode_units(f, codebook()));
      write_file_atomic(p, units_to_jsonl(sys, out));
      note("unitize", sys + " -> " + p.string());
      return out;
    });
    return units_.emplace(sys, std::move(result)).first->second;
  }

  UnitCorpora unit_corpora(const std::vector<std::string>& systems) {
    UnitCorpora out;
    for (const auto& s : systems) out[s] = units(s);
    return out;
  }

  /// The recogniser is pooled over the train split of every system.
  const ToyAsr& asr() {
    if (asr_) return *asr_;
    asr_ = in_stage("prep-targets", [&] {
      std::vector<AsrTrainingPair> pairs;
      for (const auto& sys : system_ids()) {
        const auto& u = units(sys);
        const auto& syn = synthesis(sys);
        for (const auto& utt : utt_ids(Split::kTrain))
          pairs.push_back({u.at(utt), references().at(utt), syn.alignments.at(utt).durations});
      }
      return build_toy_asr(world(), pairs, cfg_.asr);
    });
    return *asr_;
  }

  std::string targets_hash() const {
    std::string h = codebook_hash() + "|" + json(cfg_.asr).dump();
    for (const auto& s : system_ids()) h += "|" + units_hash(s);
    return content_hash(h);
  }
  fs::path targets_dir() const { return store_ / "targets" / targets_hash(); }

  /// Sentence CER of every system's synthesized units on the splits used in
  /// training (train and dev).
  const CerTable& cer_table() {
    if (cer_) return *cer_;
    cer_ = in_stage("prep-targets", [&] {
      const fs::path p = targets_dir() / "cer.csv";
      if (fs::exists(p)) return cer_table_from_csv(read_file(p));
      std::map<std::string, std::string> refs;
      for (Split s : {Split::kTrain, Split::kDev})
        for (const auto& utt : utt_ids(s)) refs[utt] = references().at(utt);
      CerTable t = compute_cer_table(asr(), unit_corpora(system_ids()), refs);
      write_file_atomic(p, cer_table_to_csv(t));
      note("prep-targets", "CER table -> " + p.string());
      return cer_table_from_csv(read_file(p));
    });
    return *cer_;
  }

  /// Y/N tokens among the systems of one cell.
  PerUttSystem<QualityToken> quality_tokens(const CellSpec& cell) {
    return in_stage("prep-targets", [&] {
      CerTable sub;
      for (const auto& [utt, row] : cer_table().rows)
        for (const auto& s : cell.systems) sub.rows[utt][s] = row.at(s);
      auto tokens = assign_quality_tokens(sub);
      const fs::path p = targets_dir() / ("tokens-" + cell.id + ".jsonl");
      if (!fs::exists(p)) write_file_atomic(p, tokens_to_jsonl(tokens));
      return tokens;
    });
  }

  /// Mean ASR CER of each system's own synthesized units on a split.
  double system_cer(const std::string& sys, Split split) {
    return in_stage("evaluate", [&] {
      double t = 0;
      const auto ids = utt_ids(split);
      for (const auto& utt : ids) t += cer(asr_decode(asr(), units(sys).at(utt)), references().at(utt));
      return t / static_cast<double>(ids.size());
    });
  }

  TrainingSet dataset(const CellSpec& cell, Split split) {
    return in_stage("prep-targets", [&] {
      std::optional<PerUttSystem<QualityToken>> tokens;
      if (cell.mode == DatasetMode::kMultitask) tokens = quality_tokens(cell);
      return build_dataset(cell.mode, cell.systems, utt_ids(split), sources(), unit_corpora(cell.systems),
                           tokens ? &*tokens : nullptr);
    });
  }

  std::string model_hash(const CellSpec& cell, std::uint64_t seed) const {
    TrainConfig tc = cfg_.train;
    tc.seed = seed;
    return content_hash(targets_hash() + "|" + std::string(to_string(cell.mode)) + "|" + json(cell.systems).dump() + "|" +
                        json(cfg_.model_for(cell)).dump() + "|" + json(tc).dump() + "|" + json(cfg_.world).dump());
  }

  fs::path model_dir(const CellSpec& cell, std::uint64_t seed) const {
    return store_ / "models" / (cell.id + "-s" + std::to_string(seed)) / model_hash(cell, seed);
  }

  Checkpoint checkpoint(const CellSpec& cell, std::uint64_t seed) {
    return in_stage("train", [&] {
      const fs::path dir = model_dir(cell, seed);
      if (fs::exists(dir / "model.ckpt")) return load_checkpoint(dir / "model.ckpt");
      const TrainingSet train_set = dataset(cell, Split::kTrain);
      const TrainingSet dev_set = dataset(cell, Split::kDev);
      TrainConfig tc = cfg_.train;
      tc.seed = seed;
      std::ostringstream log;
      TrainHooks hooks{&log, &dev_set};
      note("train", cell.id + " seed " + std::to_string(seed) + ": " + std::to_string(train_set.examples.size()) + " examples");
      Checkpoint ck = train(init_model(cfg_.model_for(cell), seed), train_set, tc, hooks);
      fs::create_directories(dir);
      write_file_atomic(dir / "train_log.jsonl", log.str());
      std::ostringstream bytes;
      write_checkpoint(bytes, ck);
      write_file_atomic(dir / "model.ckpt", bytes.str());
      note("train", cell.id + " seed " + std::to_string(seed) + ": best dev loss " + format_double(ck.dev_loss, 4) + " at step " +
                        std::to_string(ck.step));
      return load_checkpoint(dir / "model.ckpt");
    });
  }

  std::string decode_hash(const CellSpec& cell, std::uint64_t seed) const {
    return content_hash(model_hash(cell, seed) + "|" + json(cfg_.decode).dump());
  }

  fs::path decode_dir(const CellSpec& cell, std::uint64_t seed) const {
    return store_ / "decodes" / (cell.id + "-s" + std::to_string(seed)) / decode_hash(cell, seed);
  }

  /// Test-split decodes: "selected" (translate) plus, for multi-task cells,
  /// one file per branch with Y forced.
  std::map<std::string, std::vector<DecodeRecord>> decodes(const CellSpec& cell, std::uint64_t seed) {
    return in_stage("translate", [&] {
      const fs::path dir = decode_dir(cell, seed);
      std::vector<std::string> names{"selected"};
      if (cell.mode == DatasetMode::kMultitask)
        for (const auto& s : cell.systems) names.push_back("branch-" + s);
      std::map<std::string, std::vector<DecodeRecord>> out;
      if (std::all_of(names.begin(), names.end(), [&](const std::string& n) { return fs::exists(dir / (n + ".jsonl")); })) {
        for (const auto& n : names) out[n] = decodes_from_jsonl(read_file(dir / (n + ".jsonl")));
        return out;
      }
      const Checkpoint ck = checkpoint(cell, seed);
      const auto& model = ck.model;
      auto branch_name = [&](int b) { return cell.mode == DatasetMode::kMultitask ? cell.systems[static_cast<std::size_t>(b)] : cell.id; };
      auto record = [&](const std::string& utt, const Hypothesis& h) {
        DecodeRecord r;
        r.utt_id = utt;
        r.branch = h.branch;
        r.branch_id = branch_name(h.branch);
        for (std::size_t b = 0; b < h.p_yes.size(); ++b) r.p_yes[branch_name(static_cast<int>(b))] = h.p_yes[b];
        r.units = h.units();
        r.score = h.score;
        r.truncated = h.truncated;
        r.hyp_text = asr_decode(asr(), std::span<const int>(r.units));
        r.ref_text = references().at(utt);
        return r;
      };
      for (const auto& utt : utt_ids(Split::kTest)) {
        const Matrix& src = sources().at(utt)->frames;
        out["selected"].push_back(record(utt, translate(model, src, cfg_.decode)));
        if (cell.mode == DatasetMode::kMultitask) {
          const Matrix memory = encode_source(model, src);
          const int forced[] = {tokens::kYes};
          for (int b = 0; b < model.config().branch_count; ++b) {
            Hypothesis h = beam_search(BranchScorer(model, memory, b), cfg_.decode, forced);
            h.branch = b;
            out["branch-" + branch_name(b)].push_back(record(utt, h));
          }
        }
      }
      for (const auto& [n, rows] : out) write_file_atomic(dir / (n + ".jsonl"), decodes_to_jsonl(rows));
      note("translate", cell.id + " seed " + std::to_string(seed) + " -> " + dir.string());
      return out;
    });
  }

  static double bleu_of(const std::vector<DecodeRecord>& rows) {
    std::vector<std::vector<std::string>> hyps, refs;
    for (const auto& r : rows) {
      hyps.push_back(normalize_text(r.hyp_text));
      refs.push_back(normalize_text(r.ref_text));
    }
    return corpus_bleu(hyps, refs);
  }

  static double cer_of(const std::vector<DecodeRecord>& rows) {
    double t = 0;
    for (const auto& r : rows) t += cer(r.hyp_text, r.ref_text);
    return rows.empty() ? 0.0 : t / static_cast<double>(rows.size());
  }

  SeedResult evaluate(const CellSpec& cell, std::uint64_t seed) {
    return in_stage("evaluate", [&] {
      const fs::path p = decode_dir(cell, seed) / "eval.json";
      if (fs::exists(p)) return seed_result_from_json(json::parse(read_file(p)));
      const auto d = decodes(cell, seed);
      SeedResult r;
      r.seed = seed;
      const auto& sel = d.at("selected");
      r.bleu = bleu_of(sel);
      r.cer = cer_of(sel);
      if (cell.mode == DatasetMode::kMultitask) {
        for (const auto& s : cell.systems) {
          r.branch_bleu[s] = bleu_of(d.at("branch-" + s));
          r.selections[s] = 0;
        }
        for (const auto& row : sel) {
          ++r.selections[row.branch_id];
          // Ties resolve to the lowest branch index, i.e. the first system of the cell.
          std::string argmax = cell.systems.front();
          double top = row.p_yes.at(argmax);
          for (const auto& s : cell.systems) {
            if (row.p_yes.at(s) > top) {
              top = row.p_yes.at(s);
              argmax = s;
            }
          }
          if (argmax != row.branch_id) r.selection_consistent = false;
        }
      }
      write_file_atomic(p, seed_result_to_json(r).dump(2) + "\n");
      note("evaluate", cell.id + " seed " + std::to_string(seed) + ": BLEU " + format_double(r.bleu, 2));
      return r;
    });
  }

  EvalReport report(const CellSpec& cell) {
    EvalReport rep{cell.id, cell.mode, cell.systems, {}};
    for (auto seed : cell.seeds) rep.seeds.push_back(evaluate(cell, seed));
    return rep;
  }

  /// Reports of cells already evaluated in the store; others are skipped.
  std::vector<EvalReport> cached_reports() {
    std::vector<EvalReport> out;
    for (const auto& cell : cfg_.cells) {
      EvalReport rep{cell.id, cell.mode, cell.systems, {}};
      bool complete = true;
      for (auto seed : cell.seeds) {
        const fs::path p = decode_dir(cell, seed) / "eval.json";
        if (!fs::exists(p)) {
          complete = false;
          break;
        }
        rep.seeds.push_back(seed_result_from_json(json::parse(read_file(p))));
      }
      if (complete) out.push_back(std::move(rep));
      else note("report", "cell " + cell.id + " has not been evaluated; skipped");
    }
    return out;
  }

  std::vector<EvalReport> run() {
    std::vector<EvalReport> out;
    for (const auto& cell : cfg_.cells) out.push_back(report(cell));
    return out;
  }

  /// Pearson correlation of dev-split unit distributions between systems.
  CorrelationMatrix correlation(std::vector<std::string> systems = {}) {
    return in_stage("analyze-correlation", [&] {
      if (systems.empty()) systems = system_ids();
      if (systems.size() < 2) throw DataError("correlation needs at least two systems");
      std::vector<UnitDistribution> dists;
      const auto dev = utt_ids(Split::kDev);
      for (const auto& s : systems) {
        std::vector<std::vector<int>> seqs;
        const auto& u = units(s);
        for (const auto& utt : dev) {
          const auto it = u.find(utt);
          if (it == u.end()) throw DataError("no dev units for " + s + "/" + utt);
          seqs.push_back(it->second.units);
        }
        dists.push_back(unit_distribution(seqs, cfg_.unitizer.k));
      }
      return correlation_matrix(systems, dists);
    });
  }

 private:
  void note(const std::string& stage, const std::string& msg) {
    if (log_) *log_ << "[" << stage << "] " << msg << '\n' << std::flush;
  }

  ExperimentConfig cfg_;
  fs::path store_;
  std::ostream* log_;
  std::optional<World> world_;
  std::optional<std::vector<ParallelUtterance>> corpus_;
  std::map<std::string, std::string> refs_;
  std::map<std::string, std::shared_ptr<const FeatureSequence>> sources_;
  std::map<std::string, SystemSynthesis> synth_;
  std::optional<Codebook> codebook_;
  std::map<std::string, std::map<std::string, ReducedUnits>> units_;
  std::optional<ToyAsr> asr_;
  std::optional<CerTable> cer_;
};

inline std::vector<EvalReport> run_pipeline(const ExperimentConfig& cfg, const fs::path& store, std::ostream* log = nullptr) {
  Pipeline p(cfg, store, log);
  return p.run();
}

}  // namespace s2ut
