// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

#include "s2ut/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

#include "s2ut/report.hpp"
#include "tiny_experiment.hpp"

namespace s2ut {
namespace {

using testing::ScratchDir;
using testing::snapshot;
using testing::tiny_experiment;

// One full tiny run shared by the tests that only read from it.
class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new ScratchDir("experiment_shared");
    Pipeline p(tiny_experiment(), dir_->path());
    reports_ = new std::vector<EvalReport>(p.run());
  }
  static void TearDownTestSuite() {
    delete reports_;
    delete dir_;
  }
  static ScratchDir* dir_;
  static std::vector<EvalReport>* reports_;
};
ScratchDir* TinyRun::dir_ = nullptr;
std::vector<EvalReport>* TinyRun::reports_ = nullptr;

TEST_F(TinyRun, StoreLayout) {
  const auto cfg = tiny_experiment();
  Pipeline p(cfg, dir_->path());
  EXPECT_TRUE(fs::exists(p.corpus_path()));
  for (const auto& s : p.system_ids()) {
    EXPECT_TRUE(fs::exists(p.features_dir(s) / "train.feats")) << s;
    EXPECT_TRUE(fs::exists(p.units_path(s))) << s;
  }
  EXPECT_TRUE(fs::exists(p.codebook_path()));
  EXPECT_TRUE(fs::exists(p.targets_dir() / "cer.csv"));
  for (const auto& c : cfg.cells) {
    EXPECT_TRUE(fs::exists(p.model_dir(c, 1) / "model.ckpt"));
    EXPECT_TRUE(fs::exists(p.model_dir(c, 1) / "train_log.jsonl"));
    EXPECT_TRUE(fs::exists(p.decode_dir(c, 1) / "selected.jsonl"));
    EXPECT_TRUE(fs::exists(p.decode_dir(c, 1) / "eval.json"));
  }
  for (const char* s : {"B", "E", "G"}) EXPECT_TRUE(fs::exists(p.decode_dir(cfg.cell("multitask-BEG"), 1) / ("branch-" + std::string(s) + ".jsonl")));
}

TEST_F(TinyRun, ReportShape) {
  ASSERT_EQ(reports_->size(), 2u);
  const auto& single = (*reports_)[0];
  const auto& multi = (*reports_)[1];
  EXPECT_EQ(single.cell_id, "single-G");
  ASSERT_EQ(single.seeds.size(), 1u);
  EXPECT_TRUE(single.seeds[0].branch_bleu.empty());
  ASSERT_EQ(multi.seeds.size(), 1u);
  const auto& s = multi.seeds[0];
  EXPECT_EQ(s.branch_bleu.size(), 3u);
  EXPECT_TRUE(s.selection_consistent);
  int selected = 0;
  for (const auto& [sys, n] : s.selections) selected += n;
  EXPECT_EQ(selected, 8);
  for (const auto& r : *reports_) {
    EXPECT_GE(r.mean_bleu(), 0.0);
    EXPECT_LE(r.mean_bleu(), 100.0);
    EXPECT_GE(r.mean_cer(), 0.0);
  }
}

TEST_F(TinyRun, SelectedBranchIsArgmaxOfRecordedYesProbability) {
  const auto cfg = tiny_experiment();
  Pipeline p(cfg, dir_->path());
  const auto d = p.decodes(cfg.cell("multitask-BEG"), 1);
  for (const auto& row : d.at("selected")) {
    std::string best = "B";
    for (const char* sys : {"E", "G"})
      if (row.p_yes.at(sys) > row.p_yes.at(best)) best = sys;
    EXPECT_EQ(row.branch_id, best) << row.utt_id;
  }
}

TEST_F(TinyRun, RerunIsServedFromStoreUnchanged) {
  const auto before = snapshot(dir_->path());
  Pipeline p(tiny_experiment(), dir_->path());
  const auto again = p.run();
  EXPECT_EQ(snapshot(dir_->path()), before);
  ASSERT_EQ(again.size(), reports_->size());
  for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(again[i].seeds, (*reports_)[i].seeds);
}

TEST_F(TinyRun, CachedReportsMatchRun) {
  Pipeline p(tiny_experiment(), dir_->path());
  const auto cached = p.cached_reports();
  ASSERT_EQ(cached.size(), reports_->size());
  for (std::size_t i = 0; i < cached.size(); ++i) EXPECT_EQ(cached[i].seeds, (*reports_)[i].seeds);
}

TEST(Experiment, IndependentRunsAreByteIdentical) {
  ScratchDir a("experiment_a"), b("experiment_b");
  std::vector<std::string> wa, wb;
  Pipeline pa(tiny_experiment(), a.path());
  Pipeline pb(tiny_experiment(), b.path());
  const auto ra = render_reports(pa, pa.run(), &wa);
  const auto rb = render_reports(pb, pb.run(), &wb);
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(wa, wb);
  EXPECT_EQ(snapshot(a.path()), snapshot(b.path()));
}

TEST(Experiment, DeletedArtifactsAreRebuiltIdentically) {
  ScratchDir dir("experiment_rebuild");
  const auto cfg = tiny_experiment();
  {
    Pipeline p(cfg, dir.path());
    p.run();
  }
  const auto before = snapshot(dir.path());
  fs::remove_all(dir.path() / "models");
  fs::remove_all(dir.path() / "decodes");
  fs::remove_all(dir.path() / "units");
  {
    Pipeline p(cfg, dir.path());
    p.run();
  }
  EXPECT_EQ(snapshot(dir.path()), before);
}

TEST(Experiment, SingleCellTrainsOneModel) {
  ScratchDir dir("experiment_single");
  auto cfg = tiny_experiment();
  cfg.cells = {{"single-G", DatasetMode::kSingle, {"G"}, {1}}};
  Pipeline p(cfg, dir.path());
  p.report(cfg.cells[0]);
  std::vector<fs::path> model_dirs;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "models"))
    if (e.is_regular_file() && e.path().filename() == "model.ckpt") model_dirs.push_back(e.path().parent_path());
  ASSERT_EQ(model_dirs.size(), 1u);
  EXPECT_EQ(model_dirs[0], p.model_dir(cfg.cells[0], 1));
  // A single-system cell needs no quality tokens and no branch decodes.
  EXPECT_FALSE(fs::exists(p.decode_dir(cfg.cells[0], 1) / "branch-G.jsonl"));
}

TEST(Experiment, HashesTrackTheirInputs) {
  const auto cfg = tiny_experiment();
  Pipeline p(cfg, "unused");
  auto changed = cfg;
  changed.train.max_steps = 31;
  Pipeline q(changed, "unused");
  const auto& cell = cfg.cell("single-G");
  EXPECT_EQ(p.codebook_hash(), q.codebook_hash());
  EXPECT_EQ(p.targets_hash(), q.targets_hash());
  EXPECT_NE(p.model_hash(cell, 1), q.model_hash(cell, 1));
  EXPECT_NE(p.model_hash(cell, 1), p.model_hash(cell, 2));
  auto decode = cfg;
  decode.decode.beam = 3;
  Pipeline r(decode, "unused");
  EXPECT_EQ(p.model_hash(cell, 1), r.model_hash(cell, 1));
  EXPECT_NE(p.decode_hash(cell, 1), r.decode_hash(cell, 1));
  auto sys = cfg;
  sys.systems[0].vocoder_noise_rate += 0.01;
  Pipeline s(sys, "unused");
  EXPECT_NE(p.system_hash("B"), s.system_hash("B"));
  EXPECT_EQ(p.system_hash("G"), s.system_hash("G"));
}

TEST(Experiment, ErrorsNameTheirStage) {
  ScratchDir dir("experiment_errors");
  const auto cfg = tiny_experiment();
  {
    Pipeline p(cfg, dir.path());
    write_file_atomic(p.corpus_path(), "garbage\n");
    try {
      p.corpus();
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(std::string(e.what()).rfind("[gen-data]", 0), 0u) << e.what();
      EXPECT_EQ(e.exit_code(), kExitData);
    }
    fs::remove(p.corpus_path());
  }
  {
    Pipeline p(cfg, dir.path());
    const auto& cell = cfg.cell("single-G");
    write_file_atomic(p.model_dir(cell, 1) / "model.ckpt", "not a checkpoint");
    try {
      p.checkpoint(cell, 1);
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(std::string(e.what()).rfind("[train]", 0), 0u) << e.what();
      EXPECT_EQ(e.exit_code(), kExitData);
    }
  }
  {
    auto bad = cfg;
    bad.cells[0].systems = {"Z"};
    EXPECT_THROW(Pipeline(bad, dir.path()), ConfigError);
  }
}

TEST(Experiment, StoreRootFromEnvironment) {
  ::setenv(kStoreEnv, "/tmp/somewhere", 1);
  EXPECT_EQ(default_store_root(), fs::path("/tmp/somewhere"));
  ::unsetenv(kStoreEnv);
  EXPECT_EQ(default_store_root(), fs::path("s2ut-store"));
}

TEST(Experiment, CorrelationNeedsTwoSystems) {
  ScratchDir dir("experiment_corr");
  Pipeline p(tiny_experiment(), dir.path());
  EXPECT_THROW(p.correlation({"B"}), Error);
  const auto m = p.correlation();
  ASSERT_EQ(m.labels.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(m.values[i][i], 1.0);
}

}  // namespace
}  // namespace s2ut
