// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

#include "s2ut/io.hpp"

#include <gtest/gtest.h>

#include <limits>

namespace s2ut {
namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("s2ut_io_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Files, AtomicWriteCreatesParentsAndLeavesNoTemp) {
  const fs::path dir = scratch("atomic");
  const fs::path f = dir / "a" / "b.txt";
  write_file_atomic(f, std::string("x\0y", 3));
  EXPECT_EQ(read_file(f), std::string("x\0y", 3));
  write_file_atomic(f, "second");
  EXPECT_EQ(read_file(f), "second");
  EXPECT_FALSE(fs::exists(f.string() + ".tmp"));
  EXPECT_THROW(read_file(dir / "missing"), DataError);
  fs::remove_all(dir);
}

TEST(Jsonl, VersionRequired) {
  EXPECT_NO_THROW(parse_jsonl("{\"format_version\":1}\n\n", "x"));
  EXPECT_THROW(parse_jsonl("{\"a\":1}\n", "x"), DataError);
  EXPECT_THROW(parse_jsonl("{\"format_version\":2}\n", "x"), DataError);
  EXPECT_THROW(parse_jsonl("[1]\n", "x"), DataError);
  EXPECT_THROW(parse_jsonl("{not json\n", "x"), DataError);
}

TEST(Corpus, RoundTrip) {
  std::vector<ParallelUtterance> c{{"u1", {3, 1, 4}, "ka to", Split::kTrain}, {"u2", {}, "", Split::kTest}, {"u3", {9}, "ri", Split::kDev}};
  EXPECT_EQ(corpus_from_jsonl(corpus_to_jsonl(c)), c);
  EXPECT_THROW(corpus_from_jsonl("{\"format_version\":1,\"utt_id\":\"u\"}\n"), DataError);
  EXPECT_THROW(corpus_from_jsonl("{\"format_version\":1,\"utt_id\":\"u\",\"split\":\"bogus\",\"source_text\":[],\"target_text\":\"\"}\n"),
               DataError);
}

TEST(Features, RoundTripIsBitExact) {
  Rng r(1);
  std::vector<FeatureSequence> seqs(3);
  for (int i = 0; i < 3; ++i) {
    seqs[static_cast<std::size_t>(i)].utt_id = "u" + std::to_string(i);
    seqs[static_cast<std::size_t>(i)].system_id = "A";
    seqs[static_cast<std::size_t>(i)].frames.resize(i * 2, 4);
    for (Eigen::Index k = 0; k < seqs[static_cast<std::size_t>(i)].frames.size(); ++k) seqs[static_cast<std::size_t>(i)].frames.data()[k] = r.normal();
  }
  seqs[2].frames(0, 0) = std::numeric_limits<double>::denorm_min();
  const auto back = features_from_bytes(features_to_bytes(seqs, 4));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].utt_id, seqs[i].utt_id);
    EXPECT_EQ(back[i].system_id, "A");
    EXPECT_TRUE(back[i].frames == seqs[i].frames);
  }
}

TEST(Features, CorruptInputRejected) {
  FeatureSequence s;
  s.utt_id = "u";
  s.frames = FrameMatrix::Ones(3, 2);
  const std::string bytes = features_to_bytes({s}, 2);
  EXPECT_THROW(features_to_bytes({s}, 3), DataError);
  EXPECT_THROW(features_from_bytes("short"), DataError);
  EXPECT_THROW(features_from_bytes("XXXXXXXX" + bytes.substr(8)), DataError);
  EXPECT_THROW(features_from_bytes(bytes.substr(0, bytes.size() - 1)), DataError);
  std::string v2 = bytes;
  const auto pos = v2.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  v2[pos + 17] = '2';
  EXPECT_THROW(features_from_bytes(v2), DataError);
}

TEST(Alignments, RoundTrip) {
  std::vector<Alignment> rows{{"u1", {1, 2}, {3, 4}, {0, 1}, -1}, {"u2", {5}, {2}, {2}, 0}};
  const auto back = alignments_from_jsonl(alignments_to_jsonl(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].utt_id, "u2");
  EXPECT_EQ(back[0].durations, (std::vector<int>{3, 4}));
  EXPECT_EQ(back[1].corrupted_position, 0);
}

TEST(Codebook, RoundTripIsBitExact) {
  Codebook cb;
  cb.centroids.resize(3, 2);
  cb.centroids << 0.1, -1.0 / 3.0, 1e-300, 2.5, -7.0, 1.0 / 7.0;
  cb.fit_seed = 0xfedcba9876543210ULL;
  cb.inertia = 12.345678901234567;
  const auto back = codebook_from_text(codebook_to_text(cb));
  EXPECT_TRUE(back.centroids == cb.centroids);
  EXPECT_EQ(back.fit_seed, cb.fit_seed);
  EXPECT_EQ(back.inertia, cb.inertia);
  EXPECT_THROW(codebook_from_text("s2ut-codebook 2\n1 1 0 0\n0\n"), DataError);
  EXPECT_THROW(codebook_from_text("s2ut-codebook 1\n2 1 0 0\n0\n"), DataError);
  EXPECT_THROW(codebook_from_text("hello"), DataError);
}

TEST(Units, RoundTrip) {
  std::map<std::string, ReducedUnits> u{{"a", {{1, 2, 1}, {2, 3, 1}}}, {"b", {{}, {}}}};
  EXPECT_EQ(units_from_jsonl(units_to_jsonl("S", u)), u);
}

TEST(CerTable, RoundTripIsBitExact) {
  CerTable t;
  t.rows["u1"]["A"] = 0.0123456789012345678;
  t.rows["u1"]["B"] = 1.0 / 3.0;
  t.rows["u2"]["A"] = 0.0;
  t.rows["u2"]["B"] = 1.5;
  EXPECT_EQ(cer_table_from_csv(cer_table_to_csv(t)).rows, t.rows);
  EXPECT_THROW(cer_table_from_csv("bad header\n"), DataError);
  EXPECT_THROW(cer_table_from_csv("utt_id,system_id,cer\nu1,A\n"), DataError);
  EXPECT_THROW(cer_table_from_csv("utt_id,system_id,cer\nu1,A,0.1\nu1,A,0.2\n"), DataError);
}

TEST(QualityTokens, RoundTrip) {
  PerUttSystem<QualityToken> t;
  t["u1"]["A"] = QualityToken::kYes;
  t["u1"]["B"] = QualityToken::kNo;
  t["u2"]["A"] = QualityToken::kYes;
  EXPECT_EQ(tokens_from_jsonl(tokens_to_jsonl(t)), t);
  EXPECT_THROW(tokens_from_jsonl("{\"format_version\":1,\"utt_id\":\"u\",\"system_id\":\"A\",\"token\":\"Q\"}\n"), DataError);
}

TEST(Correlation, CsvLayout) {
  CorrelationMatrix m{{"A", "B"}, {{1.0, 0.5}, {0.5, 1.0}}};
  EXPECT_EQ(correlation_to_csv(m), "system_id,A,B\nA,1.000000,0.500000\nB,0.500000,1.000000\n");
}

TEST(Format, Doubles) {
  EXPECT_EQ(format_double(1.0 / 3.0, 3), "0.333");
  EXPECT_EQ(exact_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::strtod(exact_double(1.0 / 3.0).c_str(), nullptr), 1.0 / 3.0);
}

}  // namespace
}  // namespace s2ut
