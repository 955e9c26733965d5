// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk formats. Every record format carries a format_version field.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2ut/common.hpp"
#include "s2ut/metrics.hpp"
#include "s2ut/synthworld.hpp"
#include "s2ut/targetprep.hpp"
#include "s2ut/unitizer.hpp"

namespace s2ut {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kFormatVersion = 1;

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// Writes through a temporary file and a rename, so readers never see a
/// partially written artifact.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::vector<json> parse_jsonl(const std::string& text, const std::string& what) {
  std::vector<json> out;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(what + " line " + std::to_string(n) + ": " + e.what());
    }
    const auto& r = out.back();
    if (!r.is_object() || r.value("format_version", 0) != kFormatVersion)
      throw DataError(what + " line " + std::to_string(n) + ": missing or unsupported format_version");
  }
  return out;
}

template <typename F>
auto checked(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(what + ": " + e.what());
  }
}

// Corpus: one utterance per line.
inline std::string corpus_to_jsonl(const std::vector<ParallelUtterance>& corpus) {
  std::string out;
  for (const auto& u : corpus)
    out += json{{"format_version", kFormatVersion}, {"utt_id", u.utt_id}, {"split", to_string(u.split)},
                {"source_text", u.source_text}, {"target_text", u.target_text}}
               .dump() +
           '\n';
  return out;
}

inline std::vector<ParallelUtterance> corpus_from_jsonl(const std::string& text) {
  std::vector<ParallelUtterance> out;
  for (const auto& r : parse_jsonl(text, "corpus")) {
    out.push_back(checked("corpus record", [&] {
      ParallelUtterance u;
      u.utt_id = r.at("utt_id").get<std::string>();
      u.split = split_from_string(r.at("split").get<std::string>());
      u.source_text = r.at("source_text").get<std::vector<int>>();
      u.target_text = r.at("target_text").get<std::string>();
      return u;
    }));
  }
  return out;
}

// Feature container: magic, version, JSON header length, JSON header, doubles.
inline constexpr char kFeatureMagic[8] = {'S', '2', 'U', 'T', 'F', 'E', 'A', 'T'};

inline std::string features_to_bytes(const std::vector<FeatureSequence>& seqs, int dim) {
  json utts = json::array();
  for (const auto& s : seqs) {
    if (s.dim() != dim) throw DataError("feature dimension mismatch in " + s.utt_id);
    utts.push_back({{"utt_id", s.utt_id}, {"system_id", s.system_id}, {"frames", s.frame_count()}});
  }
  const std::string h = json{{"format_version", kFormatVersion}, {"dim", dim}, {"utterances", utts}}.dump();
  std::string out(kFeatureMagic, sizeof kFeatureMagic);
  const std::uint64_t len = h.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += h;
  for (const auto& s : seqs)
    out.append(reinterpret_cast<const char*>(s.frames.data()), static_cast<std::size_t>(s.frames.size()) * sizeof(double));
  return out;
}

inline std::vector<FeatureSequence> features_from_bytes(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFeatureMagic, 8) != 0) throw DataError("not a feature file");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (16 + len > bytes.size()) throw DataError("truncated feature header");
  const json h = checked("feature header", [&] { return json::parse(bytes.substr(16, len)); });
  if (h.value("format_version", 0) != kFormatVersion) throw DataError("unsupported feature format_version");
  const int dim = h.at("dim").get<int>();
  std::size_t pos = 16 + len;
  std::vector<FeatureSequence> out;
  for (const auto& u : h.at("utterances")) {
    FeatureSequence s;
    s.utt_id = u.at("utt_id").get<std::string>();
    s.system_id = u.at("system_id").get<std::string>();
    const int rows = u.at("frames").get<int>();
    const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(dim) * sizeof(double);
    if (pos + n > bytes.size()) throw DataError("truncated feature data for " + s.utt_id);
    s.frames.resize(rows, dim);
    std::memcpy(s.frames.data(), bytes.data() + pos, n);
    pos += n;
    out.push_back(std::move(s));
  }
  return out;
}

/// Generative alignment of one synthesized utterance.
struct Alignment {
  std::string utt_id;
  std::vector<int> phonemes;
  std::vector<int> durations;
  std::vector<int> templates;
  int corrupted_position = -1;
};

inline std::string alignments_to_jsonl(const std::vector<Alignment>& rows) {
  std::string out;
  for (const auto& a : rows)
    out += json{{"format_version", kFormatVersion}, {"utt_id", a.utt_id}, {"phonemes", a.phonemes}, {"durations", a.durations},
                {"templates", a.templates}, {"corrupted_position", a.corrupted_position}}
               .dump() +
           '\n';
  return out;
}

inline std::vector<Alignment> alignments_from_jsonl(const std::string& text) {
  std::vector<Alignment> out;
  for (const auto& r : parse_jsonl(text, "alignment")) {
    out.push_back(checked("alignment record", [&] {
      return Alignment{r.at("utt_id").get<std::string>(), r.at("phonemes").get<std::vector<int>>(),
                       r.at("durations").get<std::vector<int>>(), r.at("templates").get<std::vector<int>>(),
                       r.at("corrupted_position").get<int>()};
    }));
  }
  return out;
}

// Codebook: a small text format with exact (%.17g) values.
inline std::string codebook_to_text(const Codebook& cb) {
  std::string out = "s2ut-codebook " + std::to_string(kFormatVersion) + "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d %d %llu %.17g\n", cb.k(), cb.dim(), static_cast<unsigned long long>(cb.fit_seed), cb.inertia);
  out += buf;
  for (Eigen::Index i = 0; i < cb.centroids.rows(); ++i) {
    for (Eigen::Index j = 0; j < cb.centroids.cols(); ++j) {
      std::snprintf(buf, sizeof buf, j ? " %.17g" : "%.17g", cb.centroids(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline Codebook codebook_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  int version = 0, k = 0, dim = 0;
  unsigned long long seed = 0;
  Codebook cb;
  std::string inertia;
  if (!(is >> magic >> version) || magic != "s2ut-codebook" || version != kFormatVersion) throw DataError("not a codebook file");
  if (!(is >> k >> dim >> seed >> inertia) || k < 1 || dim < 1) throw DataError("corrupt codebook header");
  cb.fit_seed = seed;
  cb.inertia = std::strtod(inertia.c_str(), nullptr);
  cb.centroids.resize(k, dim);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < dim; ++j) {
      std::string v;
      if (!(is >> v)) throw DataError("truncated codebook");
      cb.centroids(i, j) = std::strtod(v.c_str(), nullptr);
    }
  return cb;
}

// Reduced units of one system, one line per utterance.
inline std::string units_to_jsonl(const std::string& system_id, const std::map<std::string, ReducedUnits>& units) {
  std::string out;
  for (const auto& [utt, r] : units)
    out += json{{"format_version", kFormatVersion}, {"utt_id", utt}, {"system_id", system_id}, {"units", r.units}, {"durations", r.durations}}
               .dump() +
           '\n';
  return out;
}

inline std::map<std::string, ReducedUnits> units_from_jsonl(const std::string& text) {
  std::map<std::string, ReducedUnits> out;
  for (const auto& r : parse_jsonl(text, "units")) {
    checked("units record", [&] {
      out[r.at("utt_id").get<std::string>()] = {r.at("units").get<std::vector<int>>(), r.at("durations").get<std::vector<int>>()};
      return 0;
    });
  }
  return out;
}

inline std::string format_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

/// Shortest form that reads back bit-identically.
inline std::string exact_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string cer_table_to_csv(const CerTable& t) {
  std::string out = "utt_id,system_id,cer\n";
  for (const auto& [utt, row] : t.rows)
    for (const auto& [sys, c] : row) out += utt + "," + sys + "," + exact_double(c) + "\n";
  return out;
}

inline CerTable cer_table_from_csv(const std::string& text) {
  CerTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "utt_id,system_id,cer") throw DataError("not a CER table");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw DataError("malformed CER row '" + line + "'");
    auto& row = t.rows[line.substr(0, a)];
    const auto sys = line.substr(a + 1, b - a - 1);
    if (row.contains(sys)) throw DataError("duplicate CER row for " + line.substr(0, a) + "/" + sys);
    row[sys] = std::strtod(line.c_str() + b + 1, nullptr);
  }
  return t;
}

inline std::string tokens_to_jsonl(const PerUttSystem<QualityToken>& tokens) {
  std::string out;
  for (const auto& [utt, row] : tokens)
    for (const auto& [sys, tok] : row)
      out += json{{"format_version", kFormatVersion}, {"utt_id", utt}, {"system_id", sys}, {"token", std::string(1, to_char(tok))}}.dump() +
             '\n';
  return out;
}

inline PerUttSystem<QualityToken> tokens_from_jsonl(const std::string& text) {
  PerUttSystem<QualityToken> out;
  for (const auto& r : parse_jsonl(text, "tokens")) {
    checked("token record", [&] {
      const auto tok = r.at("token").get<std::string>();
      if (tok != "Y" && tok != "N") throw DataError("quality token must be Y or N, got '" + tok + "'");
      out[r.at("utt_id").get<std::string>()][r.at("system_id").get<std::string>()] = tok == "Y" ? QualityToken::kYes : QualityToken::kNo;
      return 0;
    });
  }
  return out;
}

inline std::string correlation_to_csv(const CorrelationMatrix& m) {
  std::string out = "system_id";
  for (const auto& l : m.labels) out += "," + l;
  out += '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += m.labels[i];
    for (double v : m.values[i]) out += "," + format_double(v, 6);
    out += '\n';
  }
  return out;
}

}  // namespace s2ut
