// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// Result tables (Markdown and CSV) and small SVG plots.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2ut/config.hpp"
#include "s2ut/experiment.hpp"
#include "s2ut/io.hpp"
#include "s2ut/metrics.hpp"

namespace s2ut {

/// file name -> content
using ReportFiles = std::map<std::string, std::string>;

namespace detail {

inline std::string fixed(double v, int digits = 1) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  // Avoid "-0.0".
  if (std::string(buf).find_first_not_of("-0.") == std::string::npos) std::snprintf(buf, sizeof buf, "%.*f", digits, 0.0);
  return buf;
}

inline std::string signed_fixed(double v, int digits = 1) {
  const std::string s = fixed(v, digits);
  return s.empty() || s[0] == '-' || s == fixed(0.0, digits) ? s : "+" + s;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string markdown(const std::string& title) const {
    std::string out = "# " + title + "\n\n|";
    for (const auto& h : header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
    out += '\n';
    for (const auto& r : rows) {
      out += '|';
      for (const auto& c : r) out += " " + (c.empty() ? std::string("/") : c) + " |";
      out += '\n';
    }
    return out;
  }

  std::string csv() const {
    auto line = [](const std::vector<std::string>& cells) {
      std::string out;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      return out + '\n';
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
  }
};

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace detail

/// Heat map of a correlation matrix.
inline std::string correlation_svg(const CorrelationMatrix& m) {
  const int cell = 36, margin = 40;
  const int n = static_cast<int>(m.labels.size());
  const int size = margin + n * cell + 10;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) + "\" height=\"" +
                    std::to_string(size) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  double lo = 1.0;
  for (const auto& row : m.values)
    for (double v : row) lo = std::min(lo, v);
  for (int i = 0; i < n; ++i) {
    const std::string label = detail::svg_escape(m.labels[static_cast<std::size_t>(i)]);
    const int c = margin + i * cell + cell / 2;
    out += "<text x=\"" + std::to_string(c) + "\" y=\"" + std::to_string(margin - 6) + "\" text-anchor=\"middle\">" + label + "</text>\n";
    out += "<text x=\"" + std::to_string(margin - 6) + "\" y=\"" + std::to_string(c + 3) + "\" text-anchor=\"end\">" + label + "</text>\n";
    for (int j = 0; j < n; ++j) {
      const double v = m.values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const double t = lo < 1.0 ? (v - lo) / (1.0 - lo) : 1.0;
      const int shade = static_cast<int>(std::lround(255 - 200 * t));
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
      out += "<rect x=\"" + std::to_string(margin + j * cell) + "\" y=\"" + std::to_string(margin + i * cell) + "\" width=\"" +
             std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" + color + "\"/>\n";
      out += "<text x=\"" + std::to_string(margin + j * cell + cell / 2) + "\" y=\"" + std::to_string(margin + i * cell + cell / 2 + 3) +
             "\" text-anchor=\"middle\">" + detail::fixed(v, 2) + "</text>\n";
    }
  }
  return out + "</svg>\n";
}

/// Bar chart of mean BLEU per cell with one-standard-deviation whiskers.
inline std::string bleu_svg(const std::vector<EvalReport>& reports) {
  const int bar = 40, gap = 20, height = 220, margin = 30;
  const int width = margin * 2 + static_cast<int>(reports.size()) * (bar + gap);
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(std::max(width, 120)) + "\" height=\"" +
                    std::to_string(height + 60) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + std::to_string(height) + "\" x2=\"" + std::to_string(width - margin) +
         "\" y2=\"" + std::to_string(height) + "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double m = reports[i].mean_bleu(), s = reports[i].std_bleu();
    const int x = margin + static_cast<int>(i) * (bar + gap) + gap / 2;
    const int h = static_cast<int>(std::lround(std::clamp(m, 0.0, 100.0) * 2.0));
    out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(height - h) + "\" width=\"" + std::to_string(bar) +
           "\" height=\"" + std::to_string(h) + "\" fill=\"#6a8fd0\"/>\n";
    const int top = static_cast<int>(std::lround(std::clamp(m + s, 0.0, 100.0) * 2.0));
    const int bot = static_cast<int>(std::lround(std::clamp(m - s, 0.0, 100.0) * 2.0));
    out += "<line x1=\"" + std::to_string(x + bar / 2) + "\" y1=\"" + std::to_string(height - top) + "\" x2=\"" + std::to_string(x + bar / 2) +
           "\" y2=\"" + std::to_string(height - bot) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(height - h - 4) + "\" text-anchor=\"middle\">" +
           detail::fixed(m, 1) + "</text>\n";
    out += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(height + 14) +
           "\" text-anchor=\"middle\" transform=\"rotate(20 " + std::to_string(x + bar / 2) + " " + std::to_string(height + 14) + ")\">" +
           detail::svg_escape(reports[i].cell_id) + "</text>\n";
  }
  return out + "</svg>\n";
}

/// Renders the single-system, speed-factor, combination and branch tables.
/// `system_cer` holds test-split ASR CER fractions of each system's own
/// synthesized units. Missing baselines leave blank cells and add a warning.
inline ReportFiles report_tables(const ExperimentConfig& cfg, const std::vector<EvalReport>& reports,
                                 const std::map<std::string, double>& system_cer, const CorrelationMatrix* correlation,
                                 std::vector<std::string>* warnings = nullptr) {
  using detail::fixed;
  using detail::Table;
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };
  if (reports.empty()) warn("no evaluated cells; tables are empty");

  std::map<std::string, const EvalReport*> single;
  for (const auto& r : reports)
    if (r.mode == DatasetMode::kSingle) single[r.systems.front()] = &r;
  auto single_bleu = [&](const std::string& sys) -> std::string {
    const auto it = single.find(sys);
    return it == single.end() ? "" : fixed(it->second->mean_bleu());
  };
  auto cer_pct = [&](const std::string& sys) -> std::string {
    const auto it = system_cer.find(sys);
    return it == system_cer.end() ? "" : fixed(100.0 * it->second);
  };

  ReportFiles files;

  // Systems at the default speed, grouped by acoustic model, with per-family averages.
  Table t1{{"Data ID", "AM", "Vocoder", "CER", "BLEU"}, {}};
  std::vector<std::string> families;
  for (const auto& s : cfg.systems)
    if (std::find(families.begin(), families.end(), s.acoustic_model) == families.end()) families.push_back(s.acoustic_model);
  for (const auto& fam : families) {
    std::vector<const TtsSystemSpec*> members;
    for (const auto& s : cfg.systems)
      if (s.acoustic_model == fam && s.speed_factor == 1.0) members.push_back(&s);
    if (members.empty()) continue;
    double cer_sum = 0, bleu_sum = 0;
    int cer_n = 0, bleu_n = 0;
    for (const auto* s : members) {
      t1.rows.push_back({s->system_id, fam, s->vocoder_id, cer_pct(s->system_id), single_bleu(s->system_id)});
      if (system_cer.contains(s->system_id)) cer_sum += 100.0 * system_cer.at(s->system_id), ++cer_n;
      if (single.contains(s->system_id)) bleu_sum += single.at(s->system_id)->mean_bleu(), ++bleu_n;
    }
    if (members.size() > 1)
      t1.rows.push_back({"Avg.", fam, "", cer_n ? fixed(cer_sum / cer_n) : "", bleu_n == static_cast<int>(members.size()) ? fixed(bleu_sum / bleu_n) : ""});
  }
  files["table1_single_systems.md"] = t1.markdown("Single-system targets");
  files["table1_single_systems.csv"] = t1.csv();

  // Families rendered at more than one speed factor.
  Table t2{{"Data ID", "TTS", "Speed Factor", "CER", "BLEU"}, {}};
  for (const auto& fam : families) {
    std::map<std::string, std::vector<const TtsSystemSpec*>> by_voc;
    for (const auto& s : cfg.systems)
      if (s.acoustic_model == fam) by_voc[s.vocoder_id].push_back(&s);
    for (auto& [voc, members] : by_voc) {
      std::set<double> speeds;
      for (const auto* s : members) speeds.insert(s->speed_factor);
      if (speeds.size() < 2) continue;
      std::stable_sort(members.begin(), members.end(), [](const auto* a, const auto* b) { return a->speed_factor < b->speed_factor; });
      for (const auto* s : members)
        t2.rows.push_back({s->system_id, fam, fixed(s->speed_factor, 2), cer_pct(s->system_id), single_bleu(s->system_id)});
    }
  }
  files["table2_speed_factors.md"] = t2.markdown("Speed factors");
  files["table2_speed_factors.csv"] = t2.csv();

  // Multi-system cells next to the best single system.
  Table t3{{"Category", "Data", "Multi-task", "BLEU", "BLEU std", "CER"}, {}};
  const EvalReport* best_single = nullptr;
  for (const auto& [sys, r] : single)
    if (!best_single || r->mean_bleu() > best_single->mean_bleu()) best_single = r;
  if (best_single)
    t3.rows.push_back({"Best single system", best_single->systems.front(), "", fixed(best_single->mean_bleu()),
                       fixed(best_single->std_bleu()), fixed(100.0 * best_single->mean_cer())});
  for (const auto& r : reports) {
    if (r.mode == DatasetMode::kSingle) continue;
    std::vector<std::string> fams;
    for (const auto& s : r.systems) {
      const auto& am = cfg.system(s).acoustic_model;
      if (std::find(fams.begin(), fams.end(), am) == fams.end()) fams.push_back(am);
    }
    t3.rows.push_back({detail::join(fams, " + "), detail::join(r.systems, " + "), r.mode == DatasetMode::kMultitask ? "yes" : "no",
                       fixed(r.mean_bleu()), fixed(r.std_bleu()), fixed(100.0 * r.mean_cer())});
  }
  files["table3_combinations.md"] = t3.markdown("Multiple targets");
  files["table3_combinations.csv"] = t3.csv();

  // Branch ablation of every multi-task cell.
  Table t4{{"Category", "Branch(es)", "BLEU", "BLEU Diff."}, {}};
  for (const auto& r : reports) {
    if (r.mode != DatasetMode::kMultitask) continue;
    for (const auto& s : r.systems) {
      const double b = r.mean_branch_bleu(s);
      std::string diff;
      if (single.contains(s)) diff = detail::signed_fixed(b - single.at(s)->mean_bleu());
      else warn("no single-system baseline for branch " + s + " of " + r.cell_id + "; BLEU Diff. left blank");
      t4.rows.push_back({r.cell_id, s, fixed(b), diff});
    }
    t4.rows.push_back({r.cell_id, detail::join(r.systems, " + "), fixed(r.mean_bleu()), ""});
  }
  files["table4_branches.md"] = t4.markdown("Decoder branches");
  files["table4_branches.csv"] = t4.csv();

  // One row per (cell, seed).
  Table seeds{{"cell", "mode", "systems", "seed", "bleu", "cer"}, {}};
  for (const auto& r : reports)
    for (const auto& s : r.seeds)
      seeds.rows.push_back({r.cell_id, std::string(to_string(r.mode)), detail::join(r.systems, "+"), std::to_string(s.seed), fixed(s.bleu, 2),
                            fixed(100.0 * s.cer, 2)});
  files["per_seed.csv"] = seeds.csv();
  files["bleu.svg"] = bleu_svg(reports);

  if (correlation) {
    files["correlation.csv"] = correlation_to_csv(*correlation);
    files["correlation.svg"] = correlation_svg(*correlation);
  }

  json summary = json::object();
  summary["format_version"] = kFormatVersion;
  json cells = json::array();
  for (const auto& r : reports) {
    json seeds_json = json::array();
    for (const auto& s : r.seeds) seeds_json.push_back(seed_result_to_json(s));
    cells.push_back({{"cell", r.cell_id}, {"mode", std::string(to_string(r.mode))}, {"systems", r.systems},
                     {"mean_bleu", r.mean_bleu()}, {"std_bleu", r.std_bleu()}, {"mean_cer", r.mean_cer()}, {"seeds", seeds_json}});
  }
  summary["cells"] = cells;
  summary["system_cer"] = system_cer;
  files["summary.json"] = summary.dump(2) + "\n";
  return files;
}

inline void write_report_files(const fs::path& dir, const ReportFiles& files) {
  for (const auto& [name, content] : files) write_file_atomic(dir / name, content);
}

/// Tables for `reports`, with test-split system CERs and the unit
/// correlation matrix taken from the pipeline when units are available.
inline ReportFiles render_reports(Pipeline& pipeline, const std::vector<EvalReport>& reports, std::vector<std::string>* warnings) {
  std::map<std::string, double> system_cer;
  std::optional<CorrelationMatrix> corr;
  const auto systems = pipeline.system_ids();
  const bool have_units =
      std::all_of(systems.begin(), systems.end(), [&](const std::string& s) { return fs::exists(pipeline.units_path(s)); });
  if (have_units) {
    for (const auto& s : systems) system_cer[s] = pipeline.system_cer(s, Split::kTest);
    if (systems.size() >= 2) corr = pipeline.correlation();
  } else if (warnings) {
    warnings->push_back("unit corpora not in the store; CER columns and correlation omitted");
  }
  return report_tables(pipeline.config(), reports, system_cer, corr ? &*corr : nullptr, warnings);
}

}  // namespace s2ut
