// Copyright 2026 The s2ut Authors
// SPDX-License-Identifier: Apache-2.0

// s2ut command line: runs pipeline stages against the artifact store.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s2ut/config.hpp"
#include "s2ut/experiment.hpp"
#include "s2ut/report.hpp"

namespace {

using s2ut::CellSpec;
using s2ut::Pipeline;

struct Options {
  std::string config_path;
  std::string store;
  bool quiet = false;
  std::string cell;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> systems;
  std::string out;
};

s2ut::ExperimentConfig load_config(const Options& o) {
  if (o.config_path.empty()) return s2ut::default_experiment_config();
  return s2ut::parse_experiment_config(s2ut::read_file(o.config_path));
}

std::vector<CellSpec> selected_cells(const Pipeline& p, const Options& o) {
  std::vector<CellSpec> out;
  if (o.cell.empty()) out = p.config().cells;
  else out.push_back(p.config().cell(o.cell));
  if (!o.seeds.empty())
    for (auto& c : out) c.seeds = o.seeds;
  return out;
}

std::vector<std::string> selected_systems(const Pipeline& p, const Options& o) {
  if (o.systems.empty()) return p.system_ids();
  for (const auto& s : o.systems) p.config().system(s);  // throws on unknown ids
  return o.systems;
}

s2ut::fs::path report_dir(const Pipeline& p, const Options& o) {
  if (!o.out.empty()) return o.out;
  return p.store() / "reports" / s2ut::content_hash(s2ut::serialize_experiment_config(p.config()));
}

void write_reports(Pipeline& p, const Options& o, const std::vector<s2ut::EvalReport>& reports) {
  std::vector<std::string> warnings;
  const auto files = s2ut::render_reports(p, reports, &warnings);
  const auto dir = report_dir(p, o);
  s2ut::write_report_files(dir, files);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "reports written to " << dir.string() << '\n';
}

void print_report(const s2ut::EvalReport& r) {
  std::cout << r.cell_id << ": BLEU " << s2ut::format_double(r.mean_bleu(), 2) << " +/- " << s2ut::format_double(r.std_bleu(), 2)
            << " over " << r.seeds.size() << " seed(s)\n";
  for (const auto& s : r.seeds) {
    std::cout << "  seed " << s.seed << ": BLEU " << s2ut::format_double(s.bleu, 2) << "  CER " << s2ut::format_double(100 * s.cer, 2);
    for (const auto& [b, v] : s.branch_bleu) std::cout << "  " << b << " " << s2ut::format_double(v, 2);
    std::cout << '\n';
  }
}

int run(const std::string& command, const Options& o) {
  Pipeline p(load_config(o), o.store.empty() ? s2ut::default_store_root() : s2ut::fs::path(o.store), o.quiet ? nullptr : &std::cerr);

  if (command == "gen-data") {
    std::cout << p.corpus().size() << " utterances in " << p.corpus_path().string() << '\n';
  } else if (command == "synth") {
    for (const auto& s : selected_systems(p, o)) {
      p.synthesis(s);
      std::cout << s << ": " << p.features_dir(s).string() << '\n';
    }
  } else if (command == "unitize") {
    p.codebook();
    std::cout << "codebook: " << p.codebook_path().string() << '\n';
    for (const auto& s : selected_systems(p, o)) {
      p.units(s);
      std::cout << s << ": " << p.units_path(s).string() << '\n';
    }
  } else if (command == "prep-targets") {
    p.cer_table();
    for (const auto& c : selected_cells(p, o))
      if (c.mode == s2ut::DatasetMode::kMultitask) p.quality_tokens(c);
    std::cout << "targets: " << p.targets_dir().string() << '\n';
  } else if (command == "train") {
    for (const auto& c : selected_cells(p, o))
      for (auto seed : c.seeds) {
        const auto ck = p.checkpoint(c, seed);
        std::cout << c.id << " seed " << seed << ": step " << ck.step << ", dev loss " << s2ut::format_double(ck.dev_loss, 4) << ", "
                  << p.model_dir(c, seed).string() << '\n';
      }
  } else if (command == "translate") {
    for (const auto& c : selected_cells(p, o))
      for (auto seed : c.seeds) {
        p.decodes(c, seed);
        std::cout << c.id << " seed " << seed << ": " << p.decode_dir(c, seed).string() << '\n';
      }
  } else if (command == "evaluate") {
    for (const auto& c : selected_cells(p, o)) print_report(p.report(c));
  } else if (command == "analyze-correlation") {
    const auto m = p.correlation(selected_systems(p, o));
    const auto dir = report_dir(p, o);
    s2ut::write_file_atomic(dir / "correlation.csv", s2ut::correlation_to_csv(m));
    s2ut::write_file_atomic(dir / "correlation.svg", s2ut::correlation_svg(m));
    std::cout << s2ut::correlation_to_csv(m);
  } else if (command == "run-experiment") {
    const auto reports = p.run();
    for (const auto& r : reports) print_report(r);
    write_reports(p, o, reports);
  } else if (command == "report") {
    write_reports(p, o, p.cached_reports());
  }
  return s2ut::kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"s2ut: speech-to-unit translation experiments on a synthetic world"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("-c,--config", o.config_path, "JSON experiment config (built-in defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("-s,--store", o.store, std::string("artifact store root (default $") + s2ut::kStoreEnv + " or ./s2ut-store)");
  app.add_flag("-q,--quiet", o.quiet, "suppress progress messages");
  bool dump_config = false;
  app.add_flag("--dump-config", dump_config, "print the effective config and exit");

  auto add = [&](const char* name, const char* help) { return app.add_subcommand(name, help); };
  auto with_systems = [&](CLI::App* c) { c->add_option("--systems", o.systems, "system ids (default: all)")->delimiter(','); };
  auto with_cells = [&](CLI::App* c) {
    c->add_option("--cell", o.cell, "cell id (default: all cells)");
    c->add_option("--seed", o.seeds, "seeds (default: the cell's seeds)")->delimiter(',');
  };
  auto with_out = [&](CLI::App* c) { c->add_option("-o,--out", o.out, "output directory (default: <store>/reports/<config hash>)"); };

  add("gen-data", "generate the parallel corpus");
  with_systems(add("synth", "synthesize target features for each system"));
  with_systems(add("unitize", "fit the codebook and encode reduced units"));
  with_cells(add("prep-targets", "compute the CER table and quality tokens"));
  with_cells(add("train", "train models"));
  with_cells(add("translate", "decode the test split"));
  with_cells(add("evaluate", "score decodes with BLEU and CER"));
  {
    auto* c = add("analyze-correlation", "Pearson correlation of dev unit distributions");
    with_systems(c);
    with_out(c);
  }
  with_out(add("run-experiment", "run every cell end to end and write reports"));
  with_out(add("report", "write tables and plots for evaluated cells"));

  // --dump-config works without a subcommand.
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--dump-config") app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? s2ut::kExitSuccess : s2ut::kExitUsage;
  }

  try {
    if (dump_config) {
      std::cout << s2ut::serialize_experiment_config(load_config(o));
      return s2ut::kExitSuccess;
    }
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const s2ut::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return s2ut::kExitData;
  }
}
