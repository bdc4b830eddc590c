// SPDX-License-Identifier: Apache-2.0
//
// cnt: train snapshot populations, analyze snapshots, build ensemble and
// trajectory reports, cross-check against the edge-list oracle, convert
// between CNTS and the JSON snapshot variant.
//
// Exit codes: 0 success, 1 validation or internal error, 2 usage or path error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnt/cnt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// A missing input or unusable output location.
struct PathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An error already tied to one input file.
struct FileError : std::runtime_error {
  FileError(const fs::path& p, const std::string& what) : std::runtime_error(p.string() + ": " + what) {}
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw PathError("cannot write " + p.string());
  out << text;
  if (!out) throw PathError("write failed: " + p.string());
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw PathError("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PathError("write failed: " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw PathError("cannot create output directory " + dir.string());
}

/// Expands directories into their regular files with one of `extensions`, sorted by name.
/// The population index written by `train` is skipped.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs, const std::set<std::string>& extensions) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (!fs::exists(p)) throw PathError("no such file or directory: " + in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && extensions.count(e.path().extension().string()) &&
            e.path().filename() != "population.json") {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

std::string accuracy_4dp(double a) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.4f", a);
  return buf;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::uint64_t seed_offset = 0;
};

int cmd_train(const TrainArgs& a) {
  const fs::path config_path(a.config);
  if (!fs::is_regular_file(config_path)) throw PathError("config not found: " + a.config);
  const auto bytes = cnt::read_file_bytes(config_path);
  auto rc = cnt::parse_run_config(std::string(bytes.begin(), bytes.end()), config_path.parent_path());
  for (const auto& p : cnt::dataset_paths(rc.dataset)) {
    if (!fs::is_regular_file(p)) throw PathError("dataset not found: " + p.string());
  }
  rc.train.seed += a.seed_offset;
  const auto [train_set, eval_set] = cnt::load_datasets(rc.dataset);

  std::vector<cnt::PopulationMember> members;
  if (rc.population) {
    members = cnt::generate_population(rc.train, rc.population->count, rc.population->accuracy_targets, train_set,
                                       eval_set);
  } else {
    auto r = cnt::train_detailed(rc.train, train_set, eval_set);
    cnt::PopulationMember m;
    m.seed = rc.train.seed;
    m.target = rc.train.early_stop_at_accuracy.value_or(1.0);
    m.reached_target = rc.train.early_stop_at_accuracy ? r.reached_target : true;
    m.snapshots = std::move(r.snapshots);
    members.push_back(std::move(m));
  }

  const fs::path out(a.out);
  ensure_dir(out);
  json index;
  index["schema"] = "cnt.population_index";
  index["version"] = 1;
  index["task_tag"] = rc.train.task_tag;
  index["layer_sizes"] = rc.train.layer_sizes;
  index["networks"] = json::array();
  std::set<std::string> used;
  std::size_t written = 0;
  for (const auto& m : members) {
    json net{{"seed", m.seed}, {"reached_target", m.reached_target}, {"snapshots", json::array()}};
    if (rc.population || rc.train.early_stop_at_accuracy) net["target"] = m.target;
    if (!m.reached_target) {
      std::cerr << "warning: seed " << m.seed << " did not reach accuracy " << m.target
                << "; emitted its best state instead\n";
    }
    for (const auto& s : m.snapshots) {
      const std::string stem = rc.train.task_tag + "_seed" + std::to_string(m.seed) + "_acc" + accuracy_4dp(s.meta.accuracy);
      std::string name = stem + ".cnts";
      if (used.count(name)) name = stem + "_e" + std::to_string(s.meta.epoch) + ".cnts";
      for (int k = 2; used.count(name); ++k) name = stem + "_e" + std::to_string(s.meta.epoch) + "_" + std::to_string(k) + ".cnts";
      used.insert(name);
      write_bytes(out / name, cnt::write_snapshot(s));
      net["snapshots"].push_back({{"file", name}, {"accuracy", s.meta.accuracy}, {"epoch", s.meta.epoch}});
      ++written;
    }
    index["networks"].push_back(std::move(net));
  }
  write_text(out / "population.json", index.dump(1) + "\n");
  std::cout << "wrote " << written << " snapshots for " << members.size() << " network(s) to " << out.string() << "\n";
  return kExitOk;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string out;
  bool disparity = false;
  bool unique_conv_weights = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const auto files = expand_inputs(a.inputs, {".cnts", ".json"});
  if (files.empty()) throw PathError("no snapshot files found");
  const fs::path out(a.out);
  ensure_dir(out);

  cnt::AnalyzeOptions opts;
  opts.disparity = a.disparity;
  opts.conv_link_mode = a.unique_conv_weights ? cnt::ConvLinkMode::unique_weights : cnt::ConvLinkMode::realized_edges;
  std::vector<cnt::MetricRecord> records(files.size());
  std::vector<std::string> errors(files.size());
  cnt::parallel_for(files.size(), [&](std::size_t i) {
    try {
      records[i] = cnt::analyze_snapshot(cnt::load_snapshot(files[i]), opts);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) throw FileError(files[i], errors[i]);
  }

  std::string csv = cnt::kRecordCsvHeader;
  std::set<std::string> stems;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::string stem = files[i].stem().string();
    if (!stems.insert(stem).second) throw FileError(files[i], "duplicate snapshot name '" + stem + "'");
    write_text(out / (stem + ".metrics.json"), cnt::write_record_json(records[i]));
    cnt::append_record_csv(csv, stem, records[i]);
  }
  write_text(out / "metrics.csv", csv);
  std::cout << "analyzed " << files.size() << " snapshot(s) into " << out.string() << "\n";
  return kExitOk;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string mode = "ensemble";
  std::size_t bins = cnt::kDefaultHistogramBins;
  std::size_t bootstrap = 10;
  std::size_t min_population = cnt::kDefaultMinPopulation;
  bool kde = false;
};

/// Metric records, or snapshots analyzed on the fly.
cnt::MetricRecord load_record_or_snapshot(const fs::path& p) {
  const auto bytes = cnt::read_file_bytes(p);
  try {
    if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "CNTS")) {
      return cnt::analyze_snapshot(cnt::read_snapshot(bytes));
    }
    const auto j = cnt::detail::guard_json("input", [&] { return json::parse(bytes.begin(), bytes.end()); });
    if (j.is_object() && j.contains("schema")) return cnt::record_from_json(j);
    return cnt::analyze_snapshot(cnt::read_snapshot(bytes));
  } catch (const std::exception& e) {
    throw FileError(p, e.what());
  }
}

int cmd_report(const ReportArgs& a) {
  const auto files = expand_inputs(a.inputs, {".cnts", ".json"});
  std::vector<cnt::MetricRecord> records(files.size());
  cnt::parallel_for(files.size(), [&](std::size_t i) { records[i] = load_record_or_snapshot(files[i]); });
  if (records.empty()) throw cnt::ValidationError("no records to report on");
  const fs::path out(a.out);
  ensure_dir(out);

  if (a.mode == "trajectory") {
    const auto t = cnt::trajectory_report(std::move(records), a.bins);
    write_text(out / "trajectory_report.json", cnt::trajectory_report_json(t).dump(1) + "\n");
    write_text(out / "trajectory_errorbars.csv", cnt::trajectory_errorbar_csv(t));
    write_text(out / "trajectory_strength.csv", cnt::trajectory_strength_csv(t));
    std::cout << "trajectory of " << t.snapshots.size() << " snapshots written to " << out.string() << "\n";
    return kExitOk;
  }

  cnt::ReportOptions opts;
  opts.histogram_bins = a.bins;
  opts.bootstrap_rounds = a.bootstrap;
  opts.min_population = a.min_population;
  const auto bins = cnt::bin_by_accuracy(std::move(records));
  const auto rep = cnt::ensemble_report(bins, opts);
  for (std::size_t b : rep.underpopulated) {
    std::cerr << "warning: accuracy bin " << b << " holds " << rep.counts[b] << " record(s), fewer than "
              << rep.min_population << "\n";
  }
  write_text(out / "ensemble_report.json", cnt::ensemble_report_json(rep).dump(1) + "\n");
  write_text(out / "ensemble_tidy.csv", cnt::ensemble_tidy_csv(rep));
  for (cnt::Metric m : cnt::kAllMetrics) {
    const std::string name = cnt::to_string(m);
    write_text(out / ("figure_" + name + ".csv"), cnt::ensemble_figure_csv(rep, m));
    if (!a.kde) {
      write_text(out / ("density_" + name + ".csv"), cnt::ensemble_density_csv(rep, m));
      continue;
    }
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> smooth;
    for (const auto& e : rep.entries) {
      if (e.metric != m) continue;
      std::vector<double> centres;
      for (std::size_t i = 0; i + 1 < e.bin_edges.size(); ++i) centres.push_back(0.5 * (e.bin_edges[i] + e.bin_edges[i + 1]));
      for (const auto& b : e.bins) {
        const auto samples = cnt::pool_layer_metric(bins.bins[b.accuracy_bin], e.layer, m);
        smooth[{e.layer, b.accuracy_bin}] = cnt::gaussian_kde(samples, centres);
      }
    }
    write_text(out / ("density_" + name + ".csv"), cnt::ensemble_density_csv(rep, m, &smooth));
  }
  std::cout << "ensemble report over " << rep.entries.size() << " (metric, layer) pairs written to " << out.string()
            << "\n";
  return kExitOk;
}

// ---- oracle ---------------------------------------------------------------

struct OracleArgs {
  std::string input;
  std::size_t cap = cnt::oracle::kDefaultEdgeCap;
  std::string export_format;
  std::string out;
};

int cmd_oracle(const OracleArgs& a) {
  const fs::path in(a.input);
  if (!fs::is_regular_file(in)) throw PathError("snapshot not found: " + a.input);
  cnt::NetworkSnapshot s;
  try {
    s = cnt::load_snapshot(in);
  } catch (const std::exception& e) {
    throw FileError(in, e.what());
  }
  cnt::OracleComparison cmp;
  try {
    cmp = cnt::compare_with_oracle(s, a.cap);
  } catch (const cnt::SizeError& e) {
    std::cerr << "error: " << e.what() << "; rerun with --oracle-cap " << e.requested() << " to allow it\n";
    return kExitFailure;
  }
  for (std::size_t b = 0; b < cmp.edges.size(); ++b) std::cout << "block " << b << ": " << cmp.edges[b] << " edges\n";
  for (const auto& d : cmp.deviations) {
    std::cout << d.scope << ": max |deviation| " << cnt::shortest_repr(d.max_abs) << " (tolerance "
              << cnt::shortest_repr(d.tolerance) << ") " << (d.ok() ? "ok" : "EXCEEDED") << "\n";
  }
  std::cout << "max |deviation| " << cnt::shortest_repr(cmp.max_abs) << "\n";

  if (!a.export_format.empty()) {
    const auto format = a.export_format == "graphml" ? cnt::oracle::ExportFormat::graphml : cnt::oracle::ExportFormat::csv;
    const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
    ensure_dir(out);
    for (std::size_t b = 0; b < s.block_count(); ++b) {
      const auto list = cnt::oracle::unroll_layer(s.layers[b], b, a.cap);
      write_text(out / ("edges_block" + std::to_string(b) + "." + a.export_format),
                 cnt::oracle::export_edge_list(list, format));
    }
  }
  return cmp.ok() ? kExitOk : kExitFailure;
}

// ---- convert --------------------------------------------------------------

struct ConvertArgs {
  std::string input;
  std::string out;
  bool strip_softmax = false;
};

int cmd_convert(const ConvertArgs& a) {
  const fs::path in(a.input);
  if (!fs::is_regular_file(in)) throw PathError("snapshot not found: " + a.input);
  cnt::NetworkSnapshot s;
  try {
    s = cnt::load_snapshot(in);
  } catch (const std::exception& e) {
    throw FileError(in, e.what());
  }
  if (a.strip_softmax) s = cnt::strip_output_softmax(s);
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  if (cnt::is_json_snapshot_path(out)) {
    write_text(out, cnt::write_snapshot_json(s));
  } else {
    write_bytes(out, cnt::write_snapshot(s));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-network metrics for trained feed-forward networks"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a population and write CNTS snapshots plus population.json");
  t->add_option("--config", train.config, "Training manifest (JSON)")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--seed-offset", train.seed_offset, "Added to the configured base seed");

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "Compute metric records for snapshots");
  an->add_option("inputs", analyze.inputs, "Snapshot files or directories")->required();
  an->add_option("--out", analyze.out, "Output directory")->required();
  an->add_flag("--disparity", analyze.disparity, "Also compute node disparity");
  an->add_flag("--unique-conv-weights", analyze.unique_conv_weights,
               "Count each conv kernel entry once in the link-weight moments");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Ensemble or trajectory report from metric records or snapshots");
  r->add_option("inputs", report.inputs, "Record/snapshot files or directories")->required();
  r->add_option("--out", report.out, "Output directory")->required();
  r->add_option("--mode", report.mode, "ensemble or trajectory")
      ->check(CLI::IsMember({"ensemble", "trajectory"}))
      ->capture_default_str();
  r->add_option("--bins", report.bins, "Histogram bin count")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--bootstrap", report.bootstrap, "Bootstrap rounds over records (0 disables)")->capture_default_str();
  r->add_option("--min-population", report.min_population, "Warn for occupied bins below this size")
      ->capture_default_str();
  r->add_flag("--kde", report.kde, "Add a Gaussian-smoothed density column to the density CSVs");

  OracleArgs oracle_args;
  auto* o = app.add_subcommand("oracle", "Cross-check fast metrics against the explicit edge list");
  o->add_option("input", oracle_args.input, "Snapshot file")->required();
  o->add_option("--oracle-cap", oracle_args.cap, "Maximum edges per block")->capture_default_str();
  o->add_option("--export", oracle_args.export_format, "Also write the edge list")
      ->check(CLI::IsMember({"csv", "graphml"}));
  o->add_option("--out", oracle_args.out, "Directory for exported edge lists");

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert between CNTS and the JSON snapshot variant (by --out extension)");
  c->add_option("input", convert.input, "Snapshot file")->required();
  c->add_option("--out", convert.out, "Output file; .json writes the JSON variant")->required();
  c->add_flag("--strip-softmax", convert.strip_softmax, "Mark the output activation as linear");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train);
    if (an->parsed()) return cmd_analyze(analyze);
    if (r->parsed()) return cmd_report(report);
    if (o->parsed()) return cmd_oracle(oracle_args);
    if (c->parsed()) return cmd_convert(convert);
  } catch (const PathError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
