// rankme: effective-rank measurement and monitoring for embedding-sequence
// dumps. Subcommands: rank, scan, correlate, synth, report.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rkmt/container.hpp"
#include "rkmt/error.hpp"
#include "rkmt/monitor.hpp"
#include "rkmt/sampling.hpp"
#include "rkmt/synth.hpp"

namespace {

using nlohmann::ordered_json;

struct RankArgs {
  std::string input;
  std::optional<std::uint64_t> sample;
  std::optional<std::uint64_t> seed;
  std::string pool = "sum";
};

int run_rank(const RankArgs& args) {
  if (args.sample && !args.seed)
    throw rkmt::InputError("--seed is required when --sample is given");

  rkmt::EmbeddingSequenceSet<double> set =
      rkmt::read_container_f64(args.input);
  if (args.sample)
    set = rkmt::sample_sequences(set, *args.sample, *args.seed);

  const rkmt::EffectiveRank rank =
      args.pool == "mean" ? rkmt::rankme_t_mean(set) : rkmt::rankme_t(set);

  ordered_json line;
  line["rank"] = rank.value;
  line["retained"] = rank.retained;
  line["n"] = set.size();
  line["d"] = set.dim();
  if (args.seed)
    line["seed"] = *args.seed;
  else
    line["seed"] = nullptr;
  std::cout << line.dump() << "\n";
  return 0;
}

struct ScanArgs {
  std::string manifest;
  int workers = 1;
  std::string history;  // empty: <root>/rank_history.jsonl
};

int run_scan(const ScanArgs& args) {
  const rkmt::RunManifest manifest = rkmt::load_manifest(args.manifest);
  rkmt::ScanOptions options;
  options.workers = args.workers;
  options.history = args.history.empty()
                        ? manifest.root / "rank_history.jsonl"
                        : std::filesystem::path(args.history);

  const rkmt::ScanResult result = rkmt::scan_run(manifest, options);
  for (const rkmt::RankRecord& record : result.records) {
    ordered_json line;
    line["run_id"] = record.run_id;
    line["step"] = record.step;
    line["layer"] = record.layer;
    line["rank"] = record.rank_value;
    line["retained"] = record.retained_count;
    line["n"] = record.n_sequences_used;
    line["seed"] = record.sample_seed;
    std::cout << line.dump() << "\n";
  }
  if (!result.gaps.empty()) {
    ordered_json line;
    line["gaps"] = result.gaps;
    std::cout << line.dump() << "\n";
    for (const std::string& gap : result.gaps)
      std::cerr << "warning: " << gap << "\n";
  }
  return 0;
}

struct CorrelateArgs {
  std::string history;
  std::string metrics;
  std::string group = "layer";
  std::string out;
  std::string format = "json";
  std::string plots;
};

int run_correlate(const CorrelateArgs& args) {
  const std::vector<rkmt::RankRecord> ranks =
      rkmt::load_history(args.history);
  const std::vector<rkmt::DownstreamRecord> metrics =
      rkmt::read_metrics(args.metrics);
  const rkmt::CorrelationReport report = rkmt::correlate_run(
      ranks, metrics, rkmt::grouping_from_name(args.group));

  const rkmt::ReportFormat format = args.format == "csv"
                                        ? rkmt::ReportFormat::csv
                                        : rkmt::ReportFormat::json;
  rkmt::write_report(report, format, args.out);
  if (!args.plots.empty()) rkmt::write_plot_data(ranks, metrics, args.plots);

  for (const std::string& diagnostic : report.diagnostics)
    std::cerr << "note: " << diagnostic << "\n";
  std::cerr << "wrote " << args.out << " (" << report.groups.size()
            << " groups, " << report.observations.size() << " observations)\n";
  return 0;
}

struct SynthArgs {
  std::string plan;
  std::string out;
};

int run_synth(const SynthArgs& args) {
  const rkmt::TrajectoryPlan plan = rkmt::load_trajectory_plan(args.plan);
  const rkmt::PlantedRun run = rkmt::plant_run(plan, args.out);
  ordered_json line;
  line["containers"] = run.cells.size();
  line["manifest"] = run.manifest_path.string();
  line["sidecar"] = run.sidecar_path.string();
  std::cout << line.dump() << "\n";
  return 0;
}

struct ReportArgs {
  std::string history;
  std::string plots;
  std::string metrics;
};

int run_report(const ReportArgs& args) {
  const std::vector<rkmt::RankRecord> ranks = rkmt::load_history(args.history);
  if (ranks.empty())
    throw rkmt::InputError(args.history + ": history is empty");
  std::vector<rkmt::DownstreamRecord> metrics;
  if (!args.metrics.empty()) metrics = rkmt::read_metrics(args.metrics);
  rkmt::write_plot_data(ranks, metrics, args.plots);
  std::cerr << "wrote plot data for " << ranks.size() << " rank records to "
            << args.plots << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"effective-rank monitoring for embedding-sequence dumps"};
  app.require_subcommand(1);

  RankArgs rank_args;
  CLI::App* rank = app.add_subcommand(
      "rank", "compute the effective rank of one container");
  rank->add_option("--input", rank_args.input, "RKMT container")->required();
  rank->add_option("--sample", rank_args.sample,
                   "sample this many sequences (requires --seed)");
  rank->add_option("--seed", rank_args.seed, "sampling seed");
  rank->add_option("--pool", rank_args.pool, "temporal pooling")
      ->check(CLI::IsMember({"sum", "mean"}));

  ScanArgs scan_args;
  CLI::App* scan = app.add_subcommand(
      "scan", "scan a run's checkpoint dumps into rank records");
  scan->add_option("--manifest", scan_args.manifest, "run manifest JSON")
      ->required();
  scan->add_option("--workers", scan_args.workers, "concurrent cells")
      ->check(CLI::PositiveNumber);
  scan->add_option("--history", scan_args.history,
                   "history file (default <root>/rank_history.jsonl)");

  CorrelateArgs corr_args;
  CLI::App* correlate = app.add_subcommand(
      "correlate", "correlate rank history against downstream metrics");
  correlate->add_option("--history", corr_args.history, "rank history")
      ->required();
  correlate->add_option("--metrics", corr_args.metrics, "metrics CSV")
      ->required();
  correlate->add_option("--group", corr_args.group, "grouping")
      ->check(CLI::IsMember({"layer", "task", "layer_task", "pooled"}));
  correlate->add_option("--out", corr_args.out, "report output path")
      ->required();
  correlate->add_option("--format", corr_args.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));
  correlate->add_option("--plots", corr_args.plots,
                        "also write plot-data CSVs here");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic run with planted spectra");
  synth->add_option("--plan", synth_args.plan, "trajectory plan JSON")
      ->required();
  synth->add_option("--out", synth_args.out, "output run directory")
      ->required();

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand(
      "report", "emit plot-data CSVs from a rank history");
  report->add_option("--history", report_args.history, "rank history")
      ->required();
  report->add_option("--plots", report_args.plots, "output directory")
      ->required();
  report->add_option("--metrics", report_args.metrics,
                     "metrics CSV for performance-vs-rank data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (rank->parsed()) return run_rank(rank_args);
    if (scan->parsed()) return run_scan(scan_args);
    if (correlate->parsed()) return run_correlate(corr_args);
    if (synth->parsed()) return run_synth(synth_args);
    if (report->parsed()) return run_report(report_args);
    return 2;
  } catch (const rkmt::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
