#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rkmt/history.hpp"
#include "rkmt/kendall.hpp"
#include "rkmt/manifest.hpp"
#include "rkmt/metrics.hpp"

namespace rkmt {

struct ScanOptions {
  int workers = 1;
  // When set, computed records are appended here (single writer, cell order).
  std::optional<std::filesystem::path> history;
};

struct ScanResult {
  std::vector<RankRecord> records;  // manifest order: steps outer, layers inner
  std::vector<std::string> gaps;    // missing containers; diagnostics, not errors
};

// Walks the manifest's (step, layer) cells: read container, sample with the
// manifest's fixed (k, seed), rankme_t, one record per cell. Missing
// containers become gaps. A layer whose dimension changes across steps is
// an error; different dimensions across layers are fine.
ScanResult scan_run(const RunManifest& manifest, const ScanOptions& options = {});

// Per task: the layer that achieved the best oriented metric anywhere in
// the joined observations, next to the layer that achieved the highest
// rank. The two columns are computed independently and may disagree.
struct LayerChoice {
  std::string task;
  std::uint32_t best_layer_by_performance = 0;
  double best_performance = 0.0;  // oriented
  std::uint32_t best_layer_by_rank = 0;
  double best_rank = 0.0;
};

struct CorrelationReport {
  int schema_version = 1;
  Grouping grouping = Grouping::per_layer;
  std::vector<GroupCorrelation> groups;
  std::vector<LayerChoice> best_layers;
  std::vector<std::string> diagnostics;
  std::vector<Observation> observations;  // joined, sorted
};

// Inner-joins rank records with oriented metrics on (run_id, step, layer)
// and correlates per group. An empty join is an error listing unmatched keys.
CorrelationReport correlate_run(std::span<const RankRecord> ranks,
                                std::span<const DownstreamRecord> metrics,
                                Grouping grouping);

enum class ReportFormat { json, csv };

// Deterministic rendering; floats at 9 significant digits. The JSON form
// ends with a generated_at timestamp, the only field that varies between
// identical runs.
std::string render_report(const CorrelationReport& report, ReportFormat format);
void write_report(const CorrelationReport& report, ReportFormat format,
                  const std::filesystem::path& path);

// Plot-data CSVs under dir: rank_vs_step.csv always, perf_vs_rank.csv when
// metrics are given.
void write_plot_data(std::span<const RankRecord> ranks,
                     std::span<const DownstreamRecord> metrics,
                     const std::filesystem::path& dir);

}  // namespace rkmt
