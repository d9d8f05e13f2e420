#include "rkmt/monitor.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "rkmt/container.hpp"
#include "rkmt/sampling.hpp"

namespace rkmt {
namespace {

using nlohmann::ordered_json;

// Rounds to 9 significant digits; report files stay byte-stable without
// false diffs against 1e-6 tolerances.
double round_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct Cell {
  std::uint64_t step;
  std::uint32_t layer;
};

struct CellOutcome {
  std::optional<RankRecord> record;
  std::optional<std::string> gap;
  Eigen::Index dim = 0;
};

CellOutcome process_cell(const RunManifest& manifest, const Cell& cell) {
  CellOutcome outcome;
  const std::filesystem::path path =
      container_path(manifest, cell.step, cell.layer);
  if (!std::filesystem::exists(path)) {
    outcome.gap = "missing container: " + path.string() + " (step " +
                  std::to_string(cell.step) + ", layer " +
                  std::to_string(cell.layer) + ")";
    return outcome;
  }

  EmbeddingSequenceSet<double> set = read_container_f64(path);
  const std::uint64_t n = static_cast<std::uint64_t>(set.size());
  // Containers smaller than the requested sample are used whole.
  const std::uint64_t k = std::min(manifest.sample_k, n);
  EmbeddingSequenceSet<double> sampled =
      sample_sequences(set, k, manifest.sample_seed);
  const EffectiveRank rank = rankme_t(sampled);

  RankRecord record;
  record.run_id = manifest.run_id;
  record.step = cell.step;
  record.layer = cell.layer;
  record.rank_value = rank.value;
  record.retained_count = static_cast<std::uint64_t>(rank.retained);
  record.n_sequences_used = k;
  record.sample_seed = manifest.sample_seed;
  record.computed_at = current_utc_timestamp();
  outcome.record = std::move(record);
  outcome.dim = set.dim();
  return outcome;
}

}  // namespace

ScanResult scan_run(const RunManifest& manifest, const ScanOptions& options) {
  validate(manifest);
  if (options.workers < 1)
    throw InputError("scan: workers must be >= 1");
  if (!std::filesystem::exists(manifest.root))
    throw InputError("scan: run root does not exist: " +
                     manifest.root.string());

  std::vector<Cell> cells;
  for (std::uint64_t step : manifest.steps)
    for (std::uint32_t layer : manifest.layers) cells.push_back({step, layer});

  std::vector<CellOutcome> outcomes(cells.size());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(options.workers),
                            cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      outcomes[i] = process_cell(manifest, cells[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
          try {
            outcomes[i] = process_cell(manifest, cells[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // A layer's dimension must not drift across steps.
  std::map<std::uint32_t, std::pair<Eigen::Index, std::uint64_t>> layer_dims;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!outcomes[i].record) continue;
    const auto [it, inserted] = layer_dims.emplace(
        cells[i].layer, std::make_pair(outcomes[i].dim, cells[i].step));
    if (!inserted && it->second.first != outcomes[i].dim)
      throw InputError(
          "scan: layer " + std::to_string(cells[i].layer) +
          " changes dimension across steps: " +
          std::to_string(it->second.first) + " at step " +
          std::to_string(it->second.second) + " vs " +
          std::to_string(outcomes[i].dim) + " at step " +
          std::to_string(cells[i].step));
  }

  ScanResult result;
  for (CellOutcome& outcome : outcomes) {
    if (outcome.record) result.records.push_back(std::move(*outcome.record));
    if (outcome.gap) result.gaps.push_back(std::move(*outcome.gap));
  }
  if (options.history) append_history(*options.history, result.records);
  return result;
}

CorrelationReport correlate_run(std::span<const RankRecord> ranks,
                                std::span<const DownstreamRecord> metrics,
                                Grouping grouping) {
  using Key = std::tuple<std::string, std::uint64_t, std::uint32_t>;
  std::map<Key, const RankRecord*> rank_index;
  for (const RankRecord& rank : ranks)
    rank_index[std::make_tuple(rank.run_id, rank.step, rank.layer)] = &rank;

  CorrelationReport report;
  report.grouping = grouping;

  std::set<Key> matched;
  std::vector<std::string> unmatched_metrics;
  for (const DownstreamRecord& metric : metrics) {
    const Key key = std::make_tuple(metric.run_id, metric.step, metric.layer);
    const auto it = rank_index.find(key);
    if (it == rank_index.end()) {
      unmatched_metrics.push_back("(" + metric.run_id + "," +
                                  std::to_string(metric.step) + "," +
                                  std::to_string(metric.layer) + ")");
      continue;
    }
    matched.insert(key);
    Observation obs;
    obs.run_id = metric.run_id;
    obs.step = metric.step;
    obs.layer = metric.layer;
    obs.task = metric.task;
    obs.rank = it->second->rank_value;
    obs.performance = orient(metric);
    report.observations.push_back(std::move(obs));
  }

  if (report.observations.empty()) {
    std::string message = "correlate: empty join between " +
                          std::to_string(ranks.size()) + " rank records and " +
                          std::to_string(metrics.size()) + " metric rows";
    std::sort(unmatched_metrics.begin(), unmatched_metrics.end());
    unmatched_metrics.erase(
        std::unique(unmatched_metrics.begin(), unmatched_metrics.end()),
        unmatched_metrics.end());
    if (!unmatched_metrics.empty()) {
      message += "; unmatched metric keys:";
      for (std::size_t i = 0; i < unmatched_metrics.size() && i < 10; ++i)
        message += " " + unmatched_metrics[i];
      if (unmatched_metrics.size() > 10)
        message += " (+" + std::to_string(unmatched_metrics.size() - 10) +
                   " more)";
    }
    throw InputError(message);
  }

  std::sort(report.observations.begin(), report.observations.end(),
            [](const Observation& a, const Observation& b) {
              return std::tie(a.task, a.layer, a.step, a.run_id) <
                     std::tie(b.task, b.layer, b.step, b.run_id);
            });

  GroupedCorrelations grouped = tau_by_group(report.observations, grouping);
  report.groups = std::move(grouped.groups);
  report.diagnostics = std::move(grouped.diagnostics);

  // Best layer per task, by oriented metric and by rank, independently.
  // Ties break toward the lower layer; observations are already sorted by
  // (task, layer, step), so strict improvement keeps the first maximum.
  std::map<std::string, LayerChoice> best;
  for (const Observation& obs : report.observations) {
    auto [it, inserted] = best.try_emplace(obs.task);
    LayerChoice& choice = it->second;
    if (inserted) {
      choice.task = obs.task;
      choice.best_layer_by_performance = obs.layer;
      choice.best_performance = obs.performance;
      choice.best_layer_by_rank = obs.layer;
      choice.best_rank = obs.rank;
      continue;
    }
    if (obs.performance > choice.best_performance) {
      choice.best_performance = obs.performance;
      choice.best_layer_by_performance = obs.layer;
    }
    if (obs.rank > choice.best_rank) {
      choice.best_rank = obs.rank;
      choice.best_layer_by_rank = obs.layer;
    }
  }
  for (auto& [task, choice] : best)
    report.best_layers.push_back(std::move(choice));

  for (const RankRecord& rank : ranks) {
    const Key key = std::make_tuple(rank.run_id, rank.step, rank.layer);
    if (!matched.contains(key))
      report.diagnostics.push_back(
          "rank record without metrics: (" + rank.run_id + "," +
          std::to_string(rank.step) + "," + std::to_string(rank.layer) + ")");
  }
  return report;
}

std::string render_report(const CorrelationReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::ostringstream out;
    out << "group,tau,p_value,n\n";
    for (const GroupCorrelation& group : report.groups)
      out << group.key << "," << format_sig9(group.result.tau) << ","
          << format_sig9(group.result.p_value) << "," << group.result.n_pairs
          << "\n";
    return out.str();
  }

  ordered_json doc;
  doc["schema_version"] = report.schema_version;
  doc["grouping"] = grouping_name(report.grouping);
  doc["groups"] = ordered_json::array();
  for (const GroupCorrelation& group : report.groups) {
    ordered_json entry;
    entry["key"] = group.key;
    entry["tau"] = round_sig9(group.result.tau);
    entry["p_value"] = round_sig9(group.result.p_value);
    entry["n"] = group.result.n_pairs;
    entry["concordant"] = group.result.concordant;
    entry["discordant"] = group.result.discordant;
    doc["groups"].push_back(std::move(entry));
  }
  doc["best_layers"] = ordered_json::array();
  for (const LayerChoice& choice : report.best_layers) {
    ordered_json entry;
    entry["task"] = choice.task;
    entry["best_layer_by_performance"] = choice.best_layer_by_performance;
    entry["best_performance"] = round_sig9(choice.best_performance);
    entry["best_layer_by_rank"] = choice.best_layer_by_rank;
    entry["best_rank"] = round_sig9(choice.best_rank);
    entry["agree"] =
        choice.best_layer_by_performance == choice.best_layer_by_rank;
    doc["best_layers"].push_back(std::move(entry));
  }
  doc["diagnostics"] = report.diagnostics;
  doc["generated_at"] = current_utc_timestamp();
  return doc.dump(2) + "\n";
}

void write_report(const CorrelationReport& report, ReportFormat format,
                  const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError(path.string() + ": cannot open for writing");
  out << render_report(report, format);
  if (!out) throw InputError(path.string() + ": write failed");
}

void write_plot_data(std::span<const RankRecord> ranks,
                     std::span<const DownstreamRecord> metrics,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  // Rank-vs-step series, one row per (run, layer, step).
  std::vector<const RankRecord*> ordered;
  for (const RankRecord& rank : ranks) ordered.push_back(&rank);
  std::sort(ordered.begin(), ordered.end(),
            [](const RankRecord* a, const RankRecord* b) {
              return std::tie(a->run_id, a->layer, a->step) <
                     std::tie(b->run_id, b->layer, b->step);
            });
  {
    std::ofstream out(dir / "rank_vs_step.csv", std::ios::trunc);
    if (!out)
      throw InputError((dir / "rank_vs_step.csv").string() +
                       ": cannot open for writing");
    out << "run_id,layer,step,rank\n";
    for (const RankRecord* rank : ordered)
      out << rank->run_id << "," << rank->layer << "," << rank->step << ","
          << format_sig9(rank->rank_value) << "\n";
  }

  if (metrics.empty()) return;

  // Performance-vs-rank scatter rows per (task, layer).
  using Key = std::tuple<std::string, std::uint64_t, std::uint32_t>;
  std::map<Key, const RankRecord*> rank_index;
  for (const RankRecord& rank : ranks)
    rank_index[std::make_tuple(rank.run_id, rank.step, rank.layer)] = &rank;

  std::vector<const DownstreamRecord*> joined;
  for (const DownstreamRecord& metric : metrics)
    if (rank_index.contains(
            std::make_tuple(metric.run_id, metric.step, metric.layer)))
      joined.push_back(&metric);
  std::sort(joined.begin(), joined.end(),
            [](const DownstreamRecord* a, const DownstreamRecord* b) {
              return std::tie(a->task, a->layer, a->step, a->run_id) <
                     std::tie(b->task, b->layer, b->step, b->run_id);
            });

  std::ofstream out(dir / "perf_vs_rank.csv", std::ios::trunc);
  if (!out)
    throw InputError((dir / "perf_vs_rank.csv").string() +
                     ": cannot open for writing");
  out << "run_id,task,layer,step,rank,metric_value,orientation\n";
  for (const DownstreamRecord* metric : joined) {
    const RankRecord* rank = rank_index.at(
        std::make_tuple(metric->run_id, metric->step, metric->layer));
    out << metric->run_id << "," << metric->task << "," << metric->layer << ","
        << metric->step << "," << format_sig9(rank->rank_value) << ","
        << format_sig9(metric->metric_value) << ","
        << (metric->orientation == Orientation::higher_is_better ? "higher"
                                                                 : "lower")
        << "\n";
  }
}

}  // namespace rkmt
