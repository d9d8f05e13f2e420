#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rkmt {

enum class Orientation { higher_is_better, lower_is_better };

// One downstream measurement for a (run, checkpoint step, layer, task)
// cell. orientation records the metric's native direction so that error
// rates and accuracies can share one table.
struct DownstreamRecord {
  std::string run_id;
  std::uint64_t step = 0;
  std::uint32_t layer = 0;
  std::string task;
  double metric_value = 0.0;
  Orientation orientation = Orientation::higher_is_better;
};

// Larger-always-means-better view of the metric: lower-is-better values are
// negated. Negation is the monotone choice that is also linear, so tau on
// oriented values equals tau on reversed raw ranks.
inline double orient(const DownstreamRecord& record) {
  return record.orientation == Orientation::higher_is_better
             ? record.metric_value
             : -record.metric_value;
}

// Parses the metrics table: comma-separated, header
// run_id,step,layer,task,metric_value,orientation with orientation tokens
// "higher" / "lower". Keys must be unique; duplicates are reported with
// both line numbers.
std::vector<DownstreamRecord> parse_metrics(std::istream& in,
                                            const std::string& source_name);
std::vector<DownstreamRecord> read_metrics(const std::filesystem::path& source);

}  // namespace rkmt
