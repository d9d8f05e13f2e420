#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rkmt {

// Kendall's tau-b between two equally long observation lists. Pair counts
// follow the usual convention: tied_x counts pairs tied in x (including
// pairs tied in both), tied_y likewise, tied_xy pairs tied in both, and
// concordant + discordant + tied_x + tied_y - tied_xy = n(n-1)/2.
struct CorrelationResult {
  double tau = 0.0;
  double p_value = 1.0;
  std::uint64_t n_pairs = 0;  // observations correlated (not C(n,2))
  std::uint64_t concordant = 0;
  std::uint64_t discordant = 0;
  std::uint64_t tied_x = 0;
  std::uint64_t tied_y = 0;
  std::uint64_t tied_xy = 0;
  bool degenerate = false;  // all xs or all ys tied: tau undefined
};

// O(n log n) tau-b with tie corrections. The p-value is exact (full
// permutation enumeration) for n <= 8 and the tie-adjusted normal
// approximation above that. Degenerate inputs (one side entirely tied)
// yield a flagged result rather than NaN.
CorrelationResult kendall_tau(std::span<const double> xs,
                              std::span<const double> ys);

// One joined (rank, downstream) measurement; performance is already
// oriented so that larger always means better.
struct Observation {
  std::string run_id;
  std::uint64_t step = 0;
  std::uint32_t layer = 0;
  std::string task;
  double rank = 0.0;
  double performance = 0.0;
};

enum class Grouping { per_layer, per_task, per_layer_and_task, pooled };

std::string grouping_name(Grouping grouping);
Grouping grouping_from_name(const std::string& name);

struct GroupCorrelation {
  std::string key;
  CorrelationResult result;
};

// Groups with a defined tau, plus diagnostics for the rest (fewer than two
// observations, or degenerate). Group order is deterministic: numeric by
// layer, lexicographic by task.
struct GroupedCorrelations {
  std::vector<GroupCorrelation> groups;
  std::vector<std::string> diagnostics;
};

GroupedCorrelations tau_by_group(std::span<const Observation> observations,
                                 Grouping grouping);

}  // namespace rkmt
