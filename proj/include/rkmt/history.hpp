#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rkmt {

// One effective-rank measurement: a single point on a rank-vs-step curve.
struct RankRecord {
  std::string run_id;
  std::uint64_t step = 0;
  std::uint32_t layer = 0;
  double rank_value = 0.0;
  std::uint64_t retained_count = 0;
  std::uint64_t n_sequences_used = 0;
  std::uint64_t sample_seed = 0;
  std::string computed_at;  // ISO 8601 UTC
};

// Rank histories are JSON-lines files, append-only; rewrites never happen.
// A (run_id, step, layer) key may repeat; the latest line wins at read time.
void append_history(const std::filesystem::path& path,
                    std::span<const RankRecord> records);

// Deduplicated (latest wins) and sorted by (run_id, step, layer).
std::vector<RankRecord> load_history(const std::filesystem::path& path);

std::string current_utc_timestamp();

}  // namespace rkmt
