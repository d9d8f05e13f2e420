#include "rkmt/history.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <map>
#include <tuple>

#include <json.hpp>

#include "rkmt/error.hpp"

namespace rkmt {
namespace {

using nlohmann::ordered_json;

ordered_json to_json(const RankRecord& record) {
  ordered_json line;
  line["run_id"] = record.run_id;
  line["step"] = record.step;
  line["layer"] = record.layer;
  line["rank_value"] = record.rank_value;
  line["retained_count"] = record.retained_count;
  line["n_sequences_used"] = record.n_sequences_used;
  line["sample_seed"] = record.sample_seed;
  line["computed_at"] = record.computed_at;
  return line;
}

RankRecord from_json(const ordered_json& line) {
  RankRecord record;
  record.run_id = line.at("run_id").get<std::string>();
  record.step = line.at("step").get<std::uint64_t>();
  record.layer = line.at("layer").get<std::uint32_t>();
  record.rank_value = line.at("rank_value").get<double>();
  record.retained_count = line.at("retained_count").get<std::uint64_t>();
  record.n_sequences_used = line.at("n_sequences_used").get<std::uint64_t>();
  record.sample_seed = line.at("sample_seed").get<std::uint64_t>();
  record.computed_at = line.at("computed_at").get<std::string>();
  return record;
}

}  // namespace

void append_history(const std::filesystem::path& path,
                    std::span<const RankRecord> records) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw InputError(path.string() + ": cannot open for appending");
  for (const RankRecord& record : records) out << to_json(record).dump() << "\n";
  out.flush();
  if (!out) throw InputError(path.string() + ": append failed");
}

std::vector<RankRecord> load_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open for reading");

  std::map<std::tuple<std::string, std::uint64_t, std::uint32_t>, RankRecord>
      latest;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json doc;
    try {
      doc = ordered_json::parse(line);
      RankRecord record = from_json(doc);
      latest.insert_or_assign(
          std::make_tuple(record.run_id, record.step, record.layer),
          std::move(record));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
  }

  std::vector<RankRecord> records;
  records.reserve(latest.size());
  for (auto& [key, record] : latest) records.push_back(std::move(record));
  return records;  // map order is already (run_id, step, layer)
}

std::string current_utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace rkmt
