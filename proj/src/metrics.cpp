#include "rkmt/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <tuple>

#include "rkmt/error.hpp"

namespace rkmt {
namespace {

constexpr const char* kHeader = "run_id,step,layer,task,metric_value,orientation";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

template <typename Unsigned>
Unsigned parse_unsigned(const std::string& field, const std::string& where) {
  Unsigned value{};
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw InputError(where + ": not an unsigned integer: '" + field + "'");
  return value;
}

double parse_metric(const std::string& field, const std::string& where) {
  if (field.empty()) throw InputError(where + ": empty metric value");
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size())
    throw InputError(where + ": not a number: '" + field + "'");
  if (!std::isfinite(value))
    throw InputError(where + ": metric value must be finite: '" + field + "'");
  return value;
}

}  // namespace

std::vector<DownstreamRecord> parse_metrics(std::istream& in,
                                            const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line))
    throw InputError(source_name + ": empty metrics table");
  if (strip_cr(line) != kHeader)
    throw InputError(source_name + ": expected header '" + kHeader +
                     "', got '" + strip_cr(line) + "'");

  std::vector<DownstreamRecord> records;
  std::map<std::tuple<std::string, std::uint64_t, std::uint32_t, std::string>,
           std::uint64_t>
      seen;  // key -> first line number
  std::uint64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);

    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 6)
      throw InputError(where + ": expected 6 fields, got " +
                       std::to_string(fields.size()));

    DownstreamRecord record;
    record.run_id = fields[0];
    record.step = parse_unsigned<std::uint64_t>(fields[1], where);
    record.layer = parse_unsigned<std::uint32_t>(fields[2], where);
    record.task = fields[3];
    record.metric_value = parse_metric(fields[4], where);
    if (fields[5] == "higher")
      record.orientation = Orientation::higher_is_better;
    else if (fields[5] == "lower")
      record.orientation = Orientation::lower_is_better;
    else
      throw InputError(where + ": unknown orientation '" + fields[5] +
                       "' (expected 'higher' or 'lower')");

    const auto key =
        std::make_tuple(record.run_id, record.step, record.layer, record.task);
    const auto [it, inserted] = seen.emplace(key, line_no);
    if (!inserted)
      throw InputError(source_name + ": duplicate key (" + record.run_id +
                       "," + std::to_string(record.step) + "," +
                       std::to_string(record.layer) + "," + record.task +
                       ") at lines " + std::to_string(it->second) + " and " +
                       std::to_string(line_no));
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<DownstreamRecord> read_metrics(const std::filesystem::path& source) {
  std::ifstream in(source);
  if (!in) throw InputError(source.string() + ": cannot open for reading");
  return parse_metrics(in, source.string());
}

}  // namespace rkmt
