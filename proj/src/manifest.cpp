#include "rkmt/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "rkmt/error.hpp"

namespace rkmt {
namespace {

using nlohmann::ordered_json;

template <typename T>
bool strictly_increasing(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(),
                            [](T a, T b) { return a >= b; }) == v.end();
}

}  // namespace

void validate(const RunManifest& manifest) {
  if (manifest.run_id.empty()) throw InputError("manifest: run_id is empty");
  if (manifest.layers.empty()) throw InputError("manifest: layers is empty");
  if (manifest.steps.empty()) throw InputError("manifest: steps is empty");
  if (!strictly_increasing(manifest.layers))
    throw InputError("manifest: layers must be strictly increasing");
  if (!strictly_increasing(manifest.steps))
    throw InputError("manifest: steps must be strictly increasing");
  if (manifest.sample_k < 1)
    throw InputError("manifest: sample_k must be >= 1");
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open for reading");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }

  RunManifest manifest;
  try {
    manifest.run_id = doc.at("run_id").get<std::string>();
    manifest.layers = doc.at("layers").get<std::vector<std::uint32_t>>();
    manifest.steps = doc.at("steps").get<std::vector<std::uint64_t>>();
    manifest.sample_k = doc.at("sample_k").get<std::uint64_t>();
    manifest.sample_seed = doc.at("sample_seed").get<std::uint64_t>();
    if (doc.contains("hyper_params"))
      manifest.hyper_params =
          doc.at("hyper_params").get<std::map<std::string, std::string>>();
    if (doc.contains("path_overrides"))
      for (const auto& [key, value] :
           doc.at("path_overrides").get<std::map<std::string, std::string>>())
        manifest.path_overrides[key] = value;
    std::filesystem::path root =
        doc.contains("root") ? doc.at("root").get<std::string>() : ".";
    manifest.root = root.is_absolute()
                        ? root
                        : path.parent_path().empty()
                              ? root
                              : path.parent_path() / root;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  validate(manifest);
  return manifest;
}

void save_manifest(const RunManifest& manifest,
                   const std::filesystem::path& path) {
  validate(manifest);
  ordered_json doc;
  doc["run_id"] = manifest.run_id;
  doc["root"] = manifest.root.string();
  doc["layers"] = manifest.layers;
  doc["steps"] = manifest.steps;
  doc["sample_k"] = manifest.sample_k;
  doc["sample_seed"] = manifest.sample_seed;
  doc["hyper_params"] = manifest.hyper_params;
  if (!manifest.path_overrides.empty()) {
    ordered_json overrides;
    for (const auto& [key, value] : manifest.path_overrides)
      overrides[key] = value.string();
    doc["path_overrides"] = overrides;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError(path.string() + ": cannot open for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw InputError(path.string() + ": write failed");
}

std::filesystem::path container_path(const RunManifest& manifest,
                                     std::uint64_t step, std::uint32_t layer) {
  const std::string key =
      std::to_string(step) + "/" + std::to_string(layer);
  if (const auto it = manifest.path_overrides.find(key);
      it != manifest.path_overrides.end()) {
    return it->second.is_absolute() ? it->second : manifest.root / it->second;
  }
  return manifest.root / ("step-" + std::to_string(step)) /
         ("layer-" + std::to_string(layer) + ".rkmt");
}

}  // namespace rkmt
