#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rkmt {

// Describes one training run's embedding dumps: which (step, layer) cells
// exist and how ranks are to be sampled. Containers live by convention at
// root/step-<step>/layer-<layer>.rkmt; path_overrides (keyed "<step>/<layer>")
// relocate individual cells.
struct RunManifest {
  std::string run_id;
  std::filesystem::path root;
  std::vector<std::uint32_t> layers;  // strictly increasing
  std::vector<std::uint64_t> steps;   // strictly increasing
  std::uint64_t sample_k = 0;
  std::uint64_t sample_seed = 0;
  std::map<std::string, std::string> hyper_params;
  std::map<std::string, std::filesystem::path> path_overrides;
};

// Throws InputError when layers/steps are empty or not strictly
// increasing, sample_k is 0, or run_id is empty.
void validate(const RunManifest& manifest);

// Loads manifest JSON (schema in docs/FORMATS.md); a relative root is
// resolved against the manifest's own directory.
RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const RunManifest& manifest,
                   const std::filesystem::path& path);

std::filesystem::path container_path(const RunManifest& manifest,
                                     std::uint64_t step, std::uint32_t layer);

}  // namespace rkmt
