#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rkmt/container.hpp"
#include "rkmt/manifest.hpp"
#include "rkmt/spectral.hpp"
#include "rkmt/temporal.hpp"

namespace rkmt {

// How synthetic sequence lengths are drawn.
struct LengthLaw {
  enum class Kind { constant, uniform };
  Kind kind = Kind::constant;
  std::uint64_t constant_length = 1;
  std::uint64_t min_length = 1;  // uniform, inclusive
  std::uint64_t max_length = 1;

  static LengthLaw constant(std::uint64_t length) {
    LengthLaw law;
    law.kind = Kind::constant;
    law.constant_length = length;
    return law;
  }
  static LengthLaw uniform(std::uint64_t min_length, std::uint64_t max_length) {
    LengthLaw law;
    law.kind = Kind::uniform;
    law.min_length = min_length;
    law.max_length = max_length;
    return law;
  }
};

// A pooled matrix with exactly these singular values, realized as n
// sequences of d-dimensional frames.
struct SpectrumPlan {
  Vector target_sigmas;  // nonincreasing, nonnegative, length <= min(n, d)
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  LengthLaw lengths;
  std::uint64_t seed = 0;
};

// U diag(target_sigmas) V^T with seeded orthonormal U (n x r) and V (d x r);
// its singular values are the planted ones to ~1e-9.
Matrix plant_matrix(const SpectrumPlan& plan);

// Splits each planted row across its frames with convex shares that sum to
// exactly 1, so temporal_pool recovers the planted matrix and rankme_t the
// planned effective rank.
EmbeddingSequenceSet<double> plant_sequences(const SpectrumPlan& plan);

// Per-layer geometric-decay schedule: layer `index` plants sigma_i = q^i
// with q interpolated from decay_start to decay_end across the steps.
// Larger q means a flatter spectrum and a higher effective rank, so an
// increasing schedule imitates rank growth over training.
struct TrajectoryLayerPlan {
  std::uint32_t index = 0;
  double decay_start = 0.5;
  double decay_end = 0.9;
};

struct TrajectoryPlan {
  std::string run_id;
  std::vector<std::uint64_t> steps;  // strictly increasing
  std::vector<TrajectoryLayerPlan> layers;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  LengthLaw lengths;
  std::uint64_t seed = 0;
  std::uint64_t sample_k = 0;    // 0: use n
  DType dtype = DType::f64;      // f64 keeps the sidecar oracle exact
};

struct PlannedCell {
  std::uint64_t step = 0;
  std::uint32_t layer = 0;
  double planned_rank = 0.0;
};

struct PlantedRun {
  RunManifest manifest;
  std::filesystem::path manifest_path;
  std::filesystem::path sidecar_path;  // CSV: step,layer,planned_rank
  std::vector<PlannedCell> cells;
};

// Writes containers in the scanner's directory layout under root, plus
// manifest.json and the planned-rank sidecar. Identical plans produce
// byte-identical containers.
PlantedRun plant_run(const TrajectoryPlan& plan,
                     const std::filesystem::path& root);

// Plan JSON for the synth subcommand; schema in docs/FORMATS.md.
TrajectoryPlan load_trajectory_plan(const std::filesystem::path& path);

Vector geometric_spectrum(Eigen::Index count, double decay);

// Planned effective ranks recorded in a sidecar file, keyed (step, layer).
std::vector<PlannedCell> load_sidecar(const std::filesystem::path& path);

}  // namespace rkmt
