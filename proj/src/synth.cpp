#include "rkmt/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rkmt/prng.hpp"

namespace rkmt {
namespace {

void validate_lengths(const LengthLaw& law) {
  if (law.kind == LengthLaw::Kind::constant) {
    if (law.constant_length < 1)
      throw InputError("length law: constant length must be >= 1");
  } else {
    if (law.min_length < 1)
      throw InputError("length law: min length must be >= 1");
    if (law.max_length < law.min_length)
      throw InputError("length law: max length must be >= min length");
  }
}

std::uint64_t draw_length(const LengthLaw& law, SplitMix64& gen) {
  if (law.kind == LengthLaw::Kind::constant) return law.constant_length;
  return law.min_length + gen.next_below(law.max_length - law.min_length + 1);
}

void validate_plan(const SpectrumPlan& plan) {
  if (plan.n < 1 || plan.d < 1)
    throw InputError("spectrum plan: n and d must be >= 1");
  const Eigen::Index r = plan.target_sigmas.size();
  if (r < 1) throw InputError("spectrum plan: target spectrum is empty");
  if (r > std::min(plan.n, plan.d))
    throw InputError("spectrum plan: " + std::to_string(r) +
                     " singular values exceed min(n, d) = " +
                     std::to_string(std::min(plan.n, plan.d)));
  for (Eigen::Index i = 0; i < r; ++i) {
    if (plan.target_sigmas(i) < 0)
      throw InputError("spectrum plan: singular values must be nonnegative");
    if (i > 0 && plan.target_sigmas(i) > plan.target_sigmas(i - 1))
      throw InputError("spectrum plan: singular values must be nonincreasing");
  }
  validate_lengths(plan.lengths);
}

// Orthonormal columns from a seeded Gaussian matrix: modified Gram-Schmidt
// with one re-orthogonalization pass, enough for ~1e-14 orthogonality and
// hence 1e-9 spectrum recovery.
Matrix orthonormal_columns(Eigen::Index rows, Eigen::Index cols,
                           SplitMix64& gen) {
  Matrix q(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) q(i, j) = gen.next_gaussian();

  for (Eigen::Index j = 0; j < cols; ++j) {
    auto col = q.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < j; ++i)
        col -= q.col(i).dot(col) * q.col(i);
    double norm = col.norm();
    while (norm < 1e-8) {  // vanishing column: refill and redo
      for (Eigen::Index i = 0; i < rows; ++i) col(i) = gen.next_gaussian();
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index i = 0; i < j; ++i)
          col -= q.col(i).dot(col) * q.col(i);
      norm = col.norm();
    }
    col /= norm;
  }
  return q;
}

LengthLaw length_law_from_json(const nlohmann::ordered_json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "constant")
    return LengthLaw::constant(doc.at("length").get<std::uint64_t>());
  if (kind == "uniform")
    return LengthLaw::uniform(doc.at("min").get<std::uint64_t>(),
                              doc.at("max").get<std::uint64_t>());
  throw InputError("length law: unknown kind '" + kind +
                   "' (expected constant or uniform)");
}

}  // namespace

Matrix plant_matrix(const SpectrumPlan& plan) {
  validate_plan(plan);
  const Eigen::Index r = plan.target_sigmas.size();
  SplitMix64 gen(mix_seed(plan.seed, 1));
  const Matrix u = orthonormal_columns(plan.n, r, gen);
  const Matrix v = orthonormal_columns(plan.d, r, gen);
  return u * plan.target_sigmas.asDiagonal() * v.transpose();
}

EmbeddingSequenceSet<double> plant_sequences(const SpectrumPlan& plan) {
  const Matrix planted = plant_matrix(plan);
  SplitMix64 length_gen(mix_seed(plan.seed, 2));
  SplitMix64 share_gen(mix_seed(plan.seed, 3));

  std::vector<FrameMatrix<double>> sequences;
  sequences.reserve(static_cast<std::size_t>(plan.n));
  for (Eigen::Index i = 0; i < plan.n; ++i) {
    const Eigen::Index frames =
        static_cast<Eigen::Index>(draw_length(plan.lengths, length_gen));
    FrameMatrix<double> seq(frames, plan.d);
    if (frames == 1) {
      seq.row(0) = planted.row(i);
    } else {
      // Convex shares: draws bounded away from zero, normalized, last share
      // forced to close the sum to exactly 1.
      Vector shares(frames);
      double total = 0.0;
      for (Eigen::Index t = 0; t < frames; ++t) {
        shares(t) = 0.25 + 0.75 * share_gen.next_unit();
        total += shares(t);
      }
      double partial = 0.0;
      for (Eigen::Index t = 0; t + 1 < frames; ++t) {
        shares(t) /= total;
        partial += shares(t);
      }
      shares(frames - 1) = 1.0 - partial;
      for (Eigen::Index t = 0; t < frames; ++t)
        seq.row(t) = shares(t) * planted.row(i);
    }
    sequences.push_back(std::move(seq));
  }
  return EmbeddingSequenceSet<double>(std::move(sequences));
}

Vector geometric_spectrum(Eigen::Index count, double decay) {
  if (count < 1) throw InputError("geometric spectrum: count must be >= 1");
  if (!(decay > 0.0) || decay > 1.0)
    throw InputError("geometric spectrum: decay must be in (0, 1]");
  Vector sigmas(count);
  double value = 1.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    sigmas(i) = value;
    value *= decay;
  }
  return sigmas;
}

PlantedRun plant_run(const TrajectoryPlan& plan,
                     const std::filesystem::path& root) {
  if (plan.run_id.empty()) throw InputError("trajectory plan: run_id is empty");
  if (plan.steps.empty()) throw InputError("trajectory plan: steps is empty");
  if (plan.layers.empty()) throw InputError("trajectory plan: layers is empty");
  for (std::size_t i = 1; i < plan.steps.size(); ++i)
    if (plan.steps[i] <= plan.steps[i - 1])
      throw InputError("trajectory plan: steps must be strictly increasing");
  for (std::size_t i = 1; i < plan.layers.size(); ++i)
    if (plan.layers[i].index <= plan.layers[i - 1].index)
      throw InputError("trajectory plan: layer indices must be strictly increasing");
  if (plan.n < 1 || plan.d < 1)
    throw InputError("trajectory plan: n and d must be >= 1");
  validate_lengths(plan.lengths);

  std::filesystem::create_directories(root);

  PlantedRun run;
  run.manifest.run_id = plan.run_id;
  run.manifest.root = root;
  for (const TrajectoryLayerPlan& layer : plan.layers)
    run.manifest.layers.push_back(layer.index);
  run.manifest.steps = plan.steps;
  run.manifest.sample_k =
      plan.sample_k > 0 ? plan.sample_k : static_cast<std::uint64_t>(plan.n);
  run.manifest.sample_seed = plan.seed;
  run.manifest.hyper_params["source"] = "synthetic";
  for (const TrajectoryLayerPlan& layer : plan.layers) {
    std::ostringstream schedule;
    schedule << layer.decay_start << ".." << layer.decay_end;
    run.manifest.hyper_params["decay.layer-" + std::to_string(layer.index)] =
        schedule.str();
  }

  const Eigen::Index r = std::min(plan.n, plan.d);
  const std::size_t step_count = plan.steps.size();
  for (std::size_t si = 0; si < step_count; ++si) {
    const std::uint64_t step = plan.steps[si];
    const double fraction =
        step_count == 1 ? 0.0
                        : static_cast<double>(si) /
                              static_cast<double>(step_count - 1);
    const std::filesystem::path step_dir =
        root / ("step-" + std::to_string(step));
    std::filesystem::create_directories(step_dir);

    for (const TrajectoryLayerPlan& layer : plan.layers) {
      const double decay =
          layer.decay_start + (layer.decay_end - layer.decay_start) * fraction;

      SpectrumPlan cell;
      cell.target_sigmas = geometric_spectrum(r, decay);
      cell.n = plan.n;
      cell.d = plan.d;
      cell.lengths = plan.lengths;
      cell.seed = mix_seed(plan.seed, step, layer.index);

      const EmbeddingSequenceSet<double> set = plant_sequences(cell);
      write_container(set, plan.dtype,
                      step_dir / ("layer-" + std::to_string(layer.index) +
                                  ".rkmt"));

      SingularSpectrum planted;
      planted.values = cell.target_sigmas;
      planted.rows = plan.n;
      planted.cols = plan.d;
      run.cells.push_back(
          {step, layer.index, effective_rank(planted).value});
    }
  }

  run.sidecar_path = root / "planned_ranks.csv";
  {
    std::ofstream out(run.sidecar_path, std::ios::trunc);
    if (!out)
      throw InputError(run.sidecar_path.string() + ": cannot open for writing");
    out << "step,layer,planned_rank\n";
    char buf[40];
    for (const PlannedCell& cell : run.cells) {
      std::snprintf(buf, sizeof(buf), "%.15g", cell.planned_rank);
      out << cell.step << "," << cell.layer << "," << buf << "\n";
    }
  }

  run.manifest_path = root / "manifest.json";
  RunManifest to_save = run.manifest;
  to_save.root = ".";  // keep the written manifest relocatable
  save_manifest(to_save, run.manifest_path);
  return run;
}

TrajectoryPlan load_trajectory_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open for reading");
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }

  TrajectoryPlan plan;
  try {
    plan.run_id = doc.at("run_id").get<std::string>();
    plan.steps = doc.at("steps").get<std::vector<std::uint64_t>>();
    for (const auto& layer : doc.at("layers")) {
      TrajectoryLayerPlan entry;
      entry.index = layer.at("index").get<std::uint32_t>();
      entry.decay_start = layer.at("decay_start").get<double>();
      entry.decay_end = layer.at("decay_end").get<double>();
      plan.layers.push_back(entry);
    }
    plan.n = doc.at("n").get<Eigen::Index>();
    plan.d = doc.at("d").get<Eigen::Index>();
    plan.lengths = length_law_from_json(doc.at("length_law"));
    plan.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("sample_k"))
      plan.sample_k = doc.at("sample_k").get<std::uint64_t>();
    if (doc.contains("dtype")) {
      const std::string dtype = doc.at("dtype").get<std::string>();
      if (dtype == "f32") plan.dtype = DType::f32;
      else if (dtype == "f64") plan.dtype = DType::f64;
      else throw InputError(path.string() + ": unknown dtype '" + dtype + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return plan;
}

std::vector<PlannedCell> load_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != "step,layer,planned_rank")
    throw InputError(path.string() + ": expected header step,layer,planned_rank");
  std::vector<PlannedCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    PlannedCell cell;
    char* cursor = line.data();
    cell.step = std::strtoull(cursor, &cursor, 10);
    if (*cursor != ',') throw InputError(path.string() + ": malformed row: " + line);
    cell.layer = static_cast<std::uint32_t>(std::strtoul(cursor + 1, &cursor, 10));
    if (*cursor != ',') throw InputError(path.string() + ": malformed row: " + line);
    cell.planned_rank = std::strtod(cursor + 1, &cursor);
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace rkmt
