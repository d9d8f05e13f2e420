#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rkmt/sampling.hpp"
#include "rkmt/synth.hpp"
#include "test_util.hpp"

using namespace rkmt;

namespace {

Vector sigmas_of(std::initializer_list<double> values) {
  return Eigen::Map<const Vector>(std::data(values),
                                  static_cast<Eigen::Index>(values.size()));
}

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("1x1 plant is a unit scalar") {
  SpectrumPlan plan{sigmas_of({1.0}), 1, 1, LengthLaw::constant(1), 3};
  const Matrix m = plant_matrix(plan);
  CHECK(std::abs(std::abs(m(0, 0)) - 1.0) <= 1e-12);
}

TEST_CASE("planted spectrum is recovered from a tall matrix") {
  SpectrumPlan plan{sigmas_of({4, 2, 1, 1}), 100, 10,
                    LengthLaw::constant(1), 11};
  const Matrix m = plant_matrix(plan);
  const SingularSpectrum s = singular_values(m);
  REQUIRE(s.values.size() == 10);
  CHECK(std::abs(s.values(0) - 4) <= 1e-9);
  CHECK(std::abs(s.values(1) - 2) <= 1e-9);
  CHECK(std::abs(s.values(2) - 1) <= 1e-9);
  CHECK(std::abs(s.values(3) - 1) <= 1e-9);
  for (Eigen::Index i = 4; i < 10; ++i) CHECK(std::abs(s.values(i)) <= 1e-9);
  CHECK(std::abs(rankme(m).value - 3.363586) <= 1e-6);
}

TEST_CASE("flat spectrum reaches full rank") {
  SpectrumPlan plan{Vector::Ones(6), 50, 6, LengthLaw::constant(1), 17};
  CHECK(std::abs(rankme(plant_matrix(plan)).value - 6.0) <= 1e-9);
}

TEST_CASE("length-1 sequences equal the planted rows") {
  SpectrumPlan plan{sigmas_of({3, 1}), 8, 4, LengthLaw::constant(1), 23};
  const Matrix m = plant_matrix(plan);
  const auto set = plant_sequences(plan);
  REQUIRE(set.size() == 8);
  for (Eigen::Index i = 0; i < 8; ++i) {
    REQUIRE(set.sequence(i).rows() == 1);
    CHECK(set.sequence(i).row(0) == m.row(i));
  }
}

TEST_CASE("pooled sequences recover the planted matrix") {
  SpectrumPlan plan{sigmas_of({4, 2, 1, 1}), 40, 8,
                    LengthLaw::uniform(1, 5), 29};
  const Matrix planted = plant_matrix(plan);
  const Matrix pooled = temporal_pool(plant_sequences(plan));
  CHECK((pooled - planted).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(rankme_t(plant_sequences(plan)).value - 3.3635857) <= 1e-6);
}

TEST_CASE("oracle closure on random plans") {
  std::mt19937 rng(97);
  std::uniform_int_distribution<int> n_dist(2, 60);
  std::uniform_int_distribution<int> d_dist(1, 12);
  std::uniform_real_distribution<double> sigma(0.1, 9.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = n_dist(rng);
    const Eigen::Index d = d_dist(rng);
    const Eigen::Index r = std::min<Eigen::Index>(std::min(n, d), 6);
    std::vector<double> values;
    for (Eigen::Index i = 0; i < r; ++i) values.push_back(sigma(rng));
    std::sort(values.rbegin(), values.rend());
    SpectrumPlan plan;
    plan.target_sigmas = Eigen::Map<const Vector>(
        values.data(), static_cast<Eigen::Index>(values.size()));
    plan.n = n;
    plan.d = d;
    plan.lengths = LengthLaw::uniform(1, 6);
    plan.seed = static_cast<std::uint64_t>(1000 + trial);

    SingularSpectrum target;
    target.values = plan.target_sigmas;
    target.rows = n;
    target.cols = d;
    const double planned = effective_rank(target).value;
    CHECK(std::abs(rankme_t(plant_sequences(plan)).value - planned) <= 1e-6);
  }
}

TEST_CASE("plant validation") {
  SpectrumPlan plan{sigmas_of({1, 2}), 4, 4, LengthLaw::constant(1), 1};
  CHECK_THROWS_WITH_AS(plant_matrix(plan), doctest::Contains("nonincreasing"),
                       InputError);
  plan.target_sigmas = sigmas_of({1, 1, 1, 1, 1});
  CHECK_THROWS_WITH_AS(plant_matrix(plan), doctest::Contains("exceed"),
                       InputError);
  plan.target_sigmas = sigmas_of({-1.0});
  CHECK_THROWS_AS(plant_matrix(plan), InputError);
  CHECK_THROWS_AS(geometric_spectrum(0, 0.5), InputError);
  CHECK_THROWS_AS(geometric_spectrum(4, 0.0), InputError);
  CHECK_THROWS_AS(geometric_spectrum(4, 1.5), InputError);
}

TEST_CASE("geometric spectra flatten as decay grows") {
  SingularSpectrum low, high;
  low.values = geometric_spectrum(12, 0.5);
  high.values = geometric_spectrum(12, 0.9);
  CHECK(effective_rank(low).value < effective_rank(high).value);
}

TEST_CASE("plant_run writes the full layout deterministically") {
  testutil::TempDir dir_a, dir_b;
  TrajectoryPlan plan;
  plan.run_id = "synth-a";
  plan.steps = {10, 20, 30};
  plan.layers = {{0, 0.5, 0.8}, {3, 0.6, 0.9}};
  plan.n = 24;
  plan.d = 6;
  plan.lengths = LengthLaw::uniform(1, 4);
  plan.seed = 404;

  const PlantedRun a = plant_run(plan, dir_a.path() / "run");
  const PlantedRun b = plant_run(plan, dir_b.path() / "run");

  CHECK(a.cells.size() == 6);
  for (std::uint64_t step : {10, 20, 30})
    for (std::uint32_t layer : {0, 3}) {
      const auto rel = "step-" + std::to_string(step) + "/layer-" +
                       std::to_string(layer) + ".rkmt";
      const auto path_a = dir_a.path() / "run" / rel;
      REQUIRE(std::filesystem::exists(path_a));
      CHECK(slurp(path_a) == slurp(dir_b.path() / "run" / rel));
    }
  CHECK(slurp(a.sidecar_path) == slurp(b.sidecar_path));

  const auto cells = load_sidecar(a.sidecar_path);
  REQUIRE(cells.size() == 6);
  // increasing decay -> strictly increasing planned rank per layer
  for (std::uint32_t layer : {0, 3}) {
    std::vector<double> ranks;
    for (const PlannedCell& cell : cells)
      if (cell.layer == layer) ranks.push_back(cell.planned_rank);
    REQUIRE(ranks.size() == 3);
    CHECK(ranks[0] < ranks[1]);
    CHECK(ranks[1] < ranks[2]);
  }

  const RunManifest manifest = load_manifest(a.manifest_path);
  CHECK(manifest.run_id == "synth-a");
  CHECK(manifest.steps == std::vector<std::uint64_t>{10, 20, 30});
  CHECK(manifest.layers == std::vector<std::uint32_t>{0, 3});
  CHECK(manifest.sample_k == 24);
  CHECK(manifest.sample_seed == 404);
}

TEST_CASE("trajectory plan json round trip") {
  testutil::TempDir dir;
  const auto path = dir.path() / "plan.json";
  std::ofstream(path) << R"({
    "run_id": "demo",
    "steps": [5, 10],
    "layers": [{"index": 0, "decay_start": 0.4, "decay_end": 0.7}],
    "n": 16, "d": 4,
    "length_law": {"kind": "uniform", "min": 2, "max": 3},
    "seed": 9,
    "sample_k": 12,
    "dtype": "f32"
  })";
  const TrajectoryPlan plan = load_trajectory_plan(path);
  CHECK(plan.run_id == "demo");
  CHECK(plan.steps == std::vector<std::uint64_t>{5, 10});
  REQUIRE(plan.layers.size() == 1);
  CHECK(plan.layers[0].decay_end == 0.7);
  CHECK(plan.n == 16);
  CHECK(plan.lengths.kind == LengthLaw::Kind::uniform);
  CHECK(plan.sample_k == 12);
  CHECK(plan.dtype == DType::f32);

  std::ofstream(path) << R"({"run_id": "x"})";
  CHECK_THROWS_AS(load_trajectory_plan(path), InputError);
}

TEST_CASE("trajectory validation") {
  TrajectoryPlan plan;
  plan.run_id = "bad";
  plan.steps = {10, 10};
  plan.layers = {{0, 0.5, 0.6}};
  plan.n = 4;
  plan.d = 2;
  testutil::TempDir dir;
  CHECK_THROWS_WITH_AS(plant_run(plan, dir.path() / "r"),
                       doctest::Contains("strictly increasing"), InputError);
}

TEST_SUITE_END();
