#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rkmt/error.hpp"
#include "rkmt/prng.hpp"
#include "rkmt/temporal.hpp"

namespace rkmt {

// The k sequence indices a partial Fisher-Yates shuffle selects from
// [0, n). Driven by the pinned splitmix64 generator (docs/FORMATS.md), so
// the same (n, k, seed) selects the same indices everywhere — the fixed
// utterance subset that makes ranks comparable across checkpoints.
inline std::vector<std::uint64_t> sample_indices(std::uint64_t n,
                                                 std::uint64_t k,
                                                 std::uint64_t seed) {
  if (k < 1 || k > n)
    throw InputError("sample size k=" + std::to_string(k) +
                     " out of range [1, " + std::to_string(n) + "]");
  std::vector<std::uint64_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::uint64_t{0});
  SplitMix64 gen(seed);
  for (std::uint64_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + gen.next_below(n - i);
    std::swap(indices[i], indices[j]);
  }
  indices.resize(k);
  return indices;
}

template <typename Scalar>
EmbeddingSequenceSet<Scalar> sample_sequences(
    const EmbeddingSequenceSet<Scalar>& set, std::uint64_t k,
    std::uint64_t seed) {
  const std::vector<std::uint64_t> indices =
      sample_indices(static_cast<std::uint64_t>(set.size()), k, seed);
  std::vector<FrameMatrix<Scalar>> picked;
  picked.reserve(indices.size());
  for (std::uint64_t idx : indices)
    picked.push_back(set.sequence(static_cast<Eigen::Index>(idx)));
  return EmbeddingSequenceSet<Scalar>(std::move(picked));
}

}  // namespace rkmt
