#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "rkmt/error.hpp"
#include "rkmt/spectral.hpp"

namespace rkmt {

// One sequence is a T' x d block of frame embeddings. Row-major so a
// sequence maps directly onto its container record.
template <typename Scalar>
using FrameMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n variable-length embedding sequences sharing one width d.
// Invariants, checked at construction: at least one sequence, every
// sequence nonempty, every sequence d columns wide, every value finite.
template <typename Scalar>
class EmbeddingSequenceSet {
 public:
  explicit EmbeddingSequenceSet(std::vector<FrameMatrix<Scalar>> sequences)
      : sequences_(std::move(sequences)) {
    if (sequences_.empty()) throw InputError("sequence set is empty");
    dim_ = sequences_[0].cols();
    if (dim_ < 1) throw InputError("sequence 0: dimension must be >= 1");
    for (std::size_t i = 0; i < sequences_.size(); ++i) {
      const FrameMatrix<Scalar>& seq = sequences_[i];
      if (seq.rows() < 1)
        throw InputError("sequence " + std::to_string(i) + " has no frames");
      if (seq.cols() != dim_)
        throw InputError("sequence " + std::to_string(i) + ": dimension " +
                         std::to_string(seq.cols()) + " does not match " +
                         std::to_string(dim_));
      check_finite(seq, "sequence " + std::to_string(i));
      max_length_ = std::max(max_length_, seq.rows());
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(sequences_.size()); }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index max_length() const { return max_length_; }

  const FrameMatrix<Scalar>& sequence(Eigen::Index i) const {
    return sequences_[static_cast<std::size_t>(i)];
  }
  const std::vector<FrameMatrix<Scalar>>& sequences() const { return sequences_; }

 private:
  std::vector<FrameMatrix<Scalar>> sequences_;
  Eigen::Index dim_ = 0;
  Eigen::Index max_length_ = 0;
};

// Sum-pools each sequence over time: row i is sum_t frames_i(t), accumulated
// in frame order in 64-bit. The order is part of the contract; it makes the
// padded-stack formulation below agree element-wise exactly.
template <typename Scalar>
Matrix temporal_pool(const EmbeddingSequenceSet<Scalar>& set) {
  Matrix pooled = Matrix::Zero(set.size(), set.dim());
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    const FrameMatrix<Scalar>& frames = set.sequence(i);
    for (Eigen::Index t = 0; t < frames.rows(); ++t)
      pooled.row(i) += frames.row(t).template cast<double>();
  }
  return pooled;
}

// Z^1 + Z^2 + ... + Z^{T'max} over the zero-padded per-timestep matrices,
// without materializing them: timestep t contributes row i only while the
// sequence is that long, and padding contributes nothing. Each output
// element receives the same additions in the same order as temporal_pool,
// so the two agree exactly, not just to rounding.
template <typename Scalar>
Matrix padded_stack_sum(const EmbeddingSequenceSet<Scalar>& set) {
  Matrix sum = Matrix::Zero(set.size(), set.dim());
  for (Eigen::Index t = 0; t < set.max_length(); ++t)
    for (Eigen::Index i = 0; i < set.size(); ++i) {
      const FrameMatrix<Scalar>& frames = set.sequence(i);
      if (t < frames.rows()) sum.row(i) += frames.row(t).template cast<double>();
    }
  return sum;
}

// Effective rank of the sum-pooled set.
template <typename Scalar>
EffectiveRank rankme_t(const EmbeddingSequenceSet<Scalar>& set,
                       SpectrumMethod method = SpectrumMethod::kAuto) {
  return rankme(temporal_pool(set), method);
}

// Mean-pooled variant: row i is (1 / T'_i) sum_t frames_i(t). Per-row
// normalization is not a global rescaling, so this can differ from
// rankme_t when lengths differ; with equal lengths the two coincide.
template <typename Scalar>
EffectiveRank rankme_t_mean(const EmbeddingSequenceSet<Scalar>& set,
                            SpectrumMethod method = SpectrumMethod::kAuto) {
  Matrix pooled = temporal_pool(set);
  for (Eigen::Index i = 0; i < set.size(); ++i)
    pooled.row(i) /= static_cast<double>(set.sequence(i).rows());
  return rankme(pooled, method);
}

}  // namespace rkmt
