#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "rkmt/error.hpp"

namespace rkmt {

// All spectral computation runs in 64-bit floats regardless of how the
// embeddings are stored; entropy of a near-degenerate spectrum is too
// precision-sensitive for anything less.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Singular values of one embedding matrix, sorted nonincreasing, together
// with the shape they came from.
struct SingularSpectrum {
  Vector values;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

// exp(entropy) of the l1-normalized spectrum: a soft count of used
// dimensions, between 1 and the number of retained singular values.
struct EffectiveRank {
  double value = 0.0;
  Eigen::Index retained = 0;
};

enum class SpectrumMethod {
  kAuto,  // Gram path for tall matrices (rows > 4 * cols), full SVD otherwise
  kSvd,
  kGram,
};

// Singular values below kSpectrumTruncation * sigma_1 are treated as
// numerically zero and dropped before normalization.
inline constexpr double kSpectrumTruncation = 1e-12;

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m,
                  const std::string& what = "embedding matrix") {
  if (m.allFinite()) return;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(static_cast<double>(m(i, j))))
        throw InputError(what + ": non-finite value at row " +
                         std::to_string(i) + ", column " + std::to_string(j));
}

// Singular values of m, nonincreasing. The Gram path squares the condition
// number, so it is only selected automatically when the matrix is tall
// enough for the d x d eigensolve to be a clear win.
template <typename Derived>
SingularSpectrum singular_values(const Eigen::MatrixBase<Derived>& m,
                                 SpectrumMethod method = SpectrumMethod::kAuto) {
  const Eigen::Index n = m.rows();
  const Eigen::Index d = m.cols();
  if (n < 1 || d < 1) throw InputError("embedding matrix must be at least 1x1");
  check_finite(m);

  SingularSpectrum spectrum;
  spectrum.rows = n;
  spectrum.cols = d;

  const bool use_gram = method == SpectrumMethod::kGram ||
                        (method == SpectrumMethod::kAuto && n > 4 * d);
  if (use_gram) {
    // Eigendecompose the Gram matrix of the smaller side; eigenvalues are
    // squared singular values, clamped at zero before the square root.
    const Eigen::Index k = std::min(n, d);
    Matrix gram = Matrix::Zero(k, k);
    if (n >= d)
      gram.template selfadjointView<Eigen::Lower>().rankUpdate(
          m.template cast<double>().transpose());
    else
      gram.template selfadjointView<Eigen::Lower>().rankUpdate(
          m.template cast<double>());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("Gram eigendecomposition failed to converge");
    // The square root amplifies eigenvalue round-off near zero into
    // O(sigma_1 * sqrt(eps)) singular values; eigenvalues below the
    // backward-error floor are numerically zero.
    Vector lambdas = eig.eigenvalues().cwiseMax(0.0);
    const double floor = lambdas(k - 1) * static_cast<double>(k) * 4.0 *
                         std::numeric_limits<double>::epsilon();
    spectrum.values =
        (lambdas.array() < floor).select(0.0, lambdas).cwiseSqrt().reverse();
  } else {
    Eigen::BDCSVD<Matrix> svd(m.template cast<double>());
    if (svd.info() != Eigen::Success)
      throw std::runtime_error("SVD failed to converge");
    spectrum.values = svd.singularValues();
  }
  return spectrum;
}

// Effective rank of a spectrum: p_i = sigma_i / ||sigma||_1 over the
// retained values, result exp(-sum p_i log p_i) in natural log.
inline EffectiveRank effective_rank(const SingularSpectrum& spectrum) {
  const Vector& sigma = spectrum.values;
  if (sigma.size() == 0) throw InputError("empty singular spectrum");
  const double top = sigma(0);
  if (!(top > 0.0)) throw InputError("zero embedding: rank undefined");

  const double cutoff = kSpectrumTruncation * top;
  Eigen::Index retained = 0;
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) < cutoff) break;  // sorted nonincreasing: the rest are below
    l1 += sigma(i);
    ++retained;
  }

  double entropy = 0.0;
  for (Eigen::Index i = 0; i < retained; ++i) {
    const double p = sigma(i) / l1;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return {std::exp(entropy), retained};
}

template <typename Derived>
EffectiveRank rankme(const Eigen::MatrixBase<Derived>& m,
                     SpectrumMethod method = SpectrumMethod::kAuto) {
  return effective_rank(singular_values(m, method));
}

}  // namespace rkmt
