#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "rkmt/temporal.hpp"

namespace rkmt {

// Storage dtype of an RKMT container payload. Tooling defaults to f32 for
// half-size dumps; compute always widens to 64-bit.
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::uint64_t kContainerHeaderBytes = 25;

inline std::size_t dtype_width(DType dtype) {
  return dtype == DType::f32 ? 4 : 8;
}

// A container holds either f32 or f64 payloads; which one is only known
// after reading the header.
using AnySequenceSet =
    std::variant<EmbeddingSequenceSet<float>, EmbeddingSequenceSet<double>>;

// Serializes the set in the RKMT layout (docs/FORMATS.md): 25-byte header,
// then per sequence a u64 length and length*dim row-major values in dtype,
// everything little-endian. Returns the total bytes written. Writing an f64
// set with dtype f32 narrows values; round-trips are value-exact only when
// the dtype can represent the scalars.
template <typename Scalar>
std::uint64_t write_container(const EmbeddingSequenceSet<Scalar>& set,
                              DType dtype, const std::filesystem::path& dest);

// Validates magic, version and shape; truncation errors carry the byte
// offset of the failure and expected-vs-available counts.
AnySequenceSet read_container(const std::filesystem::path& source);

// Reads and widens to f64; the compute-side convenience.
EmbeddingSequenceSet<double> read_container_f64(
    const std::filesystem::path& source);

}  // namespace rkmt
