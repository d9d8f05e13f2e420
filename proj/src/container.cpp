#include "rkmt/container.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

namespace rkmt {
namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

constexpr char kMagic[4] = {'R', 'K', 'M', 'T'};

void put_u32(char* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u64(char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint32_t get_u32(const char* in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const char* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

template <typename Storage>
void write_values(std::ofstream& out, const Storage* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(Storage)));
  } else {
    std::vector<char> buf(count * sizeof(Storage));
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::array<char, sizeof(Storage)>>(data[i]);
      for (std::size_t b = 0; b < sizeof(Storage); ++b)
        buf[i * sizeof(Storage) + b] = bits[sizeof(Storage) - 1 - b];
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

template <typename Storage, typename Scalar>
void write_sequence(std::ofstream& out, const FrameMatrix<Scalar>& frames) {
  const std::size_t count = static_cast<std::size_t>(frames.size());
  if constexpr (std::is_same_v<Storage, Scalar>) {
    write_values(out, frames.data(), count);
  } else {
    std::vector<Storage> converted(count);
    const Scalar* src = frames.data();  // row-major contiguous
    for (std::size_t i = 0; i < count; ++i)
      converted[i] = static_cast<Storage>(src[i]);
    write_values(out, converted.data(), count);
  }
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw InputError(path_ + ": cannot open for reading");
  }

  // Reads exactly `count` bytes or reports the offset where the file ran dry.
  void read_exact(char* out, std::uint64_t count, const char* what) {
    in_.read(out, static_cast<std::streamsize>(count));
    const std::uint64_t got = static_cast<std::uint64_t>(in_.gcount());
    if (got != count)
      throw InputError(path_ + ": truncated " + what + ": expected " +
                       std::to_string(count) + " bytes at offset " +
                       std::to_string(offset_) + ", got " +
                       std::to_string(got));
    offset_ += count;
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

  std::uint64_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

template <typename Storage, typename Scalar>
FrameMatrix<Scalar> read_sequence(Reader& reader, std::uint64_t length,
                                  std::uint64_t dim) {
  FrameMatrix<Scalar> frames(static_cast<Eigen::Index>(length),
                             static_cast<Eigen::Index>(dim));
  const std::uint64_t count = length * dim;
  if constexpr (std::is_same_v<Storage, Scalar> &&
                std::endian::native == std::endian::little) {
    reader.read_exact(reinterpret_cast<char*>(frames.data()),
                      count * sizeof(Storage), "sequence payload");
  } else {
    std::vector<char> raw(count * sizeof(Storage));
    reader.read_exact(raw.data(), raw.size(), "sequence payload");
    Scalar* dst = frames.data();
    for (std::uint64_t i = 0; i < count; ++i) {
      std::array<char, sizeof(Storage)> bits;
      for (std::size_t b = 0; b < sizeof(Storage); ++b)
        bits[b] = std::endian::native == std::endian::little
                      ? raw[i * sizeof(Storage) + b]
                      : raw[i * sizeof(Storage) + sizeof(Storage) - 1 - b];
      dst[i] = static_cast<Scalar>(std::bit_cast<Storage>(bits));
    }
  }
  return frames;
}

template <typename Storage>
EmbeddingSequenceSet<Storage> read_body(Reader& reader, std::uint64_t n,
                                        std::uint64_t dim) {
  std::vector<FrameMatrix<Storage>> sequences;
  sequences.reserve(std::min<std::uint64_t>(n, 1 << 20));  // n is untrusted
  for (std::uint64_t i = 0; i < n; ++i) {
    char len_bytes[8];
    reader.read_exact(len_bytes, 8, "sequence length");
    const std::uint64_t length = get_u64(len_bytes);
    if (length == 0)
      throw InputError(reader.path() + ": sequence " + std::to_string(i) +
                       " has zero length at offset " +
                       std::to_string(reader.offset() - 8));
    if (length > std::numeric_limits<std::uint64_t>::max() / dim /
                     sizeof(Storage))
      throw InputError(reader.path() + ": sequence " + std::to_string(i) +
                       " payload size overflows");
    sequences.push_back(read_sequence<Storage, Storage>(reader, length, dim));
  }
  if (!reader.at_eof())
    throw InputError(reader.path() + ": trailing data at offset " +
                     std::to_string(reader.offset()));
  return EmbeddingSequenceSet<Storage>(std::move(sequences));
}

}  // namespace

template <typename Scalar>
std::uint64_t write_container(const EmbeddingSequenceSet<Scalar>& set,
                              DType dtype, const std::filesystem::path& dest) {
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(dest.string() + ": cannot open for writing");

  char header[kContainerHeaderBytes];
  std::memcpy(header, kMagic, 4);
  put_u32(header + 4, kContainerVersion);
  put_u64(header + 8, static_cast<std::uint64_t>(set.size()));
  put_u64(header + 16, static_cast<std::uint64_t>(set.dim()));
  header[24] = static_cast<char>(dtype);
  out.write(header, sizeof(header));

  std::uint64_t bytes = kContainerHeaderBytes;
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    const FrameMatrix<Scalar>& frames = set.sequence(i);
    char len_bytes[8];
    put_u64(len_bytes, static_cast<std::uint64_t>(frames.rows()));
    out.write(len_bytes, 8);
    if (dtype == DType::f32)
      write_sequence<float>(out, frames);
    else
      write_sequence<double>(out, frames);
    bytes += 8 + static_cast<std::uint64_t>(frames.size()) * dtype_width(dtype);
  }
  out.flush();
  if (!out) throw InputError(dest.string() + ": write failed");
  return bytes;
}

template std::uint64_t write_container<float>(
    const EmbeddingSequenceSet<float>&, DType, const std::filesystem::path&);
template std::uint64_t write_container<double>(
    const EmbeddingSequenceSet<double>&, DType, const std::filesystem::path&);

AnySequenceSet read_container(const std::filesystem::path& source) {
  Reader reader(source);

  char header[kContainerHeaderBytes];
  reader.read_exact(header, sizeof(header), "header");
  if (std::memcmp(header, kMagic, 4) != 0)
    throw InputError(reader.path() + ": bad magic at offset 0");
  const std::uint32_t version = get_u32(header + 4);
  if (version != kContainerVersion)
    throw InputError(reader.path() + ": unsupported version " +
                     std::to_string(version) + " at offset 4");
  const std::uint64_t n = get_u64(header + 8);
  const std::uint64_t dim = get_u64(header + 16);
  const std::uint8_t dtype_code = static_cast<std::uint8_t>(header[24]);
  if (n == 0) throw InputError(reader.path() + ": header: n_sequences is 0");
  if (dim == 0) throw InputError(reader.path() + ": header: dim is 0");
  if (dtype_code > 1)
    throw InputError(reader.path() + ": header: unknown dtype code " +
                     std::to_string(dtype_code));

  if (static_cast<DType>(dtype_code) == DType::f32)
    return read_body<float>(reader, n, dim);
  return read_body<double>(reader, n, dim);
}

EmbeddingSequenceSet<double> read_container_f64(
    const std::filesystem::path& source) {
  AnySequenceSet any = read_container(source);
  if (std::holds_alternative<EmbeddingSequenceSet<double>>(any))
    return std::get<EmbeddingSequenceSet<double>>(std::move(any));
  const EmbeddingSequenceSet<float>& narrow =
      std::get<EmbeddingSequenceSet<float>>(any);
  std::vector<FrameMatrix<double>> widened;
  widened.reserve(static_cast<std::size_t>(narrow.size()));
  for (Eigen::Index i = 0; i < narrow.size(); ++i)
    widened.push_back(narrow.sequence(i).cast<double>());
  return EmbeddingSequenceSet<double>(std::move(widened));
}

}  // namespace rkmt
