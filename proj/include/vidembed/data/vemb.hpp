#pragma once

// VEMB: checksummed little-endian container for one embedding matrix.
//
//   offset  size        field
//   0       4           magic "VEMB" (56 45 4D 42)
//   4       2           u16 version = 1
//   6       2           u16 flags   = 0 (1 marks a parameter bundle, see heads/params.hpp)
//   8       1           u8 dtype    (0 = float32, 1 = float64)
//   9       1           u8 rank     (1 or 2)
//   10      4·rank      u32 extents, outermost first
//   ...     numel·size  row-major payload
//   ...     4           u32 CRC-32 (IEEE 802.3, as zlib) of the payload bytes

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>

#include <zlib.h>

#include "vidembed/numeric/tensor.hpp"
#include "vidembed/util/files.hpp"

namespace vidembed {

static_assert(std::endian::native == std::endian::little, "VEMB I/O assumes a little-endian host");

inline constexpr char kVembMagic[4] = {'V', 'E', 'M', 'B'};
inline constexpr std::uint16_t kVembVersion = 1;
inline constexpr std::uint16_t kVembFlagBundle = 1;

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(Dtype d) { return d == Dtype::F32 ? 4 : 8; }

template <std::floating_point T>
constexpr Dtype dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Dtype::F32 : Dtype::F64;
}

struct VembInfo {
  Dtype dtype = Dtype::F32;
  Shape shape;
  std::size_t header_bytes = 0;
  std::size_t total_bytes = 0;
};

inline std::uint32_t crc32_ieee(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large payloads.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace detail {

template <class U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

template <class U>
U get(std::string_view in, std::size_t off) {
  U value;
  std::memcpy(&value, in.data() + off, sizeof(U));
  return value;
}

}  // namespace detail

/// Header fields of the record at the start of `bytes`; validates magic,
/// version, flags, dtype, rank and that the full record is present.
inline VembInfo parse_vemb_header(std::string_view bytes, std::uint16_t expected_flags = 0) {
  require(bytes.size() >= 4, Errc::TruncatedFile, "file shorter than the magic");
  require(std::memcmp(bytes.data(), kVembMagic, 4) == 0, Errc::BadMagic, "not a VEMB file");
  require(bytes.size() >= 10, Errc::TruncatedFile, "header cut short");
  const auto version = detail::get<std::uint16_t>(bytes, 4);
  require(version == kVembVersion, Errc::UnsupportedVersion, "version " + std::to_string(version));
  const auto flags = detail::get<std::uint16_t>(bytes, 6);
  require(flags == expected_flags, Errc::UnsupportedVersion,
          "flags " + std::to_string(flags) + ", expected " + std::to_string(expected_flags));
  if (expected_flags != 0) {
    VembInfo info;
    info.header_bytes = 8;
    return info;
  }
  const auto dtype = static_cast<std::uint8_t>(bytes[8]);
  const auto rank = static_cast<std::uint8_t>(bytes[9]);
  require(dtype <= 1, Errc::ParseError, "unknown dtype code " + std::to_string(dtype));
  require(rank == 1 || rank == 2, Errc::ParseError, "rank must be 1 or 2, got " + std::to_string(rank));
  VembInfo info;
  info.dtype = static_cast<Dtype>(dtype);
  info.header_bytes = 10 + 4 * static_cast<std::size_t>(rank);
  require(bytes.size() >= info.header_bytes, Errc::TruncatedFile, "extents cut short");
  std::size_t numel = 1;
  for (std::size_t r = 0; r < rank; ++r) {
    const auto e = detail::get<std::uint32_t>(bytes, 10 + 4 * r);
    require(e > 0, Errc::ParseError, "zero extent");
    info.shape.push_back(e);
    numel *= e;
  }
  info.total_bytes = info.header_bytes + numel * dtype_size(info.dtype) + 4;
  require(bytes.size() >= info.total_bytes, Errc::TruncatedFile,
          "expected " + std::to_string(info.total_bytes) + " bytes, have " + std::to_string(bytes.size()));
  return info;
}

template <std::floating_point T>
std::string encode_vemb(const Tensor<T>& m) {
  require(m.rank() == 1 || m.rank() == 2, Errc::ShapeMismatch, "VEMB stores rank 1 or 2 only");
  std::string out(kVembMagic, 4);
  detail::put<std::uint16_t>(out, kVembVersion);
  detail::put<std::uint16_t>(out, 0);
  out.push_back(static_cast<char>(dtype_of<T>()));
  out.push_back(static_cast<char>(m.rank()));
  for (auto e : m.shape()) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  const std::size_t start = out.size();
  out.append(reinterpret_cast<const char*>(m.data().data()), m.size() * sizeof(T));
  detail::put<std::uint32_t>(out, crc32_ieee(std::string_view(out).substr(start)));
  return out;
}

/// Decodes the record at the start of `bytes`, converting the payload to T.
/// `consumed` receives the record length so records can be concatenated.
template <std::floating_point T>
Tensor<T> decode_vemb(std::string_view bytes, std::size_t* consumed = nullptr) {
  const auto info = parse_vemb_header(bytes);
  const std::size_t numel = shape_numel(info.shape);
  const auto payload = bytes.substr(info.header_bytes, numel * dtype_size(info.dtype));
  const auto stored = detail::get<std::uint32_t>(bytes, info.total_bytes - 4);
  require(crc32_ieee(payload) == stored, Errc::ChecksumMismatch, "payload CRC-32 mismatch");
  std::vector<T> data(numel);
  if (info.dtype == Dtype::F32) {
    for (std::size_t i = 0; i < numel; ++i) data[i] = static_cast<T>(detail::get<float>(payload, 4 * i));
  } else {
    for (std::size_t i = 0; i < numel; ++i) data[i] = static_cast<T>(detail::get<double>(payload, 8 * i));
  }
  if (consumed) *consumed = info.total_bytes;
  return Tensor<T>(info.shape, std::move(data));
}

template <std::floating_point T>
void write_embeddings(const std::filesystem::path& path, const Tensor<T>& m) {
  write_file_atomic(path, encode_vemb(m));
}

/// Reads a single-record VEMB file; trailing bytes are rejected.
template <std::floating_point T>
Tensor<T> read_embeddings(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t used = 0;
  auto m = decode_vemb<T>(bytes, &used);
  require(used == bytes.size(), Errc::ParseError, path.string() + ": trailing bytes after record");
  return m;
}

inline VembInfo read_vemb_info(const std::filesystem::path& path) {
  return parse_vemb_header(read_file(path));
}

}  // namespace vidembed
