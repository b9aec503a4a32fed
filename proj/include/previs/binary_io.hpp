#ifndef PREVIS_BINARY_IO_HPP
#define PREVIS_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace previs {

// Blobs on disk are flat little-endian arrays, row-major.

template <typename T>
T byteswap_value(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
    std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
std::string encode_le(std::span<const T> values) {
  std::string out(values.size_bytes(), '\0');
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), values.data(), values.size_bytes());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T swapped = byteswap_value(values[i]);
      std::memcpy(out.data() + i * sizeof(T), &swapped, sizeof(T));
    }
  }
  return out;
}

template <typename T>
std::vector<T> decode_le(std::string_view bytes) {
  if (bytes.size() % sizeof(T) != 0)
    throw std::runtime_error("blob size is not a multiple of element size");
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  if constexpr (std::endian::native != std::endian::little)
    for (auto &v : out)
      v = byteswap_value(v);
  return out;
}

inline std::string encode_f64_le(std::span<const double> values) {
  return encode_le<double>(values);
}

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view bytes);

} // namespace previs

#endif
