#ifndef PREVIS_HASH_HPP
#define PREVIS_HASH_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <string>

namespace previs {

/// Incremental SHA-256 (OpenSSL EVP), hex digest.
class Sha256 {
public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256 &) = delete;
  Sha256 &operator=(const Sha256 &) = delete;

  void update(const void *data, std::size_t bytes);
  void update(std::string_view text) { update(text.data(), text.size()); }
  /// Hashes the little-endian float64 encoding of the values.
  void update_doubles(std::span<const double> values);
  std::string hex();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

} // namespace previs

#endif
