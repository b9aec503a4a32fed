#include "previs/hash.hpp"
#include "previs/binary_io.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace previs {

struct Sha256::Impl {
  EVP_MD_CTX *ctx = nullptr;
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_MD_CTX_new();
  if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 initialisation failed");
}

Sha256::~Sha256() { EVP_MD_CTX_free(impl_->ctx); }

void Sha256::update(const void *data, std::size_t bytes) {
  EVP_DigestUpdate(impl_->ctx, data, bytes);
}

void Sha256::update_doubles(std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    update(values.data(), values.size_bytes());
  } else {
    const std::string bytes = encode_f64_le(values);
    update(bytes.data(), bytes.size());
  }
}

std::string Sha256::hex() {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

} // namespace previs
