#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

typedef struct evp_pkey_st EVP_PKEY;

namespace cnl::crypto {

using Bytes = std::vector<std::uint8_t>;

struct SealError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// RSA identity key pair. Nodes publish the public half as PEM.
class IdentityKey {
 public:
  static IdentityKey generate(int bits = 2048);
  static IdentityKey from_private_pem(const std::string& pem);
  /// Loads the PEM at `path`, or generates a key and writes it there.
  static IdentityKey load_or_create(const std::string& path, int bits = 2048);

  std::string private_pem() const;
  std::string public_pem() const;
  EVP_PKEY* handle() const { return key_.get(); }

 private:
  struct Free {
    void operator()(EVP_PKEY* k) const;
  };
  std::shared_ptr<EVP_PKEY> key_;
};

/// Hybrid seal: a fresh 32-byte session key wrapped with RSA-OAEP(SHA-256),
/// payload under ChaCha20-Poly1305.
Bytes control_seal(const std::string& recipient_public_pem, const Bytes& payload);
/// Throws SealError on a wrong key or any tampering.
Bytes control_open(const IdentityKey& key, const Bytes& sealed);

std::string base64_encode(const Bytes& data);
/// Throws std::invalid_argument on malformed input.
Bytes base64_decode(const std::string& text);

inline Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

}  // namespace cnl::crypto
