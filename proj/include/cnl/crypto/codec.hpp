#pragma once

#include "cnl/crypto/paillier.hpp"

#include <vector>

namespace cnl::crypto {

/// Signed fixed point in Z_n: round(v·2^s), negatives stored as n - |.|.
class FixedPointCodec {
 public:
  explicit FixedPointCodec(BigInt n, int scale_log2 = 20, std::size_t max_addends = 64);

  BigInt encode(double v) const;
  /// Signed value divided by 2^s.
  double decode(const BigInt& x) const;
  /// decode(x) / addend_count.
  double decode_mean(const BigInt& x, std::size_t addend_count) const;

  /// Largest |v| that still leaves headroom for max_addends summands.
  double max_magnitude() const { return max_magnitude_; }
  int scale_log2() const { return scale_log2_; }
  std::size_t max_addends() const { return max_addends_; }
  const BigInt& modulus() const { return n_; }

 private:
  BigInt n_, half_;
  int scale_log2_;
  std::size_t max_addends_;
  double max_magnitude_;
};

struct CiphertextVector {
  std::vector<BigInt> components;
  int scale_log2 = 20;
  std::size_t addend_count = 1;

  nlohmann::json to_json() const;  // {"components": [hex...], "scale_log2", "addend_count"}
  static CiphertextVector from_json(const nlohmann::json& j);
};

CiphertextVector encrypt_vector(const PublicKey& pk, const FixedPointCodec& codec,
                                const std::vector<double>& values, RandomSource& rng);
/// Decrypted sum of the addends, not divided by addend_count.
std::vector<double> decrypt_vector(const PublicKey& pk, const PrivateKey& sk, const FixedPointCodec& codec,
                                   const CiphertextVector& c);

}  // namespace cnl::crypto
