#pragma once

#include "cnl/crypto/bigint.hpp"

#include "json.hpp"

namespace cnl::crypto {

struct PublicKey {
  BigInt n;
  BigInt g;          // n + 1
  BigInt n_squared;
  std::size_t bits = 0;

  static PublicKey from_modulus(const BigInt& n);
  nlohmann::json to_json() const;  // {"n": hex, "bits": int}
  static PublicKey from_json(const nlohmann::json& j);
  bool operator==(const PublicKey& o) const { return n == o.n; }
};

struct PrivateKey {
  BigInt lambda;  // lcm(p-1, q-1)
  BigInt mu;      // lambda^-1 mod n

  nlohmann::json to_json() const;
  static PrivateKey from_json(const nlohmann::json& j);
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

enum class KeyMode { production, test };

/// Production mode requires bits >= 1024 and OS entropy. Test mode accepts
/// any even size >= 16 and a seeded source.
KeyPair paillier_keygen(std::size_t bits, RandomSource& rng, KeyMode mode = KeyMode::production);

/// Builds a key from known primes. Used for textbook-sized test keys.
KeyPair paillier_key_from_primes(const BigInt& p, const BigInt& q);

/// (1+n)^m · r^n mod n², r uniform among units mod n.
BigInt paillier_encrypt(const PublicKey& pk, const BigInt& m, RandomSource& rng);
BigInt paillier_decrypt(const PublicKey& pk, const PrivateKey& sk, const BigInt& c);
BigInt he_add(const PublicKey& pk, const BigInt& a, const BigInt& b);

}  // namespace cnl::crypto
