#include "cnl/crypto/paillier.hpp"

#include <stdexcept>

namespace cnl::crypto {

PublicKey PublicKey::from_modulus(const BigInt& n) {
  if (n < 3) throw std::invalid_argument("paillier: modulus too small");
  PublicKey pk;
  pk.n = n;
  pk.g = n + 1;
  pk.n_squared = n * n;
  pk.bits = mpz_sizeinbase(n.get_mpz_t(), 2);
  return pk;
}

nlohmann::json PublicKey::to_json() const { return {{"n", to_hex(n)}, {"bits", bits}}; }

PublicKey PublicKey::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j["n"].is_string()) {
    throw std::invalid_argument("paillier: public key JSON needs a hex string \"n\"");
  }
  PublicKey pk = from_modulus(from_hex(j["n"].get<std::string>()));
  if (j.contains("bits") && j["bits"].get<std::size_t>() != pk.bits) {
    throw std::invalid_argument("paillier: \"bits\" does not match the modulus");
  }
  return pk;
}

nlohmann::json PrivateKey::to_json() const { return {{"lambda", to_hex(lambda)}, {"mu", to_hex(mu)}}; }

PrivateKey PrivateKey::from_json(const nlohmann::json& j) {
  PrivateKey sk;
  sk.lambda = from_hex(j.at("lambda").get<std::string>());
  sk.mu = from_hex(j.at("mu").get<std::string>());
  return sk;
}

KeyPair paillier_key_from_primes(const BigInt& p, const BigInt& q) {
  if (p == q) throw std::invalid_argument("paillier: primes must be distinct");
  KeyPair kp;
  kp.pub = PublicKey::from_modulus(p * q);
  const BigInt p1 = p - 1, q1 = q - 1;
  BigInt g;
  mpz_gcd(g.get_mpz_t(), kp.pub.n.get_mpz_t(), BigInt(p1 * q1).get_mpz_t());
  if (g != 1) throw std::invalid_argument("paillier: gcd(n, (p-1)(q-1)) must be 1");
  mpz_lcm(kp.priv.lambda.get_mpz_t(), p1.get_mpz_t(), q1.get_mpz_t());
  if (mpz_invert(kp.priv.mu.get_mpz_t(), kp.priv.lambda.get_mpz_t(), kp.pub.n.get_mpz_t()) == 0) {
    throw std::invalid_argument("paillier: lambda not invertible mod n");
  }
  return kp;
}

KeyPair paillier_keygen(std::size_t bits, RandomSource& rng, KeyMode mode) {
  if (bits % 2 != 0) throw std::invalid_argument("paillier: modulus size must be even");
  if (mode == KeyMode::production) {
    if (bits < 1024) throw std::invalid_argument("paillier: production keys need at least 1024 bits");
    if (!rng.is_os()) throw std::invalid_argument("paillier: production keys need operating system entropy");
  } else if (bits < 16) {
    throw std::invalid_argument("paillier: test keys need at least 16 bits");
  }
  for (;;) {
    const BigInt p = random_prime(bits / 2, rng);
    const BigInt q = random_prime(bits / 2, rng);
    if (p == q) continue;
    return paillier_key_from_primes(p, q);
  }
}

BigInt paillier_encrypt(const PublicKey& pk, const BigInt& m, RandomSource& rng) {
  if (m < 0 || m >= pk.n) throw std::out_of_range("paillier: plaintext outside [0, n)");
  BigInt r, g;
  do {
    r = rng.below(pk.n);
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
  } while (r == 0 || g != 1);
  BigInt rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t(), pk.n_squared.get_mpz_t());
  // (1+n)^m = 1 + m·n  (mod n²)
  BigInt c = (1 + m * pk.n) % pk.n_squared;
  c = (c * rn) % pk.n_squared;
  return c;
}

BigInt paillier_decrypt(const PublicKey& pk, const PrivateKey& sk, const BigInt& c) {
  if (c <= 0 || c >= pk.n_squared) throw std::invalid_argument("paillier: malformed ciphertext");
  BigInt g;
  mpz_gcd(g.get_mpz_t(), c.get_mpz_t(), pk.n.get_mpz_t());
  if (g != 1) throw std::invalid_argument("paillier: malformed ciphertext");
  BigInt u;
  mpz_powm(u.get_mpz_t(), c.get_mpz_t(), sk.lambda.get_mpz_t(), pk.n_squared.get_mpz_t());
  const BigInt l = (u - 1) / pk.n;
  return (l * sk.mu) % pk.n;
}

BigInt he_add(const PublicKey& pk, const BigInt& a, const BigInt& b) {
  if (a <= 0 || a >= pk.n_squared || b <= 0 || b >= pk.n_squared) {
    throw std::invalid_argument("he_add: ciphertext not under this modulus");
  }
  return (a * b) % pk.n_squared;
}

}  // namespace cnl::crypto
